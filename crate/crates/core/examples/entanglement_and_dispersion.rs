//! Closed-form purity and dispersion results checked against the Gaussian
//! backend, plus the internal entanglement created by the cm/relative split.

use qrf::analytics::{alpha, dispersion_ratio, internal_purity, two_branch_entropy, two_branch_state, variance_pair};
use qrf::density::GaussianDensity;
use qrf::mass::MassConfig;

fn main() -> qrf::error::Result<()> {
    let masses = MassConfig::new(vec![1.0, 1.0])?;
    let width = 1.0;
    println!("{:>6} {:>10} {:>10} {:>12} {:>12}", "delta", "alpha", "E", "ratio", "from moments");
    for delta in [0.5, 1.0, 2.0, 3.0, 4.0] {
        let a = alpha(delta, width)?;
        let e = two_branch_entropy(a)?;
        let s = two_branch_state(&masses, [0.0, 0.0], [delta, delta], [width, width], 0.0)?;
        let backend = 1.0 - GaussianDensity::partial_trace(&s, &[1])?.purity()?;
        assert!((backend - e).abs() < 1e-12);
        let (dxr, dx1) = variance_pair(delta, width)?;
        println!("{delta:>6.1} {a:>10.4} {e:>10.6} {:>12.6} {:>12.6}", dispersion_ratio(e)?, dx1 / dxr);
    }

    println!("\ninternal purity, m0 = 1, widths 1 and d1:");
    for m1 in [0.5, 1.0, 4.0] {
        let row: Vec<String> = [0.25, 0.5, 1.0, 2.0]
            .iter()
            .map(|d1| format!("{:.4}", internal_purity(1.0, m1, 1.0, *d1).unwrap()))
            .collect();
        println!("  m1 = {m1:<4} {}", row.join("  "));
    }
    println!("  (separable where m0 d0^2 = m1 d1^2, e.g. m1 = 4, d1 = 0.5)");
    Ok(())
}
