use nalgebra::DMatrix;
use num_complex::Complex64;
use qrf::frame::CoordinateFrame;
use qrf::gaussian::{GaussianBranch, GaussianSuperposition};
use qrf::mass::MassConfig;
use qrf::state::State;
use qrf::uncertainty::{commutator_matrix, verify_bounds};

/// Cross-pair bounds `Δx_rj Δp_rk` for a correlated three-particle state.
fn main() -> qrf::error::Result<()> {
    let masses = MassConfig::new(vec![1.0, 2.0, 0.5])?;
    let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.3, 0.8, 0.1, -0.2, 0.1, 0.6]);
    let b = GaussianBranch::with_covariance(Complex64::new(1.0, 0.0), vec![0.0; 3], cov, vec![0.1, 0.0, -0.2])?;
    let s = State::from(GaussianSuperposition::new(CoordinateFrame::absolute(3), masses.clone(), vec![b])?);

    println!("[x_rj, p_rk] / iħ:");
    println!("{}", commutator_matrix(&masses, &["x_r1", "x_r2"], &["p_r1", "p_r2"])?);
    let report = verify_bounds(&s)?;
    for c in &report.checks {
        println!("  j={} k={}  product {:.5}  bound {:.5}  margin {:+.5}", c.j, c.k, c.product, c.bound, c.margin);
    }
    println!("min margin {:.3e}", report.min_margin);
    Ok(())
}
