//! Reading the relative phase of a two-branch state with the shift
//! operator, and deciding when it is visible from inside the frame.

use std::f64::consts::PI;

use qrf::analytics::two_branch_state;
use qrf::mass::MassConfig;
use qrf::phase::{decompose_shift, probe};
use qrf::state::State;

fn main() -> qrf::error::Result<()> {
    let masses = MassConfig::new(vec![1.0, 2.0])?;
    let phi = PI / 3.0;
    for delta in [[2.0, -2.0], [2.0, -1.0]] {
        let s = State::from(two_branch_state(&masses, [0.0, 0.0], delta, [0.1, 0.1], phi)?);
        let r = probe(&s, &delta, "cm_relative")?;
        println!("delta {delta:?}");
        println!("  |<e^iS>| = {:.4}, arg = {:.6} (phi = {phi:.6})", r.modulus, r.phase);
        println!("  delta_cm = {:+.4}, accessible from inside: {}", r.decomposition.delta_cm, r.relative_access);
        for (l, c) in r.decomposition.labels.iter().zip(&r.decomposition.coefficients) {
            println!("  {l:>6}: {c:+.4}");
        }
    }
    let d = decompose_shift(&[0.0, 2.0, 0.0], &MassConfig::new(vec![1.0, 1.0, 1e6])?, "qpr3")?;
    println!("\nthird particle of mass 1e6, shift 2 p_1 in the qpr3 basis: {:?}", d.coefficients);
    Ok(())
}
