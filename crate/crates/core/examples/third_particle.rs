//! Whether the interference phase is readable from the measuring device
//! when a third, distant particle shares the centre of mass.

use qrf::scenario::{run, ScenarioConfig, ScenarioId};

fn main() -> qrf::error::Result<()> {
    println!("{:>8} {:>12} {:>12} {:>12} {:>10}", "m3", "coef q1", "coef q2", "gap", "readable");
    for m3 in [1.0, 10.0, 1e3, 1e6] {
        let r = run(&ScenarioConfig { m3: Some(m3), ..ScenarioConfig::new(ScenarioId::ThirdParticle) })?;
        let s = r.shift.as_ref().unwrap();
        println!(
            "{m3:>8.0e} {:>12.6} {:>12.6} {:>12.3e} {:>10}",
            s.qpr3.coefficients[1],
            s.qpr3.coefficients[2],
            s.heavy_limit_gap,
            r.verdict("phase_accessible").unwrap()
        );
    }
    Ok(())
}
