//! Split-step evolution inside a light quantum frame: the frame recoil
//! couples the two relative coordinates and entangles them; a heavy frame
//! does not.

use std::f64::consts::PI;

use qrf::dynamics::{evolve_relative, partition_entropy, PotentialSpec, Profile, RelativeHamiltonian, Schedule};
use qrf::frame::CoordinateFrame;
use qrf::grid::{Axis, GridState};
use qrf::mass::MassConfig;

fn main() -> qrf::error::Result<()> {
    for m0 in [1.0, 10.0, 1e6] {
        let masses = MassConfig::new(vec![m0, 1.0, 1.0])?;
        let v = PotentialSpec::free().with_term(0, 1, Profile::Harmonic { k: 1.0 });
        let h = RelativeHamiltonian::new(masses.clone(), v)?;
        let axes = [Axis::centered(24.0, 64)?, Axis::centered(24.0, 64)?];
        let s = GridState::packet(CoordinateFrame::relative_only(&masses), masses.clone(), &axes, &[1.0, 0.0], &[0.7, 1.0], &[0.0, 0.0])?;
        let dt = 2.5e-3;
        let steps = (2.0 * PI * masses.reduced(1).sqrt() / dt).ceil() as usize;
        let t = evolve_relative(&h, &s, Schedule::new(dt, steps).with_stride(steps / 8))?;
        let peak = t.snapshots.iter().map(|(_, g)| partition_entropy(g, &[0]).unwrap()).fold(0.0, f64::max);
        let pi: Vec<f64> = t.samples.iter().map(|x| x.mean_p.iter().sum()).collect();
        println!(
            "m0 = {m0:<8} steps {steps:>5}  norm drift {:.1e}  energy drift {:.1e}  <Pi> range {:.2e}  peak entropy {peak:.3e}",
            t.norm_drift(),
            t.energy_drift(),
            pi.iter().cloned().fold(f64::MIN, f64::max) - pi.iter().cloned().fold(f64::MAX, f64::min),
        );
    }
    Ok(())
}
