//! One packet seen from a uniformly accelerating classical origin, with
//! the frame term written as a vector potential (ε = 1), a uniform field
//! (ε = −1) or half of each.

use qrf::dynamics::{evolve_classical_frame, ClassicalFrameHamiltonian, FramePath, PotentialSpec, Profile, Schedule};
use qrf::frame::CoordinateFrame;
use qrf::grid::{Axis, GridState};
use qrf::mass::MassConfig;

fn main() -> qrf::error::Result<()> {
    let masses = MassConfig::new(vec![1.0])?;
    let axes = [Axis::centered(10.0, 128)?];
    let s = GridState::packet(CoordinateFrame::classical(1), masses.clone(), &axes, &[1.0], &[0.5], &[0.2])?;
    let v = PotentialSpec::free().with_term(0, 1, Profile::Harmonic { k: 1.0 });
    let steps = 1000;
    let mut tracks = Vec::new();
    for eps in [-1.0, 0.0, 1.0] {
        let h = ClassicalFrameHamiltonian::new(eps, FramePath::uniform_acceleration(1.0), masses.clone(), v.clone())?;
        tracks.push(evolve_classical_frame(&h, &s, Schedule::new(1e-3, steps))?);
    }
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "eps = -1", "eps = 0", "eps = 1");
    for n in (0..=steps).step_by(200) {
        let x: Vec<f64> = tracks.iter().map(|t| t.samples[n].mean_x[0]).collect();
        println!("{:>6.2} {:>12.8} {:>12.8} {:>12.8}", tracks[0].samples[n].t, x[0], x[1], x[2]);
    }
    Ok(())
}
