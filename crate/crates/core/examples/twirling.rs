//! The relative state obtained by averaging over centre-of-mass
//! translations, compared with tracing out the centre of mass directly.

use num_complex::Complex64;
use qrf::density::{twirl, GaussianDensity};
use qrf::frame::CoordinateFrame;
use qrf::gaussian::{GaussianBranch, GaussianSuperposition};
use qrf::grid::Axis;
use qrf::mass::MassConfig;
use qrf::scenario::covering_axes;
use qrf::transform::catalog;

fn main() -> qrf::error::Result<()> {
    let masses = MassConfig::new(vec![2.0, 1.0, 1.0])?;
    let w = vec![0.9; 3];
    let branches = vec![
        GaussianBranch::new(Complex64::new(1.0, 0.0), vec![0.0, 0.0, 0.0], w.clone(), vec![0.0; 3])?,
        GaussianBranch::new(Complex64::from_polar(1.0, -0.8), vec![0.5, 1.5, -1.0], w, vec![0.0; 3])?,
    ];
    let psi = GaussianSuperposition::new(CoordinateFrame::absolute(3), masses.clone(), branches)?;

    let rel = catalog::cm_relative(&masses)?.apply_to_gaussian(&psi)?;
    let axes: Vec<Axis> = covering_axes(&rel)?[1..].iter().map(|a| Axis::new(a.min, a.max, 32)).collect::<Result<_, _>>()?;
    let u = Axis::new(-16.0, 16.0, 256)?;

    let twirled = twirl(&psi, &masses, u, &axes)?;
    let passive = GaussianDensity::partial_trace(&rel, &[1, 2])?.to_grid(&axes)?;
    let moved = twirl(&psi.translated(&[0.37; 3])?, &masses, u, &axes)?;

    println!("matrix size          {} x {}", twirled.size(), twirled.size());
    println!("trace                {:.12}", twirled.trace());
    println!("purity               {:.6}", twirled.purity());
    println!("twirl vs passive     {:.2e}", twirled.max_abs_diff(&passive)?);
    println!("after translating    {:.2e}", twirled.max_abs_diff(&moved)?);
    Ok(())
}
