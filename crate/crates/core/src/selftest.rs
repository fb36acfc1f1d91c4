//! Fast invariant checks behind `qrf selftest`.

use serde::{Deserialize, Serialize};

use crate::analytics::{alpha, two_branch_purity, two_branch_state};
use crate::density::{partial_trace, reduce_external, GaussianDensity};
use crate::dynamics::{
    evolve_classical_frame, evolve_relative, ClassicalFrameHamiltonian, FramePath, PotentialSpec, Profile,
    RelativeHamiltonian, Schedule,
};
use crate::error::Result;
use crate::frame::CoordinateFrame;
use crate::gaussian::{GaussianBranch, GaussianSuperposition};
use crate::grid::{Axis, GridState};
use crate::mass::MassConfig;
use crate::phase::{decompose_shift, shift_expectation};
use crate::scenario::{self, ScenarioConfig, ScenarioId};
use crate::state::State;
use crate::transform::catalog;
use crate::uncertainty::verify_bounds;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name: name.into(), passed, detail },
        Err(e) => Check { name: name.into(), passed: false, detail: format!("error: {e}") },
    }
}

fn m(v: &[f64]) -> Result<MassConfig> {
    MassConfig::new(v.to_vec())
}

pub fn run() -> Vec<Check> {
    vec![
        check("catalog_symplectic", || {
            let three = m(&[1.0, 2.0, 3.0])?;
            let mut worst = catalog::ak()?.symplectic_error();
            for name in catalog::NAMES.iter().filter(|n| **n != "ak") {
                worst = worst.max(catalog::by_name(name, &three)?.symplectic_error());
            }
            Ok((worst < 1e-12, format!("max error {worst:e}")))
        }),
        check("two_branch_purity", || {
            let s = two_branch_state(&m(&[1.0, 1.0])?, [0.0, 0.0], [1.0, 1.0], [0.5, 0.5], 0.0)?;
            let got = GaussianDensity::partial_trace(&s, &[0])?.purity()?;
            let want = two_branch_purity(alpha(1.0, 0.5)?)?;
            Ok(((got - want).abs() < 1e-12, format!("{got} vs {want}")))
        }),
        check("backends_agree_on_reduction", || {
            let s = two_branch_state(&m(&[1.0, 2.0])?, [0.0, 0.0], [1.5, -1.0], [0.5, 0.6], 0.4)?;
            let axes = scenario::covering_axes(&s)?;
            let grid = partial_trace(&GridState::rasterize(&s, &axes)?, &[1])?;
            let exact = GaussianDensity::partial_trace(&s, &[1])?.to_grid(&axes[1..])?;
            let diff = grid.max_abs_diff(&exact)?;
            Ok((diff < 1e-5, format!("max |Δρ| {diff:e}")))
        }),
        check("reduced_trace", || {
            let s = State::from(two_branch_state(&m(&[1.0, 3.0])?, [0.0, 0.0], [2.0, 1.0], [0.3, 0.4], 1.0)?);
            let t = reduce_external(&s, 1)?.trace()?;
            Ok(((t - 1.0).abs() < 1e-10, format!("trace {t}")))
        }),
        check("relative_uncertainty_bounds", || {
            let masses = m(&[1.0, 2.0, 0.5])?;
            let cov = nalgebra::DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.3, 0.8, 0.1, -0.2, 0.1, 0.6]);
            let b = GaussianBranch::with_covariance(num_complex::Complex64::new(1.0, 0.0), vec![0.0; 3], cov, vec![0.1, 0.0, -0.2])?;
            let s = State::from(GaussianSuperposition::new(CoordinateFrame::absolute(3), masses, vec![b])?);
            let r = verify_bounds(&s)?;
            Ok((r.checks.iter().all(|c| c.satisfied), format!("min margin {:e}", r.min_margin)))
        }),
        check("phase_probe", || {
            let phi = 0.9;
            let s = State::from(two_branch_state(&m(&[1.0, 1.0])?, [0.0, 0.0], [2.0, -2.0], [0.1, 0.1], phi)?);
            let v = shift_expectation(&s, &[2.0, -2.0])?;
            let d = decompose_shift(&[2.0, -2.0], s.masses(), "cm_relative")?;
            let ok = (v.arg() - phi).abs() < 1e-6 && d.accessible && d.reconstruction_error < 1e-10;
            Ok((ok, format!("arg {} vs {phi}", v.arg())))
        }),
        check("split_step_norm", || {
            let masses = m(&[1.0, 1.0])?;
            let h = RelativeHamiltonian::new(masses.clone(), PotentialSpec::free().with_term(0, 1, Profile::Harmonic { k: 1.0 }))?;
            let axes = [Axis::centered(12.0, 64)?];
            let s = GridState::packet(CoordinateFrame::relative_only(&masses), masses, &axes, &[1.0], &[0.6], &[0.0])?;
            let t = evolve_relative(&h, &s, Schedule::new(2e-3, 200))?;
            Ok((t.norm_drift() < 1e-10 && t.energy_drift() < 1e-6, format!("norm drift {:e}", t.norm_drift())))
        }),
        check("classical_frames_agree", || {
            let axes = [Axis::centered(10.0, 128)?];
            let masses = m(&[1.0])?;
            let s = GridState::packet(CoordinateFrame::classical(1), masses.clone(), &axes, &[0.0], &[0.5], &[0.2])?;
            let v = PotentialSpec::free().with_term(0, 1, Profile::Harmonic { k: 1.0 });
            let mut finals = Vec::new();
            for eps in [-1.0, 1.0] {
                let h = ClassicalFrameHamiltonian::new(eps, FramePath::uniform_acceleration(1.0), masses.clone(), v.clone())?;
                let t = evolve_classical_frame(&h, &s, Schedule::new(1e-3, 200))?;
                finals.push(t.samples.last().map(|x| x.mean_x[0]).unwrap_or(f64::NAN));
            }
            let gap = (finals[0] - finals[1]).abs();
            Ok((gap < 1e-6, format!("⟨x⟩ gap {gap:e}")))
        }),
        check("board_heavy_limit", || {
            let cfg = ScenarioConfig { m_b: 1e6, ..ScenarioConfig::new(ScenarioId::Board) };
            let r = scenario::run(&cfg)?;
            let p2 = r.interference_in("lab").map(|i| i.p2).unwrap_or(1.0);
            Ok((p2 < 1e-3, format!("P(detector 2) {p2:e}")))
        }),
        check("third_particle_flip", || {
            let light = scenario::run(&ScenarioConfig::new(ScenarioId::ThirdParticle))?;
            let heavy = scenario::run(&ScenarioConfig { m3: Some(1e6), ..ScenarioConfig::new(ScenarioId::ThirdParticle) })?;
            let (a, b) = (light.verdict("phase_accessible"), heavy.verdict("phase_accessible"));
            Ok((a == Some(false) && b == Some(true), format!("m3 = m_p: {a:?}, m3 = 1e6: {b:?}")))
        }),
    ]
}
