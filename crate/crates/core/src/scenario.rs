//! Board interferometer, measuring device (MD) attachments and the
//! third-particle setup, built from branch-centre bookkeeping.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::{partial_trace, GaussianDensity};
use crate::error::{QrfError, Result};
use crate::frame::CoordinateFrame;
use crate::gaussian::{GaussianBranch, GaussianSuperposition};
use crate::grid::{Axis, GridState, CLEARANCE_WIDTHS};
use crate::mass::MassConfig;
use crate::phase::{self, PiForm, ShiftDecomposition};
use crate::state::State;
use crate::transform::catalog;

pub const REPORT_SCHEMA: &str = "qrf-report/1";
/// Heavy MD mass as a multiple of the largest other mass.
pub const HEAVY_FACTOR: f64 = 1e6;
/// Width of "sharp" packets relative to `Δ`.
pub const SHARP_FACTOR: f64 = 0.01;
/// A port counts as dark below this click probability.
pub const DARK_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    Board,
    BoardMd,
    ThirdParticle,
}

impl ScenarioId {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Board => "board",
            ScenarioId::BoardMd => "board-md",
            ScenarioId::ThirdParticle => "third-particle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attachment {
    External,
    Board,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Gaussian,
    Grid,
}

fn one() -> f64 {
    1.0
}

fn quarter_turn() -> f64 {
    FRAC_PI_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    #[serde(default = "one")]
    pub m_p: f64,
    #[serde(default = "one")]
    pub m_b: f64,
    #[serde(default)]
    pub m_md: Option<f64>,
    #[serde(default)]
    pub m3: Option<f64>,
    #[serde(default = "one")]
    pub l: f64,
    /// Position of the third particle.
    #[serde(default)]
    pub x: f64,
    #[serde(default = "quarter_turn")]
    pub phase: f64,
    /// Packet width `Δ`; defaults to `L/20`.
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub attachment: Option<Attachment>,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "one")]
    pub hbar: f64,
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioId) -> Self {
        Self {
            scenario,
            m_p: 1.0,
            m_b: 1.0,
            m_md: None,
            m3: None,
            l: 1.0,
            x: 0.0,
            phase: FRAC_PI_2,
            width: None,
            attachment: None,
            backend: Backend::Gaussian,
            hbar: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.width.unwrap_or(self.l / 20.0)
    }

    fn validate(&self) -> Result<()> {
        let masses = [Some(self.m_p), Some(self.m_b), self.m_md, self.m3];
        if masses.iter().flatten().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(QrfError::InvalidMasses("scenario masses must be positive".into()));
        }
        if !(self.l > 0.0) {
            return Err(QrfError::InvalidArgument(format!("arm length {} must be positive", self.l)));
        }
        let w = self.width();
        if !(w > 0.0) || w > self.l / 20.0 {
            return Err(QrfError::InvalidArgument(format!("width {w} must lie in (0, L/20]")));
        }
        if self.backend == Backend::Grid && self.scenario != ScenarioId::Board {
            return Err(QrfError::Config("the grid backend covers the board scenario only".into()));
        }
        Ok(())
    }
}

/// Branch centres of one description of the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchTable {
    pub system: String,
    pub labels: Vec<String>,
    pub coefficients: Vec<[f64; 2]>,
    pub centers: Vec<Vec<f64>>,
}

impl BranchTable {
    fn of(system: &str, s: &GaussianSuperposition) -> Self {
        Self {
            system: system.to_string(),
            labels: s.frame().position_labels(),
            coefficients: s.branches().iter().map(|b| [b.coefficient.re, b.coefficient.im]).collect(),
            centers: s.branches().iter().map(|b| b.centers.iter().copied().collect()).collect(),
        }
    }
}

/// Two-path interference as seen in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interference {
    pub frame: String,
    pub path: String,
    /// `e^{iφ} ⟨record_A|record_B⟩` after the path coordinate is recombined.
    pub coherence: [f64; 2],
    pub visibility: f64,
    /// `√((4P − P_A − P_B) / 2√(P_A P_B))` from the purities of the path
    /// coordinate's reduced state and of each branch alone; `√(2P − 1)`
    /// when the branches are pure on the path.
    pub visibility_from_purity: f64,
    pub p1: f64,
    pub p2: f64,
    pub dark_port: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entanglement {
    pub description: String,
    pub purity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSection {
    pub delta: Vec<f64>,
    pub pi_form: PiForm,
    pub cm_relative: ShiftDecomposition,
    pub qpr3: ShiftDecomposition,
    /// Limit `m₃ → ∞` of the `(p_r1, p_r2)` coefficients.
    pub heavy_limit: [f64; 2],
    /// Largest relative gap between the exact and limiting coefficients.
    pub heavy_limit_gap: f64,
    pub expectation: [f64; 2],
    pub relative_expectation: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub schema: String,
    pub scenario: ScenarioId,
    pub config: ScenarioConfig,
    pub masses: Vec<f64>,
    pub d: Option<f64>,
    pub d_prime: Option<f64>,
    /// Largest difference of the branch centres of mass.
    pub cm_spread: f64,
    pub branches: Vec<BranchTable>,
    pub interference: Vec<Interference>,
    pub relative_purity: Option<f64>,
    pub entanglement: Vec<Entanglement>,
    pub shift: Option<ShiftSection>,
    pub verdicts: Vec<Verdict>,
}

impl ScenarioReport {
    fn new(cfg: &ScenarioConfig, masses: &MassConfig) -> Self {
        Self {
            schema: REPORT_SCHEMA.to_string(),
            scenario: cfg.scenario,
            config: cfg.clone(),
            masses: masses.masses().to_vec(),
            d: None,
            d_prime: None,
            cm_spread: 0.0,
            branches: vec![],
            interference: vec![],
            relative_purity: None,
            entanglement: vec![],
            shift: None,
            verdicts: vec![],
        }
    }

    pub fn verdict(&self, name: &str) -> Option<bool> {
        self.verdicts.iter().find(|v| v.name == name).map(|v| v.holds)
    }

    pub fn interference_in(&self, frame: &str) -> Option<&Interference> {
        self.interference.iter().find(|i| i.frame == frame)
    }

    fn push_verdict(&mut self, name: &str, holds: bool) {
        self.verdicts.push(Verdict { name: name.to_string(), holds });
    }
}

/// Recoil of the board, `2 L m_p / (m_p + m_b)`.
pub fn recoil(l: f64, m_p: f64, m_b: f64) -> f64 {
    2.0 * l * m_p / (m_p + m_b)
}

/// Recoil of board and MD moving together, `2 L m_p / (m_p + m_b + m_MD)`.
pub fn recoil_with_md(l: f64, m_p: f64, m_b: f64, m_md: f64) -> f64 {
    2.0 * l * m_p / (m_p + m_b + m_md)
}

fn two_branches(
    masses: &MassConfig,
    centers: [Vec<f64>; 2],
    widths: &[f64],
    phase: f64,
) -> Result<GaussianSuperposition> {
    let n = masses.len();
    let [ca, cb] = centers;
    let a = GaussianBranch::new(Complex64::new(1.0, 0.0), ca, widths.to_vec(), vec![0.0; n])?;
    let b = GaussianBranch::new(Complex64::from_polar(1.0, phase), cb, widths.to_vec(), vec![0.0; n])?;
    GaussianSuperposition::new(CoordinateFrame::absolute(n), masses.clone(), vec![a, b])
}

fn cm_spread(s: &GaussianSuperposition) -> f64 {
    let m = s.masses();
    let cms: Vec<f64> = s
        .branches()
        .iter()
        .map(|b| b.centers.iter().zip(m.masses()).map(|(x, m)| x * m).sum::<f64>() / m.total())
        .collect();
    let lo = cms.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// The state with particle `reference` moved to slot 0, in its
/// `(x_cm, x_r…)` coordinates.
fn seen_from(s: &GaussianSuperposition, reference: usize) -> Result<GaussianSuperposition> {
    let n = s.masses().len();
    let mut order = vec![reference];
    order.extend((0..n).filter(|&i| i != reference));
    let masses = s.masses().permuted(&order)?;
    let branches = s
        .branches()
        .iter()
        .map(|b| {
            let c: Vec<f64> = order.iter().map(|&i| b.centers[i]).collect();
            let w: Vec<f64> = order.iter().map(|&i| b.covariance[(i, i)].sqrt()).collect();
            GaussianBranch::new(b.coefficient, c, w, vec![0.0; n])
        })
        .collect::<Result<Vec<_>>>()?;
    let permuted = GaussianSuperposition::new(CoordinateFrame::absolute(n), masses.clone(), branches)?;
    catalog::cm_relative(&masses)?.apply_to_gaussian(&permuted)
}

fn click_probabilities(coherence: Complex64) -> (f64, f64) {
    // port 2 takes A transmitted and B reflected: amplitude (A + i e^{iφ} B)/2
    let turned = (coherence * Complex64::from_polar(1.0, -FRAC_PI_2)).re;
    (0.5 * (1.0 + turned), 0.5 * (1.0 - turned))
}

fn dark_port(p1: f64, p2: f64) -> Option<u8> {
    if p2 < DARK_LIMIT {
        Some(2)
    } else if p1 < DARK_LIMIT {
        Some(1)
    } else {
        None
    }
}

fn branch_pair(s: &GaussianSuperposition) -> Result<(GaussianSuperposition, GaussianSuperposition, Complex64)> {
    let [a, b] = s.branches() else {
        return Err(QrfError::InvalidBranch("interference needs exactly two branches".into()));
    };
    let rel = b.coefficient / a.coefficient;
    Ok((s.branch_state(0)?, s.branch_state(1)?, rel / rel.norm()))
}

/// Recombines the path coordinate of branch B onto branch A and overlaps the rest.
fn interference(frame: &str, s: &GaussianSuperposition, path: usize) -> Result<Interference> {
    let (a, b, phase) = branch_pair(s)?;
    let mut shift = vec![0.0; s.dim()];
    shift[path] = a.branches()[0].centers[path] - b.branches()[0].centers[path];
    let coherence = phase * a.inner_product(&b.translated(&shift)?)?;
    let purity = |x: &GaussianSuperposition| GaussianDensity::partial_trace(x, &[path])?.purity();
    let purities = [purity(s)?, purity(&a)?, purity(&b)?];
    finish_interference(frame, s.frame().position_labels()[path].clone(), coherence, purities)
}

fn finish_interference(frame: &str, path: String, coherence: Complex64, purities: [f64; 3]) -> Result<Interference> {
    let (p1, p2) = click_probabilities(coherence);
    let [p, pa, pb] = purities;
    let v2 = (4.0 * p - pa - pb) / (2.0 * (pa * pb).sqrt());
    Ok(Interference {
        frame: frame.to_string(),
        path,
        coherence: [coherence.re, coherence.im],
        visibility: coherence.norm(),
        visibility_from_purity: v2.max(0.0).sqrt(),
        p1,
        p2,
        dark_port: dark_port(p1, p2),
    })
}

/// Axes covering every branch with the clearance margin, about three points per width.
pub fn covering_axes(s: &GaussianSuperposition) -> Result<Vec<Axis>> {
    (0..s.dim())
        .map(|k| {
            let w: f64 = s.branches().iter().map(|b| b.covariance[(k, k)].sqrt()).fold(0.0, f64::max);
            let lo = s.branches().iter().map(|b| b.centers[k]).fold(f64::INFINITY, f64::min);
            let hi = s.branches().iter().map(|b| b.centers[k]).fold(f64::NEG_INFINITY, f64::max);
            let margin = (CLEARANCE_WIDTHS as f64 + 2.0) * w;
            let span = hi - lo + 2.0 * margin;
            let n = ((3.0 * span / w).ceil() as usize).next_power_of_two();
            Axis::new(lo - margin, hi + margin, n)
        })
        .collect()
}

fn grid_interference(frame: &str, s: &GaussianSuperposition, path: usize) -> Result<Interference> {
    let (a, b, phase) = branch_pair(s)?;
    let axes = covering_axes(s)?;
    let ga = State::from(GridState::rasterize(&a, &axes)?);
    let gb = State::from(GridState::rasterize(&b, &axes)?);
    let mut shift = vec![0.0; s.dim()];
    shift[path] = a.branches()[0].centers[path] - b.branches()[0].centers[path];
    let coherence = phase * ga.inner_product(&gb.translated(&shift)?)?;
    let purity = |x: &GaussianSuperposition| -> Result<f64> {
        Ok(partial_trace(&GridState::rasterize(x, &axes)?, &[path])?.purity())
    };
    let purities = [purity(s)?, purity(&a)?, purity(&b)?];
    finish_interference(frame, s.frame().position_labels()[path].clone(), coherence, purities)
}

fn interference_with(backend: Backend, frame: &str, s: &GaussianSuperposition, path: usize) -> Result<Interference> {
    match backend {
        Backend::Gaussian => interference(frame, s, path),
        Backend::Grid => grid_interference(frame, s, path),
    }
}

/// Board (particle 0) and particle; the particle splits into arms `±L`.
pub fn run_board(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    if cfg.scenario != ScenarioId::Board {
        return Err(QrfError::Config(format!("run_board called for `{}`", cfg.scenario.name())));
    }
    cfg.validate()?;
    let masses = MassConfig::with_hbar(vec![cfg.m_b, cfg.m_p], cfg.hbar)?;
    let (l, w) = (cfg.l, cfg.width());
    let d = recoil(l, cfg.m_p, cfg.m_b);
    let s = two_branches(&masses, [vec![d, -l + d], vec![0.0, l]], &[w, w], cfg.phase)?;
    let rel = catalog::cm_relative(&masses)?.apply_to_gaussian(&s)?;

    let mut r = ScenarioReport::new(cfg, &masses);
    r.d = Some(d);
    r.cm_spread = cm_spread(&s);
    r.branches = vec![BranchTable::of("lab", &s), BranchTable::of("board", &rel)];
    r.interference = vec![
        interference_with(cfg.backend, "lab", &s, 1)?,
        interference_with(cfg.backend, "board", &rel, 1)?,
    ];
    r.relative_purity = Some(GaussianDensity::partial_trace(&rel, &[1])?.purity()?);
    let lab = r.interference[0].clone();
    let board = r.interference[1].clone();
    r.push_verdict("lab_single_detector", lab.dark_port.is_some());
    r.push_verdict("board_single_detector", board.dark_port.is_some());
    r.push_verdict("relative_state_pure", r.relative_purity.unwrap() > 1.0 - 1e-9);
    Ok(r)
}

/// Board, particle and MD, with the MD fixed in the lab or riding on the board.
pub fn run_board_with_md(cfg: &ScenarioConfig, attachment: Attachment) -> Result<ScenarioReport> {
    if cfg.scenario != ScenarioId::BoardMd {
        return Err(QrfError::Config(format!("run_board_with_md called for `{}`", cfg.scenario.name())));
    }
    cfg.validate()?;
    let (l, w) = (cfg.l, cfg.width());
    let heavy = HEAVY_FACTOR * cfg.m_p.max(cfg.m_b);
    let mut r;
    match attachment {
        Attachment::External => {
            let m_md = cfg.m_md.unwrap_or(heavy);
            let masses = MassConfig::with_hbar(vec![m_md, cfg.m_b, cfg.m_p], cfg.hbar)?;
            let d = recoil(l, cfg.m_p, cfg.m_b);
            let widths = [SHARP_FACTOR * w, w, w];
            let s = two_branches(&masses, [vec![0.0, d, -l + d], vec![0.0, 0.0, l]], &widths, cfg.phase)?;
            let md_view = seen_from(&s, 0)?;
            let board_view = seen_from(&s, 1)?;
            r = ScenarioReport::new(cfg, &masses);
            r.d = Some(d);
            r.cm_spread = cm_spread(&s);
            r.branches = vec![
                BranchTable::of("lab", &s),
                BranchTable::of("md", &md_view),
                BranchTable::of("board", &board_view),
            ];
            r.interference = vec![
                interference("lab", &s, 2)?,
                interference("md", &md_view, 2)?,
                interference("board", &board_view, 2)?,
            ];
            let md_particle = GaussianDensity::partial_trace(&board_view, &[2])?.purity()?;
            r.entanglement.push(Entanglement { description: "board view: particle against MD".into(), purity: md_particle });
            r.relative_purity = Some(GaussianDensity::partial_trace(&board_view, &[1, 2])?.purity()?);
            let md = r.interference[1].clone();
            r.push_verdict("md_both_detectors_click", md.dark_port.is_none());
            r.push_verdict("board_sees_md_particle_entanglement", md_particle < 1.0 - 1e-3);
        }
        Attachment::Board => {
            let m_md = cfg.m_md.unwrap_or(cfg.m_b);
            let masses = MassConfig::with_hbar(vec![m_md, cfg.m_b, cfg.m_p], cfg.hbar)?;
            let dp = recoil_with_md(l, cfg.m_p, cfg.m_b, m_md);
            let widths = [w, w, w];
            let split = two_branches(&masses, [vec![dp, dp, -l + dp], vec![0.0, 0.0, l]], &widths, cfg.phase)?;
            let final_state = two_branches(&masses, recombined(&split, l)?, &widths, cfg.phase)?;
            let md_view = seen_from(&split, 0)?;
            r = ScenarioReport::new(cfg, &masses);
            r.d_prime = Some(dp);
            r.cm_spread = cm_spread(&split).max(cm_spread(&final_state));
            r.branches = vec![
                BranchTable::of("lab", &split),
                BranchTable::of("md", &md_view),
                BranchTable::of("lab_final", &final_state),
            ];
            r.interference = vec![
                interference("lab", &split, 2)?,
                interference("md", &md_view, 2)?,
                interference("lab_final", &final_state, 2)?,
            ];
            r.relative_purity = Some(GaussianDensity::partial_trace(&md_view, &[1, 2])?.purity()?);
            let md = r.interference[1].clone();
            let fin = r.interference[2].clone();
            r.push_verdict("md_single_detector", md.dark_port.is_some());
            r.push_verdict("lab_which_way_erased", fin.visibility > 1.0 - 1e-6);
        }
    }
    Ok(r)
}

/// Final branch centres: MD and board move rigidly and the particle sits at
/// `−L` from them, with each branch keeping its centre of mass.
fn recombined(s: &GaussianSuperposition, l: f64) -> Result<[Vec<f64>; 2]> {
    let m = s.masses();
    let total = m.total();
    let place = |b: &GaussianBranch| {
        let cm: f64 = b.centers.iter().zip(m.masses()).map(|(x, m)| x * m).sum::<f64>() / total;
        let y = cm + m.mass(2) * l / total;
        vec![y, y, y - l]
    };
    Ok([place(&s.branches()[0]), place(&s.branches()[1])])
}

/// MD (particle 0), the interfering particle and a distant third particle.
pub fn run_third_particle(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    if cfg.scenario != ScenarioId::ThirdParticle {
        return Err(QrfError::Config(format!("run_third_particle called for `{}`", cfg.scenario.name())));
    }
    cfg.validate()?;
    let (l, w) = (cfg.l, cfg.width());
    let m_md = cfg.m_md.unwrap_or(cfg.m_p);
    let m3 = cfg.m3.unwrap_or(cfg.m_p);
    let masses = MassConfig::with_hbar(vec![m_md, cfg.m_p, m3], cfg.hbar)?;
    let widths = [w, w, SHARP_FACTOR * w];
    let s = two_branches(&masses, [vec![0.0, -l, cfg.x], vec![0.0, l, cfg.x]], &widths, cfg.phase)?;
    let rel = catalog::cm_relative(&masses)?.apply_to_gaussian(&s)?;

    let mut r = ScenarioReport::new(cfg, &masses);
    r.cm_spread = cm_spread(&s);
    r.branches = vec![BranchTable::of("lab", &s), BranchTable::of("md", &rel)];
    r.interference = vec![interference("md", &rel, 1)?];
    let purity = GaussianDensity::partial_trace(&rel, &[1, 2])?.purity()?;
    r.relative_purity = Some(purity);

    let delta = vec![0.0, 2.0 * l, 0.0];
    let state = State::from(s.clone());
    let report = phase::probe(&state, &delta, "qpr3")?;
    let cm_rel = phase::decompose_shift(&delta, &masses, "cm_relative")?;
    let heavy_limit = phase::heavy_third_coefficients(l, &masses)?;
    let exact = &report.decomposition.coefficients;
    let heavy_limit_gap = (0..2)
        .map(|i| ((exact[i + 1] - heavy_limit[i]) / heavy_limit[i]).abs())
        .fold(0.0, f64::max);
    r.shift = Some(ShiftSection {
        delta: delta.clone(),
        pi_form: phase::heavy_limit_pi_form(2.0 * l, &masses, 1)?,
        cm_relative: cm_rel,
        qpr3: report.decomposition.clone(),
        heavy_limit,
        heavy_limit_gap,
        expectation: report.value,
        relative_expectation: report.relative_value,
    });
    r.push_verdict("cm_entangled", purity < 1.0 - 1e-4);
    r.push_verdict("phase_accessible", report.relative_access);
    r.push_verdict("shift_free_of_cm", report.decomposition.accessible);
    Ok(r)
}

/// Dispatches on the scenario id; `board-md` defaults to the board attachment.
pub fn run(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    match cfg.scenario {
        ScenarioId::Board => run_board(cfg),
        ScenarioId::BoardMd => run_board_with_md(cfg, cfg.attachment.unwrap_or(Attachment::Board)),
        ScenarioId::ThirdParticle => run_third_particle(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn board(m_p: f64, m_b: f64) -> ScenarioConfig {
        ScenarioConfig { m_p, m_b, ..ScenarioConfig::new(ScenarioId::Board) }
    }

    #[test]
    fn recoil_values() {
        assert_eq!(recoil(1.0, 1.0, 3.0), 0.5);
        assert_eq!(recoil_with_md(1.0, 1.0, 1.0, 2.0), 0.5);
    }

    #[test]
    fn heavy_board_keeps_one_port_dark() {
        let r = run_board(&board(1.0, 1e6)).unwrap();
        let lab = r.interference_in("lab").unwrap();
        assert!(lab.visibility > 1.0 - 1e-6);
        assert_eq!(lab.dark_port, Some(2));
        assert!(lab.p2 < DARK_LIMIT);
        assert!((lab.p1 + lab.p2 - 1.0).abs() < 1e-10);
        assert!(r.cm_spread < 1e-12);
    }

    #[test]
    fn light_board_records_which_way() {
        let r = run_board(&board(1.0, 1.0)).unwrap();
        let lab = r.interference_in("lab").unwrap();
        assert!(lab.visibility < 1e-6);
        assert!((lab.p1 - 0.5).abs() < 1e-6 && (lab.p2 - 0.5).abs() < 1e-6);
        let rel = r.interference_in("board").unwrap();
        assert!(rel.visibility > 1.0 - 1e-9);
        assert_eq!(r.verdict("board_single_detector"), Some(true));
        assert_eq!(r.verdict("lab_single_detector"), Some(false));
    }

    #[test]
    fn visibility_matches_purity() {
        for m_b in [1.0, 30.0, 300.0, 1e6] {
            let r = run_board(&board(1.0, m_b)).unwrap();
            for i in &r.interference {
                let gap = i.visibility.powi(2) - i.visibility_from_purity.powi(2);
                assert!(gap.abs() < 1e-8, "{m_b} {i:?}");
            }
        }
    }

    #[test]
    fn grid_backend_agrees() {
        let cfg = ScenarioConfig { backend: Backend::Grid, ..board(1.0, 30.0) };
        let g = run_board(&cfg).unwrap();
        let e = run_board(&board(1.0, 30.0)).unwrap();
        for (a, b) in g.interference.iter().zip(&e.interference) {
            assert!((a.visibility - b.visibility).abs() < 1e-6, "{a:?} {b:?}");
        }
    }

    #[test]
    fn md_external_and_on_board() {
        let mut cfg = ScenarioConfig::new(ScenarioId::BoardMd);
        let ext = run_board_with_md(&cfg, Attachment::External).unwrap();
        assert_eq!(ext.verdict("md_both_detectors_click"), Some(true));
        assert_eq!(ext.verdict("board_sees_md_particle_entanglement"), Some(true));
        assert!(ext.interference_in("md").unwrap().visibility < 1e-6);

        cfg.m_md = Some(2.0);
        let on = run_board_with_md(&cfg, Attachment::Board).unwrap();
        assert_eq!(on.d_prime, Some(0.5));
        assert_eq!(on.verdict("md_single_detector"), Some(true));
        assert!(on.interference_in("md").unwrap().p2 < DARK_LIMIT);
        let fin = &on.branches[2].centers;
        assert_eq!(fin[0], fin[1]);
        assert!((fin[0][0] - 0.5).abs() < 1e-15 && (fin[0][2] + 0.5).abs() < 1e-15);
        assert_eq!(on.verdict("lab_which_way_erased"), Some(true));
        assert!(on.cm_spread < 1e-12);
    }

    #[test]
    fn third_particle_regimes() {
        let light = run_third_particle(&ScenarioConfig::new(ScenarioId::ThirdParticle)).unwrap();
        assert!(light.relative_purity.unwrap() < 1.0 - 1e-3);
        assert_eq!(light.verdict("phase_accessible"), Some(false));
        let heavy_cfg = ScenarioConfig { m3: Some(1e6), ..ScenarioConfig::new(ScenarioId::ThirdParticle) };
        let heavy = run_third_particle(&heavy_cfg).unwrap();
        assert!(heavy.relative_purity.unwrap() > 1.0 - 1e-4);
        assert_eq!(heavy.verdict("phase_accessible"), Some(true));
        assert!(heavy.shift.as_ref().unwrap().heavy_limit_gap < 1e-6);
        let far = run_third_particle(&ScenarioConfig { x: 1e3, ..heavy_cfg }).unwrap();
        assert_eq!(far.verdicts, heavy.verdicts);
    }

    #[test]
    fn width_constraint() {
        let cfg = ScenarioConfig { width: Some(0.2), ..board(1.0, 1.0) };
        assert!(run_board(&cfg).is_err());
    }

    #[test]
    fn config_json() {
        let cfg: ScenarioConfig = serde_json::from_str(r#"{"scenario": "board-md", "attachment": "external"}"#).unwrap();
        assert_eq!(cfg.attachment, Some(Attachment::External));
        assert_eq!(cfg.phase, FRAC_PI_2);
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"scenario": "board", "bogus": 1}"#).is_err());
    }
}
