//! File formats: state specifications, CSV tables, density dumps, run
//! manifests and a small SVG line-plot writer.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::DensityMatrix;
use crate::error::{QrfError, Result};
use crate::frame::CoordinateFrame;
use crate::gaussian::{GaussianBranch, GaussianSuperposition};
use crate::grid::{Axis, GridState};
use crate::mass::MassConfig;
use crate::state::State;

pub const STATE_SCHEMA: &str = "qrf-state/1";
pub const DENSITY_SCHEMA: &str = "qrf-density/1";
pub const MANIFEST_SCHEMA: &str = "qrf-manifest/1";
pub const MANIFEST_NAME: &str = "manifest.json";

/// Parses JSON, keeping serde's line/column diagnostics in the error text.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| QrfError::Config(format!("{origin}: {e}")))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    parse_json(&text, &path.display().to_string())
}

/// Pretty JSON with a trailing newline. Float formatting is shortest round-trip,
/// so equal values always give equal bytes.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Frame of a state file: a catalog name or explicit labels plus map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrameSpec {
    Named(String),
    Explicit(CoordinateFrame),
}

impl FrameSpec {
    pub fn resolve(&self, masses: &MassConfig) -> Result<CoordinateFrame> {
        match self {
            FrameSpec::Named(n) => match n.as_str() {
                "absolute" => Ok(CoordinateFrame::absolute(masses.len())),
                "cm_relative" => Ok(CoordinateFrame::cm_relative(masses)),
                "relative_only" => Ok(CoordinateFrame::relative_only(masses)),
                "classical" => Ok(CoordinateFrame::classical(masses.len())),
                other => Err(QrfError::Config(format!("unknown frame `{other}`"))),
            },
            FrameSpec::Explicit(f) => CoordinateFrame::new(f.labels().to_vec(), f.from_absolute().clone()),
        }
    }
}

fn default_frame() -> FrameSpec {
    FrameSpec::Named("absolute".into())
}

fn default_hbar() -> f64 {
    1.0
}

fn unit_coefficient() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    #[serde(default = "unit_coefficient")]
    pub coefficient: [f64; 2],
    pub centers: Vec<f64>,
    /// Axis-aligned widths; ignored when `covariance` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momenta: Option<Vec<f64>>,
}

impl BranchSpec {
    pub(crate) fn build(&self) -> Result<GaussianBranch> {
        let n = self.centers.len();
        let c = Complex64::new(self.coefficient[0], self.coefficient[1]);
        let k = self.momenta.clone().unwrap_or_else(|| vec![0.0; n]);
        match (&self.covariance, &self.widths) {
            (Some(cov), _) => {
                if cov.len() != n || cov.iter().any(|r| r.len() != n) {
                    return Err(QrfError::Config(format!("covariance must be {n}x{n}")));
                }
                let m = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
                GaussianBranch::with_covariance(c, self.centers.clone(), m, k)
            }
            (None, Some(w)) => GaussianBranch::new(c, self.centers.clone(), w.clone(), k),
            (None, None) => Err(QrfError::Config("branch needs `widths` or `covariance`".into())),
        }
    }

    fn from_branch(b: &GaussianBranch) -> Self {
        let n = b.dim();
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || b.covariance[(i, j)] == 0.0));
        let (widths, covariance) = if diagonal {
            (Some(b.axis_widths()), None)
        } else {
            (None, Some((0..n).map(|i| (0..n).map(|j| b.covariance[(i, j)]).collect()).collect()))
        };
        Self {
            coefficient: [b.coefficient.re, b.coefficient.im],
            centers: b.centers.iter().copied().collect(),
            widths,
            covariance,
            momenta: Some(b.momentum_offsets.iter().copied().collect()),
        }
    }
}

/// On-disk state specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub schema: String,
    pub masses: Vec<f64>,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    #[serde(default = "default_frame")]
    pub frame: FrameSpec,
    pub branches: Vec<BranchSpec>,
    /// Rasterize onto these axes and use the grid backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<Axis>>,
}

impl StateFile {
    pub fn load(path: &Path) -> Result<Self> {
        let f: Self = read_json(path)?;
        f.check_schema()?;
        Ok(f)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_named(text, "state")
    }

    /// Like [`StateFile::parse`], naming `origin` in diagnostics.
    pub fn parse_named(text: &str, origin: &str) -> Result<Self> {
        let f: Self = parse_json(text, origin)?;
        f.check_schema()?;
        Ok(f)
    }

    fn check_schema(&self) -> Result<()> {
        if self.schema != STATE_SCHEMA {
            return Err(QrfError::Config(format!("schema `{}`, expected `{STATE_SCHEMA}`", self.schema)));
        }
        Ok(())
    }

    pub fn with_hbar(mut self, hbar: Option<f64>) -> Self {
        if let Some(h) = hbar {
            self.hbar = h;
        }
        self
    }

    pub fn masses(&self) -> Result<MassConfig> {
        MassConfig::with_hbar(self.masses.clone(), self.hbar)
    }

    pub fn gaussian(&self) -> Result<GaussianSuperposition> {
        let masses = self.masses()?;
        let frame = self.frame.resolve(&masses)?;
        let branches = self.branches.iter().map(BranchSpec::build).collect::<Result<Vec<_>>>()?;
        GaussianSuperposition::new(frame, masses, branches)
    }

    pub fn state(&self) -> Result<State> {
        let g = self.gaussian()?;
        match &self.grid {
            None => Ok(State::Gaussian(g)),
            Some(axes) => Ok(State::Grid(GridState::rasterize(&g, axes)?)),
        }
    }

    pub fn from_gaussian(s: &GaussianSuperposition) -> Self {
        Self {
            schema: STATE_SCHEMA.into(),
            masses: s.masses().masses().to_vec(),
            hbar: s.hbar(),
            frame: FrameSpec::Explicit(s.frame().clone()),
            branches: s.branches().iter().map(BranchSpec::from_branch).collect(),
            grid: None,
        }
    }
}

/// Round-trip decimal text of a float (Rust's shortest exact representation).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes a header plus numeric rows with round-trip precision.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(|v| fmt_f64(*v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| QrfError::Config(format!("{}: {e}", path.display()))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn csv_err(e: csv::Error) -> QrfError {
    QrfError::Config(format!("csv: {e}"))
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn write_matrix_csv(path: &Path, labels: &[String], m: &DMatrix<f64>) -> Result<()> {
    write_csv(path, labels, &matrix_rows(m))
}

/// Header stored next to a density CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHeader {
    pub schema: String,
    pub labels: Vec<String>,
    pub axes: Vec<Axis>,
    pub size: usize,
    pub cell_volume: f64,
    pub trace: f64,
    pub purity: f64,
    /// Column layout of each row: `re_0, im_0, re_1, im_1, …`.
    pub layout: String,
}

/// Sidecar path `rho.csv` → `rho.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `ρ(x, x′)` row by row with real and imaginary parts interleaved,
/// plus a JSON header beside it. Returns the sidecar path.
pub fn write_density(path: &Path, rho: &DensityMatrix, purity: f64) -> Result<PathBuf> {
    let n = rho.size();
    let header: Vec<String> = (0..n).flat_map(|j| [format!("re_{j}"), format!("im_{j}")]).collect();
    let data = rho.data();
    let rows: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).flat_map(|j| [data[(i, j)].re, data[(i, j)].im]).collect()).collect();
    write_csv(path, &header, &rows)?;
    let side = sidecar_path(path);
    write_json(
        &side,
        &DensityHeader {
            schema: DENSITY_SCHEMA.into(),
            labels: rho.labels().to_vec(),
            axes: rho.axes().to_vec(),
            size: n,
            cell_volume: rho.cell_volume(),
            trace: rho.trace(),
            purity,
            layout: "re_im_interleaved".into(),
        },
    )?;
    Ok(side)
}

pub fn read_density(path: &Path) -> Result<DensityMatrix> {
    let header: DensityHeader = read_json(&sidecar_path(path))?;
    let (_, rows) = read_csv(path)?;
    let n = header.size;
    if rows.len() != n || rows.iter().any(|r| r.len() != 2 * n) {
        return Err(QrfError::Config(format!("{}: expected {n} rows of {} values", path.display(), 2 * n)));
    }
    let data = DMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][2 * j], rows[i][2 * j + 1]));
    DensityMatrix::new(header.labels, header.axes, data)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation, written once per output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: Vec<String>,
    pub config_sha256: Option<String>,
    pub tool_version: String,
    pub hbar: f64,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub outputs: Vec<OutputEntry>,
}

pub fn unix_time() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(command: Vec<String>, config: Option<&[u8]>, hbar: f64) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.into(),
            command,
            config_sha256: config.map(sha256_hex),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            hbar,
            started: unix_time(),
            finished: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Hashes every file and writes `manifest.json` into `dir`. Paths are
    /// stored relative to `dir` when possible.
    pub fn finish(mut self, dir: &Path, files: &[PathBuf]) -> Result<PathBuf> {
        let mut outputs = Vec::with_capacity(files.len());
        for f in files {
            let bytes = fs::read(f)?;
            let rel = f.strip_prefix(dir).unwrap_or(f);
            outputs.push(OutputEntry { path: rel.display().to_string(), sha256: sha256_hex(&bytes) });
        }
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        self.outputs = outputs;
        self.finished = unix_time();
        let path = dir.join(MANIFEST_NAME);
        write_json(&path, &self)?;
        Ok(path)
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), points }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Minimal SVG line plot with axes, five ticks per axis and a legend.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 420.0, 70.0, 20.0, 40.0, 50.0);
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - ml - mr,
        h - mt - mb
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(xv),
            h - mb + 16.0,
            tick(xv)
        );
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, ml - 6.0, sy(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (ml + w - mr) / 2.0,
        h - 10.0,
        escape(xlabel)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (mt + h - mb) / 2.0,
        escape(ylabel)
    );
    for (n, s) in series.iter().enumerate() {
        let color = PALETTE[n % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let ly = mt + 16.0 + 16.0 * n as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{color}" stroke-width="2"/><text x="{3}" y="{4}">{5}</text>"#,
            ml + 10.0,
            ly,
            ml + 30.0,
            ml + 36.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}
