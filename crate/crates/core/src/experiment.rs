//! Declarative experiment configs and the batch runner behind the CLI.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::boundary::{trace_convergence, Side, TraceChart};
use crate::compare::{equivalence_report, equiintegrability_probe, ConnectingSystem, EquivalenceOptions};
use crate::dictionary::TestDictionary;
use crate::error::{Error, Result};
use crate::field::sobolev_norm;
use crate::gallery::{Gallery, GallerySequence};
use crate::pde::{lsc_check, poiseuille_ends, shape_search, BoundaryData, ShapeFamily};
use crate::poincare::{is_poincare_sequence, uniform_lipschitz_check};
use crate::ze::{classify, default_tolerance, weak_pairings, ClassifyOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Notion {
    Ze,
    Weak,
    Poincare,
    Trace,
    Pde,
    Compare,
}

impl Notion {
    pub fn as_str(self) -> &'static str {
        match self {
            Notion::Ze => "ze",
            Notion::Weak => "weak",
            Notion::Poincare => "poincare",
            Notion::Trace => "trace",
            Notion::Pde => "pde",
            Notion::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Strong and weak verdict tolerances; `None` means `10·√h·scale`.
    pub strong: Option<f64>,
    pub weak: Option<f64>,
    /// Trace verdict tolerance; `None` means `10·√h·‖u‖_{W^{1,p}}` of the limit.
    pub trace: Option<f64>,
    /// Relative tolerance of the three-notion comparison.
    pub compare: f64,
    /// Relative slack of the lower-semicontinuity check.
    pub lsc: f64,
    pub tail_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { strong: None, weak: None, trace: None, compare: 0.1, lsc: 0.05, tail_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareConfig {
    /// Defaults to the experiment's `p`.
    pub q: Option<f64>,
    pub trials: usize,
    pub lipschitz_bound: f64,
}

impl Default for PoincareConfig {
    fn default() -> Self {
        PoincareConfig { q: None, trials: 64, lipschitz_bound: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeConfig {
    /// Family `r_c(x) = base + c·x(1 − x)`.
    pub base: f64,
    pub params: Vec<f64>,
    pub weight: f64,
    pub cells_per_unit: usize,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig { base: 0.5, params: vec![0.0, 0.1, 0.2, 0.3, 0.4], weight: 1.0, cells_per_unit: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub system: ConnectingSystem,
    pub deltas: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            system: ConnectingSystem::RestrictExtension { collar: 0.3 },
            deltas: vec![0.2, 0.1, 0.05],
            alphas: vec![0.05, 0.1],
        }
    }
}

fn default_p() -> f64 {
    2.0
}
fn default_k() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("vardom-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub gallery: Gallery,
    pub notion: Notion,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Cells per unit length; empty runs the gallery's own resolution.
    #[serde(default)]
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub poincare: PoincareConfig,
    #[serde(default)]
    pub shape: ShapeConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

/// A rejected config, with the source position when parsing failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn plain(message: impl Into<String>) -> Self {
        ConfigError { line: None, column: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<serde_json::Error> for ConfigError {
    fn from(e: serde_json::Error) -> Self {
        let msg = e.to_string();
        // serde_json appends " at line L column C"; the position is reported separately.
        let message = match msg.rfind(" at line ") {
            Some(k) => msg[..k].to_string(),
            None => msg,
        };
        ConfigError { line: Some(e.line()), column: Some(e.column()), message }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> std::result::Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(v: Value) -> std::result::Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_value(v)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(ConfigError::plain(format!("p must be a finite exponent >= 1, got {}", self.p)));
        }
        if self.k > 1 {
            return Err(ConfigError::plain(format!("k must be 0 or 1, got {}", self.k)));
        }
        if self.gallery.is_empty() {
            return Err(ConfigError::plain("gallery.len must be at least 1"));
        }
        if self.gallery.cells_per_unit() < 8 {
            return Err(ConfigError::plain("gallery.cells_per_unit must be at least 8"));
        }
        if let Some(r) = self.resolutions.iter().find(|&&r| r < 8) {
            return Err(ConfigError::plain(format!("resolutions must be at least 8 cells per unit, got {r}")));
        }
        let t = &self.tolerances;
        for (name, v) in [("strong", t.strong), ("weak", t.weak), ("trace", t.trace)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ConfigError::plain(format!("tolerances.{name} must be positive, got {v}")));
                }
            }
        }
        for (name, v) in [("compare", t.compare), ("lsc", t.lsc)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::plain(format!("tolerances.{name} must be non-negative, got {v}")));
            }
        }
        if !(t.tail_fraction > 0.0 && t.tail_fraction <= 1.0) {
            return Err(ConfigError::plain(format!("tolerances.tail_fraction must lie in (0, 1], got {}", t.tail_fraction)));
        }
        if self.notion == Notion::Pde && (self.shape.params.is_empty() || self.shape.cells_per_unit < 8) {
            return Err(ConfigError::plain("shape.params must be nonempty and shape.cells_per_unit at least 8"));
        }
        if self.notion == Notion::Compare && self.compare.deltas.is_empty() {
            return Err(ConfigError::plain("compare.deltas must be nonempty"));
        }
        Ok(())
    }
}

/// Files written by one run, in creation order.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    /// One summary line per resolution.
    pub summary: Vec<String>,
}

fn header(cfg: &ExperimentConfig, seq: &GallerySequence, cells: usize) -> Value {
    json!({
        "tool": "vardom",
        "version": env!("CARGO_PKG_VERSION"),
        "notion": cfg.notion.as_str(),
        "gallery": seq.name,
        "reference": seq.reference,
        "parameters": seq.params,
        "cells_per_unit": cells,
        "grid": seq.spec,
        "p": cfg.p,
        "k": cfg.k,
        "tolerances": cfg.tolerances,
        "seed": cfg.seed,
    })
}

fn write_json(path: &Path, v: &Value, out: &mut RunOutput) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    out.files.push(path.to_path_buf());
    Ok(())
}

fn write_rows(path: &Path, head: &[&str], rows: impl IntoIterator<Item = Vec<String>>, out: &mut RunOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(head)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    out.files.push(path.to_path_buf());
    Ok(())
}

/// Run the experiment at every configured resolution. With several resolutions
/// each writes into `cells_<n>/` below the output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let resolutions =
        if cfg.resolutions.is_empty() { vec![cfg.gallery.cells_per_unit()] } else { cfg.resolutions.clone() };
    let mut out = RunOutput::default();
    for &cells in &resolutions {
        let dir =
            if cfg.resolutions.len() > 1 { cfg.output_dir.join(format!("cells_{cells}")) } else { cfg.output_dir.clone() };
        fs::create_dir_all(&dir)?;
        let seq = cfg.gallery.with_cells_per_unit(cells).generate()?;
        let head = header(cfg, &seq, cells);
        write_json(&dir.join("run.json"), &head, &mut out)?;
        let line = match cfg.notion {
            Notion::Ze | Notion::Weak => run_converge(cfg, &seq, head, &dir, &mut out)?,
            Notion::Poincare => run_poincare(cfg, &seq, head, &dir, &mut out)?,
            Notion::Trace => run_trace(cfg, &seq, head, &dir, &mut out)?,
            Notion::Pde => run_pde(cfg, &seq, head, &dir, &mut out)?,
            Notion::Compare => run_compare(cfg, &seq, head, &dir, &mut out)?,
        };
        out.summary.push(format!("{} {} cells={cells}: {line}", seq.name, cfg.notion.as_str()));
    }
    Ok(out)
}

fn run_converge(cfg: &ExperimentConfig, seq: &GallerySequence, head: Value, dir: &Path, out: &mut RunOutput) -> Result<String> {
    let pair = seq.to_sequence_pair(cfg.p, cfg.k)?;
    let dict = TestDictionary::standard(&seq.limit_domain, cfg.seed)?;
    let opts = ClassifyOptions {
        tol_strong: cfg.tolerances.strong,
        tol_weak: cfg.tolerances.weak,
        tail_fraction: cfg.tolerances.tail_fraction,
        seed: cfg.seed,
        ..Default::default()
    };
    let report = classify(&pair, &dict, &opts)?;
    let path = dir.join("convergence.csv");
    report.write_csv(std::io::BufWriter::new(fs::File::create(&path)?))?;
    out.files.push(path);
    write_rows(
        &dir.join("cauchy.csv"),
        &["i", "j", "distance"],
        report.cauchy.pairs.iter().map(|s| vec![s.i.to_string(), s.j.to_string(), s.distance.to_string()]),
        out,
    )?;
    if cfg.notion == Notion::Weak {
        let entries = weak_pairings(&pair, &dict)?;
        let rows = entries.iter().flat_map(|e| {
            e.residuals
                .iter()
                .enumerate()
                .map(|(i, r)| vec![(i + 1).to_string(), e.order.label(), e.mode.clone(), r.to_string()])
                .collect::<Vec<_>>()
        });
        write_rows(&dir.join("pairings.csv"), &["i", "order", "mode", "residual"], rows, out)?;
    }
    let verdict = serde_json::to_value(report.verdict)?;
    write_json(&dir.join("report.json"), &json!({ "header": head, "report": report }), out)?;
    Ok(format!("verdict {}", verdict.as_str().unwrap_or_default()))
}

fn run_poincare(cfg: &ExperimentConfig, seq: &GallerySequence, head: Value, dir: &Path, out: &mut RunOutput) -> Result<String> {
    let q = cfg.poincare.q.unwrap_or(cfg.p);
    let report = is_poincare_sequence(&seq.domains(), q, cfg.p, cfg.poincare.trials)?;
    let path = dir.join("poincare.csv");
    report.write_csv(&path)?;
    out.files.push(path);
    let lipschitz = match uniform_lipschitz_check(seq, cfg.poincare.lipschitz_bound) {
        Ok(l) => serde_json::to_value(l)?,
        Err(Error::NotApplicable(reason)) => json!({ "not_applicable": reason }),
        Err(e) => return Err(e),
    };
    let verdict = serde_json::to_value(report.verdict)?;
    write_json(&dir.join("report.json"), &json!({ "header": head, "poincare": report, "lipschitz": lipschitz }), out)?;
    Ok(format!("verdict {} growth {:.4}", verdict.as_str().unwrap_or_default(), report.growth))
}

fn run_trace(cfg: &ExperimentConfig, seq: &GallerySequence, head: Value, dir: &Path, out: &mut RunOutput) -> Result<String> {
    let graphs = seq
        .graphs
        .as_ref()
        .ok_or_else(|| Error::NotApplicable(format!("gallery '{}' has no graph boundary charts", seq.name)))?;
    let limit = seq.limit_field.as_ref().ok_or(Error::MissingLimit)?;
    let charts =
        graphs.members.iter().map(|g| TraceChart::for_domain(g, &seq.spec, Side::Upper)).collect::<Result<Vec<_>>>()?;
    let lc = TraceChart::for_domain(&graphs.limit, &seq.spec, Side::Upper)?;
    let tol = match cfg.tolerances.trace {
        Some(t) => t,
        None => default_tolerance(seq.spec.spacing(), sobolev_norm(limit, 1, cfg.p)?),
    };
    let report = trace_convergence(&seq.members, &charts, limit, &lc, cfg.p, tol)?;
    let path = dir.join("trace.csv");
    report.write_csv(&path)?;
    out.files.push(path);
    write_json(&dir.join("report.json"), &json!({ "header": head, "report": report }), out)?;
    let verdict = serde_json::to_value(report.verdict)?;
    Ok(format!("verdict {} tail {:.4e} tol {:.4e}", verdict.as_str().unwrap_or_default(), report.tail, report.tol))
}

fn run_pde(cfg: &ExperimentConfig, seq: &GallerySequence, head: Value, dir: &Path, out: &mut RunOutput) -> Result<String> {
    let s = &cfg.shape;
    let family = ShapeFamily::bulge(s.base, s.params.clone());
    let shape = shape_search(&family, &poiseuille_ends(s.base), s.weight, 1.0 / s.cells_per_unit as f64)?;
    let path = dir.join("shape.csv");
    shape.write_csv(&path)?;
    out.files.push(path);
    let lsc = lsc_check(&seq.domains(), &seq.limit_domain, &|_| 1.0, &BoundaryData::Zero, cfg.tolerances.lsc, false)?;
    write_rows(
        &dir.join("lsc.csv"),
        &["i", "energy", "hausdorff"],
        lsc.energies
            .iter()
            .zip(&lsc.hausdorff_set)
            .enumerate()
            .map(|(i, (e, d))| vec![(i + 1).to_string(), e.to_string(), d.to_string()]),
        out,
    )?;
    write_json(&dir.join("report.json"), &json!({ "header": head, "shape": shape, "lsc": lsc }), out)?;
    Ok(format!("best c {} lsc {}", shape.best_c, if lsc.holds { "holds" } else { "fails" }))
}

fn run_compare(cfg: &ExperimentConfig, seq: &GallerySequence, head: Value, dir: &Path, out: &mut RunOutput) -> Result<String> {
    let c = &cfg.compare;
    let opts = EquivalenceOptions { p: cfg.p, rel_tol: cfg.tolerances.compare, tail_fraction: cfg.tolerances.tail_fraction };
    let report = equivalence_report(seq, &c.system, &opts)?;
    let path = dir.join("distances.csv");
    report.write_csv(&path)?;
    out.files.push(path);
    let u = seq.limit_field.as_ref().ok_or(Error::MissingLimit)?;
    let probe = match equiintegrability_probe(&c.system, u, &seq.domains(), &c.deltas, &c.alphas, cfg.p) {
        Ok(r) => {
            write_rows(
                &dir.join("probe.csv"),
                &["delta", "max_mass"],
                r.rows.iter().map(|row| vec![row.delta.to_string(), row.max_mass.to_string()]),
                out,
            )?;
            serde_json::to_value(r)?
        }
        Err(Error::NotApplicable(reason)) => json!({ "not_applicable": reason }),
        Err(e) => return Err(e),
    };
    let labels: Vec<&str> = report.notions.iter().map(|n| n.notion).collect();
    let verdicts: Vec<Value> = report.notions.iter().map(|n| serde_json::to_value(&n.verdict)).collect::<std::result::Result<_, _>>()?;
    write_json(
        &dir.join("agreement.json"),
        &json!({ "header": head.clone(), "notions": labels, "verdicts": verdicts, "agreement": report.agreement }),
        out,
    )?;
    write_json(&dir.join("report.json"), &json!({ "header": head, "report": report, "probe": probe }), out)?;
    let line = report
        .notions
        .iter()
        .map(|n| format!("{}={}", n.notion, n.verdict.label()))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(line)
}
