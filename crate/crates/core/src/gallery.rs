//! Named generators of domain/field sequences `(Ω_i, u_i)`, `i = 1..N`, with a
//! documented limit `(Ω, u)`.
//!
//! Every member of a sequence shares one [`GridSpec`]. Default resolutions are
//! `h = 1/256` in 1D and `h = 1/128` in 2D, with `N = 16`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::field::{lp_norm_slice, Field};
use crate::grid::{DomainMask, GridSpec};
use crate::ze::SequencePair;

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `{x0 < x < x1, lower(x) < y < upper(x)}`.
#[derive(Clone)]
pub struct GraphDomain {
    pub x_range: (f64, f64),
    pub lower: Profile,
    pub upper: Profile,
}

impl fmt::Debug for GraphDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphDomain").field("x_range", &self.x_range).finish_non_exhaustive()
    }
}

const GRAPH_SAMPLES: usize = 2001;

impl GraphDomain {
    pub fn new(x_range: (f64, f64), lower: Profile, upper: Profile) -> Self {
        GraphDomain { x_range, lower, upper }
    }
    /// Symmetric channel `|y| < r(x)` over `(0, 1)`.
    pub fn symmetric(r: Profile) -> Self {
        let neg = r.clone();
        GraphDomain::new((0.0, 1.0), Arc::new(move |x| -neg(x)), r)
    }
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] > self.x_range.0 && p[0] < self.x_range.1 && p[1] > (self.lower)(p[0]) && p[1] < (self.upper)(p[0])
    }
    pub fn thickness(&self, x: f64) -> f64 {
        (self.upper)(x) - (self.lower)(x)
    }
    /// Fine sample abscissae over the closed base interval.
    pub fn sample_points(&self) -> Vec<f64> {
        let (a, b) = self.x_range;
        (0..GRAPH_SAMPLES).map(|k| a + (b - a) * k as f64 / (GRAPH_SAMPLES - 1) as f64).collect()
    }
    pub fn validate(&self) -> Result<()> {
        for x in self.sample_points() {
            let (lo, hi) = ((self.lower)(x), (self.upper)(x));
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidParameter(format!("graphs cross or are not finite at x = {x}")));
            }
        }
        Ok(())
    }
    pub fn mask(&self, spec: &GridSpec) -> Result<DomainMask> {
        self.validate()?;
        let upper = spec.upper();
        for x in self.sample_points() {
            if (self.lower)(x) < spec.origin()[1] || (self.upper)(x) > upper[1] {
                return Err(Error::InvalidParameter(format!("graph leaves the ambient box at x = {x}")));
            }
        }
        Ok(DomainMask::from_fn(spec, |p| self.contains(p)))
    }
    /// Minimum thickness over the fine samples and where it occurs.
    pub fn min_thickness(&self) -> (f64, f64) {
        self.sample_points()
            .into_iter()
            .map(|x| (self.thickness(x), x))
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
    }
}

/// Channel section `{0 < x < 1, |y| < r(x)}`.
pub fn channel(r: Profile, spec: &GridSpec) -> Result<DomainMask> {
    let g = GraphDomain::symmetric(r.clone());
    if let Some(x) = g.sample_points().into_iter().find(|&x| !(r(x) > 0.0)) {
        return Err(Error::InvalidParameter(format!("channel radius is not positive at x = {x}")));
    }
    g.mask(spec)
}

pub fn two_graphs(g: &GraphDomain, spec: &GridSpec) -> Result<DomainMask> {
    g.mask(spec)
}

/// Member graphs and the limit graph of a graph-domain gallery.
#[derive(Debug, Clone)]
pub struct GraphSequence {
    pub members: Vec<GraphDomain>,
    pub limit: GraphDomain,
}

/// A generated gallery: members, limit, and provenance.
#[derive(Debug, Clone)]
pub struct GallerySequence {
    pub name: String,
    pub params: Value,
    pub reference: String,
    pub spec: GridSpec,
    pub members: Vec<Field>,
    pub limit_domain: DomainMask,
    pub limit_field: Option<Field>,
    pub graphs: Option<GraphSequence>,
    pub limit_description: String,
    pub notes: Vec<String>,
}

impl GallerySequence {
    pub fn domains(&self) -> Vec<DomainMask> {
        self.members.iter().map(|f| f.domain().clone()).collect()
    }

    pub fn to_sequence_pair(&self, p: f64, k: usize) -> Result<SequencePair> {
        SequencePair::new(self.members.clone(), self.limit_domain.clone(), self.limit_field.clone(), p, k)
    }

    /// Writes `member_XX.mask` / `member_XX.f64` (+ sidecars), the limit, and `manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (k, f) in self.members.iter().enumerate() {
            let stem = format!("member_{:02}", k + 1);
            f.save(&dir.join(format!("{stem}.f64")), &dir.join(format!("{stem}.mask")))?;
            files.push(json!({"i": k + 1, "mask": format!("{stem}.mask"), "field": format!("{stem}.f64")}));
        }
        let limit_field = match &self.limit_field {
            Some(f) => {
                f.save(&dir.join("limit.f64"), &dir.join("limit.mask"))?;
                Some("limit.f64")
            }
            None => {
                self.limit_domain.save(&dir.join("limit.mask"))?;
                None
            }
        };
        let manifest = json!({
            "gallery": self.name,
            "reference": self.reference,
            "parameters": self.params,
            "grid": self.spec,
            "analytic_limit": self.limit_description,
            "limit": {"mask": "limit.mask", "field": limit_field},
            "members": files,
            "notes": self.notes,
        });
        fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }
}

fn default_len() -> usize {
    16
}
fn default_2d() -> usize {
    128
}
fn default_1d() -> usize {
    256
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    /// `r_i = r + a/i`.
    #[default]
    Uniform,
    /// `r_i = r + (a/i)·sin(πx)`.
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelField {
    /// `(r(x)² − y²)²`: vanishes with its gradient on the limit walls.
    #[default]
    Quartic,
    /// `cos(x) + y + y²`: nonzero on the walls (for trace experiments).
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub len: usize,
    pub cells_per_unit: usize,
    /// Base radius `r(x) = base + bulge·x(1−x)`.
    pub base: f64,
    pub bulge: f64,
    /// Perturbation amplitude `a` in `r_i = r + (a/i)·φ`.
    pub amplitude: f64,
    pub perturbation: Perturbation,
    pub field: ChannelField,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            len: default_len(),
            cells_per_unit: default_2d(),
            base: 0.5,
            bulge: 0.0,
            amplitude: 0.25,
            perturbation: Perturbation::Uniform,
            field: ChannelField::Quartic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CuspParams {
    pub len: usize,
    pub cells_per_unit: usize,
    /// `h^± = ±(κ(x − x₀)² + τ/i)/2`.
    pub kappa: f64,
    pub tau: f64,
    pub x0: f64,
}

impl Default for CuspParams {
    fn default() -> Self {
        CuspParams { len: default_len(), cells_per_unit: default_2d(), kappa: 2.0, tau: 0.2, x0: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParams {
    pub len: usize,
    pub cells_per_unit: usize,
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams { len: default_len(), cells_per_unit: default_1d() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobParams {
    pub len: usize,
    pub cells_per_unit: usize,
    /// Fixed value of `‖u_i‖_{L^p}` realized by calibrating the blob radius.
    pub target_norm: f64,
    pub p: f64,
    /// Stub (blob neck) width at `i = 1` in cells; member `i` uses `max(1, round(w/i))`.
    pub stub_cells: usize,
}

impl Default for BlobParams {
    fn default() -> Self {
        BlobParams { len: default_len(), cells_per_unit: default_2d(), target_norm: 0.15, p: 2.0, stub_cells: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnuliParams {
    pub len: usize,
    pub cells_per_unit: usize,
}

impl Default for AnnuliParams {
    fn default() -> Self {
        AnnuliParams { len: default_len(), cells_per_unit: default_2d() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillationParams {
    pub len: usize,
    pub cells_per_unit: usize,
}

impl Default for OscillationParams {
    fn default() -> Self {
        OscillationParams { len: default_len(), cells_per_unit: default_1d() }
    }
}

/// Gallery selection with parameters; serialized as `{"name": ..., <params>}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Gallery {
    Channel(ChannelParams),
    Cusp(CuspParams),
    SplitInterval(SplitParams),
    Blobs(BlobParams),
    Annuli(AnnuliParams),
    Oscillation(OscillationParams),
}

/// One row of [`list_galleries`].
#[derive(Debug, Clone, Serialize)]
pub struct GalleryInfo {
    pub name: &'static str,
    pub parameters: Value,
    pub reference: &'static str,
}

const REF_CHANNEL: &str = "shape-optimization channel (rotational pipe, realized as its 2D axial section: 2D proxy)";
const REF_CUSP: &str = "cusp domains between two graphs touching at x0";
const REF_SPLIT: &str = "split interval (0,1) u (1+1/i,2): zero-extension limit outside W^{k,p}";
const REF_BLOBS: &str = "small alternating-sign blobs on necks: no uniform Poincare constant, no strong convergence";
const REF_ANNULI: &str = "annuli B1 minus closed B(1/i): convergence without diffeomorphic charts";
const REF_OSC: &str = "sin(i pi x) on a fixed interval: weakly but not strongly convergent";

impl Gallery {
    pub fn all_defaults() -> Vec<Gallery> {
        vec![
            Gallery::Channel(ChannelParams::default()),
            Gallery::Cusp(CuspParams::default()),
            Gallery::SplitInterval(SplitParams::default()),
            Gallery::Blobs(BlobParams::default()),
            Gallery::Annuli(AnnuliParams::default()),
            Gallery::Oscillation(OscillationParams::default()),
        ]
    }

    /// Parse a gallery name with default parameters.
    pub fn by_name(name: &str) -> Result<Gallery> {
        serde_json::from_value(json!({ "name": name }))
            .map_err(|_| Error::InvalidParameter(format!("unknown gallery '{name}'")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gallery::Channel(_) => "channel",
            Gallery::Cusp(_) => "cusp",
            Gallery::SplitInterval(_) => "split-interval",
            Gallery::Blobs(_) => "blobs",
            Gallery::Annuli(_) => "annuli",
            Gallery::Oscillation(_) => "oscillation",
        }
    }

    pub fn reference(&self) -> &'static str {
        match self {
            Gallery::Channel(_) => REF_CHANNEL,
            Gallery::Cusp(_) => REF_CUSP,
            Gallery::SplitInterval(_) => REF_SPLIT,
            Gallery::Blobs(_) => REF_BLOBS,
            Gallery::Annuli(_) => REF_ANNULI,
            Gallery::Oscillation(_) => REF_OSC,
        }
    }

    pub fn params_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("gallery params serialize");
        if let Some(o) = v.as_object_mut() {
            o.remove("name");
        }
        v
    }

    pub fn len(&self) -> usize {
        match self {
            Gallery::Channel(p) => p.len,
            Gallery::Cusp(p) => p.len,
            Gallery::SplitInterval(p) => p.len,
            Gallery::Blobs(p) => p.len,
            Gallery::Annuli(p) => p.len,
            Gallery::Oscillation(p) => p.len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cells_per_unit(&self) -> usize {
        match self {
            Gallery::Channel(p) => p.cells_per_unit,
            Gallery::Cusp(p) => p.cells_per_unit,
            Gallery::SplitInterval(p) => p.cells_per_unit,
            Gallery::Blobs(p) => p.cells_per_unit,
            Gallery::Annuli(p) => p.cells_per_unit,
            Gallery::Oscillation(p) => p.cells_per_unit,
        }
    }

    /// Same gallery at another resolution.
    pub fn with_cells_per_unit(&self, cells: usize) -> Gallery {
        let mut g = self.clone();
        match &mut g {
            Gallery::Channel(p) => p.cells_per_unit = cells,
            Gallery::Cusp(p) => p.cells_per_unit = cells,
            Gallery::SplitInterval(p) => p.cells_per_unit = cells,
            Gallery::Blobs(p) => p.cells_per_unit = cells,
            Gallery::Annuli(p) => p.cells_per_unit = cells,
            Gallery::Oscillation(p) => p.cells_per_unit = cells,
        }
        g
    }

    pub fn generate(&self) -> Result<GallerySequence> {
        if self.is_empty() {
            return Err(Error::InvalidParameter("gallery length must be at least 1".into()));
        }
        let cells = self.cells_per_unit();
        if cells < 8 {
            return Err(Error::InvalidParameter(format!("cells_per_unit must be at least 8, got {cells}")));
        }
        let mut g = match self {
            Gallery::Channel(p) => channel_gallery(p)?,
            Gallery::Cusp(p) => cusp_gallery(p)?,
            Gallery::SplitInterval(p) => split_gallery(p)?,
            Gallery::Blobs(p) => blob_gallery(p)?,
            Gallery::Annuli(p) => annuli_gallery(p)?,
            Gallery::Oscillation(p) => oscillation_gallery(p)?,
        };
        g.name = self.name().into();
        g.reference = self.reference().into();
        g.params = self.params_json();
        Ok(g)
    }
}

/// Stable table of galleries with default parameters.
pub fn list_galleries() -> Vec<GalleryInfo> {
    Gallery::all_defaults()
        .into_iter()
        .map(|g| GalleryInfo { name: g.name(), parameters: g.params_json(), reference: g.reference() })
        .collect()
}

fn shell(spec: GridSpec, members: Vec<Field>, limit_domain: DomainMask, limit_field: Option<Field>) -> GallerySequence {
    GallerySequence {
        name: String::new(),
        params: Value::Null,
        reference: String::new(),
        spec,
        members,
        limit_domain,
        limit_field,
        graphs: None,
        limit_description: String::new(),
        notes: Vec::new(),
    }
}

/// Grid over `x ∈ (−1/8, 9/8)` and `|y| < half`, with `ny` of the requested parity.
fn channel_grid(h: f64, half: f64, odd_rows: bool) -> Result<GridSpec> {
    let nx = (1.25 / h).round() as usize;
    let mut ny = 2 * (half / h).ceil() as usize;
    if odd_rows {
        ny += 1;
    }
    GridSpec::rect([-0.125, -(ny as f64) * h / 2.0], h, [nx, ny])
}

pub fn channel_radius(p: &ChannelParams) -> Profile {
    let (base, bulge) = (p.base, p.bulge);
    Arc::new(move |x| base + bulge * x * (1.0 - x))
}

pub fn channel_member_radius(p: &ChannelParams, i: usize) -> Profile {
    let r = channel_radius(p);
    let a = p.amplitude / i as f64;
    match p.perturbation {
        Perturbation::Uniform => Arc::new(move |x| r(x) + a),
        Perturbation::Sine => Arc::new(move |x| r(x) + a * (std::f64::consts::PI * x).sin()),
    }
}

fn channel_gallery(p: &ChannelParams) -> Result<GallerySequence> {
    let h = 1.0 / p.cells_per_unit as f64;
    let radii: Vec<Profile> = (1..=p.len).map(|i| channel_member_radius(p, i)).collect();
    let limit_r = channel_radius(p);
    let probe = GraphDomain::symmetric(limit_r.clone()).sample_points();
    let rmax = radii
        .iter()
        .chain(std::iter::once(&limit_r))
        .flat_map(|r| probe.iter().map(move |&x| r(x)))
        .fold(0.0, f64::max);
    let spec = channel_grid(h, rmax + 0.125, false)?;
    let field_fn = {
        let r = limit_r.clone();
        let kind = p.field;
        move |q: [f64; 2]| match kind {
            ChannelField::Quartic => {
                let s = r(q[0]).powi(2) - q[1] * q[1];
                s * s
            }
            ChannelField::Smooth => q[0].cos() + q[1] + q[1] * q[1],
        }
    };
    let members = radii
        .par_iter()
        .map(|r| Field::from_fn(&channel(r.clone(), &spec)?, &field_fn))
        .collect::<Result<Vec<_>>>()?;
    let limit_domain = channel(limit_r.clone(), &spec)?;
    let limit_field = Field::from_fn(&limit_domain, &field_fn)?;
    let mut g = shell(spec, members, limit_domain, Some(limit_field));
    g.graphs = Some(GraphSequence {
        members: radii.into_iter().map(GraphDomain::symmetric).collect(),
        limit: GraphDomain::symmetric(limit_r),
    });
    g.limit_description = format!(
        "channel {{0<x<1, |y|<{} + {}x(1-x)}} with the fixed field restricted to it",
        p.base, p.bulge
    );
    g.notes.push("2D proxy: axial section of the rotational channel".into());
    Ok(g)
}

fn cusp_graphs(p: &CuspParams, tau: f64) -> GraphDomain {
    let (k, x0) = (p.kappa, p.x0);
    let up: Profile = Arc::new(move |x| 0.5 * (k * (x - x0) * (x - x0) + tau));
    let down: Profile = Arc::new(move |x| -0.5 * (k * (x - x0) * (x - x0) + tau));
    GraphDomain::new((0.0, 1.0), down, up)
}

fn cusp_gallery(p: &CuspParams) -> Result<GallerySequence> {
    let h = 1.0 / p.cells_per_unit as f64;
    let far = p.x0.max(1.0 - p.x0);
    let half = 0.5 * (p.kappa * far * far + p.tau) + 0.125;
    // Odd row count: a row of centers on y = 0 keeps the limit connected through the cusp.
    let spec = channel_grid(h, half, true)?;
    let graphs: Vec<GraphDomain> = (1..=p.len).map(|i| cusp_graphs(p, p.tau / i as f64)).collect();
    let limit = cusp_graphs(p, 0.0);
    let field_fn = {
        let (k, x0) = (p.kappa, p.x0);
        move |q: [f64; 2]| {
            let e = 0.5 * k * (q[0] - x0) * (q[0] - x0);
            e * e - q[1] * q[1]
        }
    };
    let members =
        graphs.par_iter().map(|g| Field::from_fn(&g.mask(&spec)?, field_fn)).collect::<Result<Vec<_>>>()?;
    let limit_domain = limit.mask(&spec)?;
    let limit_field = Field::from_fn(&limit_domain, field_fn)?;
    let mut s = shell(spec, members, limit_domain, Some(limit_field));
    s.graphs = Some(GraphSequence { members: graphs, limit });
    s.limit_description = format!(
        "cusp domain |y| < {}(x-{})^2/2 over (0,1); thickness vanishes at x0 = {}",
        p.kappa, p.x0, p.x0
    );
    s.notes.push("the limit fails uniform thickness at the cusp (flagged by the thickness scan)".into());
    Ok(s)
}

/// 1D grid over `(−1/2, 5/2)`.
fn split_grid(h: f64) -> Result<GridSpec> {
    GridSpec::covering_interval(-0.5, 2.5, h)
}

/// `Ω_i = (0,1) ∪ (1 + 1/i, 2)` with `u_i = 1` on `(0,1)` and `0` elsewhere.
pub fn split_interval(i: usize, spec: &GridSpec) -> Result<Field> {
    let gap = 1.0 / i as f64;
    let m = DomainMask::from_fn(spec, |q| (q[0] > 0.0 && q[0] < 1.0) || (q[0] > 1.0 + gap && q[0] < 2.0));
    Field::from_fn(&m, |q| if q[0] < 1.0 { 1.0 } else { 0.0 })
}

fn split_gallery(p: &SplitParams) -> Result<GallerySequence> {
    let spec = split_grid(1.0 / p.cells_per_unit as f64)?;
    let members = (1..=p.len).map(|i| split_interval(i, &spec)).collect::<Result<Vec<_>>>()?;
    let limit_domain = DomainMask::from_fn(&spec, |q| q[0] > 0.0 && q[0] < 2.0);
    let limit_field = Field::from_fn(&limit_domain, |q| if q[0] < 1.0 { 1.0 } else { 0.0 })?;
    let mut g = shell(spec, members, limit_domain, Some(limit_field));
    g.limit_description = "(0,2) with candidate limit the indicator of (0,1)".into();
    Ok(g)
}

/// Geometry of the blob-neck domains on the unit square.
#[derive(Debug, Clone, Copy)]
pub struct BlobLayout {
    pub main: [f64; 4],
    pub trunk_y: (f64, f64),
    pub rail: [f64; 4],
    pub blob_y: f64,
    pub full_trunk: f64,
}

pub const BLOB_LAYOUT: BlobLayout = BlobLayout {
    main: [0.05, 0.95, 0.05, 0.30],
    trunk_y: (0.29, 0.63),
    rail: [0.05, 0.95, 0.62, 0.70],
    blob_y: 0.86,
    full_trunk: 0.9,
};

/// Blobs are ellipses, `BLOB_ASPECT` times taller than wide.
pub const BLOB_ASPECT: f64 = 2.0;

/// One member of the blob gallery before calibration.
#[derive(Debug, Clone)]
struct BlobShape {
    trunk: (f64, f64),
    stubs: Vec<(f64, f64)>,
    radius: f64,
}

impl BlobShape {
    fn classify(&self, q: [f64; 2]) -> Option<f64> {
        let l = BLOB_LAYOUT;
        let in_rect = |r: [f64; 4]| q[0] > r[0] && q[0] < r[1] && q[1] > r[2] && q[1] < r[3];
        if in_rect(l.main) || in_rect(l.rail) {
            return Some(0.0);
        }
        if q[0] > self.trunk.0 && q[0] < self.trunk.1 && q[1] > l.trunk_y.0 && q[1] < l.trunk_y.1 {
            return Some(0.0);
        }
        for (k, &(a, b)) in self.stubs.iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let xc = 0.5 * (a + b);
            let (dx, dy) = (q[0] - xc, (q[1] - l.blob_y) / BLOB_ASPECT);
            if dx * dx + dy * dy < self.radius * self.radius {
                return Some(sign);
            }
            if q[0] > a && q[0] < b && q[1] > l.rail[3] - 0.01 && q[1] < l.blob_y {
                let ramp = ((q[1] - l.rail[3]) / (l.blob_y - BLOB_ASPECT * self.radius - l.rail[3])).clamp(0.0, 1.0);
                return Some(sign * ramp);
            }
        }
        None
    }

    fn rasterize(&self, spec: &GridSpec) -> Result<Field> {
        let vals: Vec<Option<f64>> = (0..spec.len()).map(|i| self.classify(spec.center(i))).collect();
        let mask = DomainMask::new(spec.clone(), vals.iter().map(Option::is_some).collect())?;
        Field::new(mask, vals.into_iter().flatten().collect())
    }
}

fn blob_shape(i: usize, n: usize, p: &BlobParams, h: f64, radius: f64) -> BlobShape {
    let l = BLOB_LAYOUT;
    let full = (l.full_trunk / h).round();
    let frac = if n > 1 { (i - 1) as f64 / (n - 1) as f64 } else { 0.0 };
    let cells = (full * (1.0 / full).powf(frac)).round().max(1.0);
    let lo = 0.5 - (cells / 2.0).floor() * h;
    let stub = ((p.stub_cells as f64) / i as f64).round().max(1.0);
    let stubs = (0..i)
        .map(|k| {
            let xc = l.main[0] + (l.main[1] - l.main[0]) * (k as f64 + 0.5) / i as f64;
            let a = ((xc - 0.5 * stub * h) / h).round() * h;
            (a, a + stub * h)
        })
        .collect();
    BlobShape { trunk: (lo, lo + cells * h), stubs, radius }
}

/// Member `i` of `n` of the blob gallery: `i` blobs with alternating values ±1
/// on a rail, joined to the main rectangle by a trunk whose width shrinks
/// geometrically from 0.9 to one cell. The blob half-width is calibrated so that
/// `‖u_i‖_{L^p}` hits the target.
pub fn blob_necks(i: usize, n: usize, p: &BlobParams, spec: &GridSpec) -> Result<(Field, f64)> {
    let h = spec.spacing();
    let l = BLOB_LAYOUT;
    let pitch = (l.main[1] - l.main[0]) / i as f64;
    let rmax = (0.5 * pitch - 1.5 * h).min((l.blob_y - l.rail[3] - 2.0 * h).min(1.0 - l.blob_y - 2.0 * h) / BLOB_ASPECT);
    let norm = |r: f64| -> Result<f64> {
        let f = blob_shape(i, n, p, h, r).rasterize(spec)?;
        lp_norm_slice(f.values(), spec.cell_volume(), p.p)
    };
    let target = p.target_norm;
    // Closed-form start: the blobs alone carry |u|^p = 1 over total area i·a·π·r².
    let guess = (target.powf(p.p) / (i as f64 * BLOB_ASPECT * std::f64::consts::PI)).sqrt();
    let (mut lo, mut hi) = (h, rmax.max(h));
    if norm(hi)? < target {
        return Err(Error::InvalidParameter(format!(
            "blob target norm {target} unreachable for member {i} (blob room {rmax:.4})"
        )));
    }
    let mut best = (f64::INFINITY, guess.clamp(lo, hi));
    let mut r = best.1;
    for _ in 0..48 {
        let v = norm(r)?;
        if (v - target).abs() < best.0 {
            best = ((v - target).abs(), r);
        }
        if v < target {
            lo = r;
        } else {
            hi = r;
        }
        r = 0.5 * (lo + hi);
    }
    Ok((blob_shape(i, n, p, h, best.1).rasterize(spec)?, best.1))
}

fn blob_gallery(p: &BlobParams) -> Result<GallerySequence> {
    let h = 1.0 / p.cells_per_unit as f64;
    let spec = GridSpec::covering_rect((0.0, 1.0), (0.0, 1.0), h)?;
    let n = p.len;
    let built = (1..=n).into_par_iter().map(|i| blob_necks(i, n, p, &spec)).collect::<Result<Vec<_>>>()?;
    let radii: Vec<f64> = built.iter().map(|b| b.1).collect();
    let members: Vec<Field> = built.into_iter().map(|b| b.0).collect();
    let l = BLOB_LAYOUT;
    let last = blob_shape(n, n, p, h, 0.0);
    let limit_domain = DomainMask::from_fn(&spec, |q| {
        let in_rect = |r: [f64; 4]| q[0] > r[0] && q[0] < r[1] && q[1] > r[2] && q[1] < r[3];
        in_rect(l.main)
            || in_rect(l.rail)
            || in_rect([l.rail[0], l.rail[1], l.rail[3] - 0.01, l.blob_y])
            || (q[0] > last.trunk.0 && q[0] < last.trunk.1 && q[1] > l.trunk_y.0 && q[1] < l.trunk_y.1)
    });
    let limit_field = Field::zeros(&limit_domain);
    let mut g = shell(spec, members, limit_domain, Some(limit_field));
    g.limit_description = "main rectangle, final neck, rail and the blob zone [0.05,0.95]x(0.70,0.86], with u = 0".into();
    g.notes.push(format!("calibrated blob radii: {radii:?}"));
    g.notes.push("the 3D variant with boundaries of bounded mass is out of scope".into());
    Ok(g)
}

/// `B₁ \ closure(B_{1/i})`.
pub fn annuli(i: usize, spec: &GridSpec) -> DomainMask {
    let r_in = 1.0 / i as f64;
    DomainMask::from_fn(spec, |q| {
        let r2 = q[0] * q[0] + q[1] * q[1];
        r2 < 1.0 && r2 > r_in * r_in
    })
}

pub fn annuli_field(q: [f64; 2]) -> f64 {
    1.0 + q[0] - 0.5 * q[1] * q[1]
}

fn annuli_gallery(p: &AnnuliParams) -> Result<GallerySequence> {
    let h = 1.0 / p.cells_per_unit as f64;
    let spec = GridSpec::covering_rect((-1.125, 1.125), (-1.125, 1.125), h)?;
    // Member j is the annulus with inner radius 1/(j+1): j = 1 would otherwise be empty.
    let members = (1..=p.len)
        .into_par_iter()
        .map(|j| Field::from_fn(&annuli(j + 1, &spec), annuli_field))
        .collect::<Result<Vec<_>>>()?;
    let limit_domain = DomainMask::from_fn(&spec, |q| q[0] * q[0] + q[1] * q[1] < 1.0);
    let limit_field = Field::from_fn(&limit_domain, annuli_field)?;
    let mut g = shell(spec, members, limit_domain, Some(limit_field));
    g.limit_description = "unit disk B1 with u = 1 + x - y^2/2".into();
    g.notes.push("member j has inner radius 1/(j+1)".into());
    Ok(g)
}

/// `u_i = sin(iπx)` on `interval`.
pub fn oscillation(i: usize, interval: &DomainMask) -> Result<Field> {
    let w = i as f64 * std::f64::consts::PI;
    Field::from_fn(interval, |q| (w * q[0]).sin())
}

fn oscillation_gallery(p: &OscillationParams) -> Result<GallerySequence> {
    let spec = GridSpec::covering_interval(-0.5, 1.5, 1.0 / p.cells_per_unit as f64)?;
    let m = DomainMask::from_fn(&spec, |q| q[0] > 0.0 && q[0] < 1.0);
    let members = (1..=p.len).map(|i| oscillation(i, &m)).collect::<Result<Vec<_>>>()?;
    let limit = Field::zeros(&m);
    let mut g = shell(spec, members, m, Some(limit));
    g.limit_description = "(0,1) with u = 0".into();
    Ok(g)
}
