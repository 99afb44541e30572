//! ALE and E-convergence next to zero-extension convergence, with three-way
//! equivalence reports.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_exponent, gradient, lp_norm_slice, sobolev_norm, ExtendedField, Field, W1pData};
use crate::gallery::{GallerySequence, GraphDomain};
use crate::grid::{feature_transform, shrink, DomainMask, GridSpec};
use crate::ze::{data_distance, tail_start, ze_distance};

const DERIV_STEP: f64 = 1e-6;

/// Vertical affine fiber map `Φ(x, y) = (x, a(x) + b(x)·y)` taking the reference
/// graph domain onto a target graph domain.
#[derive(Debug, Clone)]
pub struct FiberMap {
    reference: GraphDomain,
    target: GraphDomain,
}

impl FiberMap {
    pub fn coefficients(&self, x: f64) -> (f64, f64) {
        let r = &self.reference;
        let t = &self.target;
        let b = t.thickness(x) / r.thickness(x);
        (((t.lower)(x)) - b * (r.lower)(x), b)
    }
    fn derivatives(&self, x: f64) -> (f64, f64) {
        let (a1, b1) = self.coefficients(x + DERIV_STEP);
        let (a0, b0) = self.coefficients(x - DERIV_STEP);
        ((a1 - a0) / (2.0 * DERIV_STEP), (b1 - b0) / (2.0 * DERIV_STEP))
    }
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (a, b) = self.coefficients(p[0]);
        [p[0], a + b * p[1]]
    }
    fn validate(&self) -> Result<()> {
        for x in self.reference.sample_points() {
            let (a, b) = self.coefficients(x);
            if !(b > 0.0 && b.is_finite() && a.is_finite()) {
                return Err(Error::DegenerateJacobian { x, b });
            }
        }
        Ok(())
    }
}

/// Charts from a reference graph domain `Ω₀` onto every member and the limit.
#[derive(Debug, Clone)]
pub struct AleChart {
    pub reference_mask: DomainMask,
    pub members: Vec<FiberMap>,
    pub limit: FiberMap,
}

impl AleChart {
    pub fn new(reference: &GraphDomain, members: &[GraphDomain], limit: &GraphDomain, spec: &GridSpec) -> Result<Self> {
        let map = |t: &GraphDomain| FiberMap { reference: reference.clone(), target: t.clone() };
        let members: Vec<FiberMap> = members.iter().map(map).collect();
        let limit = map(limit);
        for m in members.iter().chain(std::iter::once(&limit)) {
            m.validate()?;
        }
        Ok(AleChart { reference_mask: reference.mask(spec)?, members, limit })
    }

    /// Charts for a graph gallery with the limit as reference domain.
    pub fn for_gallery(seq: &GallerySequence) -> Result<Self> {
        let g = seq
            .graphs
            .as_ref()
            .ok_or_else(|| Error::NotApplicable(format!("gallery '{}' has no graph charts", seq.name)))?;
        Self::new(&g.limit, &g.members, &g.limit, &seq.spec)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Inside-renormalized bilinear interpolation of a full-grid array at `q`; only
/// cells flagged in `valid` contribute.
fn interpolate(spec: &GridSpec, values: &[f64], valid: &[bool], q: [f64; 2]) -> Option<f64> {
    let fx = spec.fractional(0, q[0]);
    let fy = spec.fractional(1, q[1]);
    let (x0, y0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - x0, fy - y0);
    let (mut acc, mut wsum) = (0.0, 0.0);
    for (dx, wx) in [(0.0, 1.0 - tx), (1.0, tx)] {
        for (dy, wy) in [(0.0, 1.0 - ty), (1.0, ty)] {
            let w = wx * wy;
            let (ix, iy) = (x0 + dx, y0 + dy);
            if w <= 0.0 || ix < 0.0 || iy < 0.0 || ix as usize >= spec.shape()[0] || iy as usize >= spec.shape()[1] {
                continue;
            }
            let c = spec.index(ix as usize, iy as usize);
            if valid[c] {
                acc += w * values[c];
                wsum += w;
            }
        }
    }
    (wsum > 0.0).then(|| acc / wsum)
}

/// Pullback of `u` to the reference mask: values by interpolation, gradients by
/// the chain rule `∇(u∘Φ) = DΦᵀ (∇u)∘Φ` with the cell-located discrete gradient.
fn pullback(u: &Field, map: &FiberMap, reference: &DomainMask) -> Result<W1pData> {
    let spec = u.spec();
    let ext = crate::field::zero_extend(u);
    let g = gradient(u);
    let n = spec.len();
    let mut value = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    for c in reference.inside_indices() {
        let z = spec.center(c);
        let q = map.apply(z);
        value[c] = interpolate(spec, ext.values(), u.domain().flags(), q)
            .ok_or(Error::NoInsideNeighbors { x: q[0], y: q[1] })?;
        let ux = interpolate(spec, g.component(0), g.defined(0), q).unwrap_or(0.0);
        let uy = interpolate(spec, g.component(1), g.defined(1), q).unwrap_or(0.0);
        let (_, b) = map.coefficients(z[0]);
        let (da, db) = map.derivatives(z[0]);
        let shear = da + db * z[1];
        // Identity maps have zero shear exactly; skip the product to keep them bitwise.
        gx[c] = if shear == 0.0 { ux } else { ux + shear * uy };
        gy[c] = if b == 1.0 { uy } else { b * uy };
    }
    Ok(W1pData {
        value: ExtendedField::new(spec.clone(), value)?,
        gradient: vec![ExtendedField::new(spec.clone(), gx)?, ExtendedField::new(spec.clone(), gy)?],
    })
}

/// `‖u_i∘Φ_i − u∘Φ‖_{W^{1,p}(Ω₀)}` (sum form) for member `i` (1-based).
pub fn ale_distance(u_i: &Field, u: &Field, chart: &AleChart, i: usize, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let map = chart
        .members
        .get(i.wrapping_sub(1))
        .ok_or_else(|| Error::InvalidParameter(format!("chart index {i} out of range 1..={}", chart.len())))?;
    let a = pullback(u_i, map, &chart.reference_mask)?;
    let b = pullback(u, &chart.limit, &chart.reference_mask)?;
    data_distance(&a, &b, 1, p)
}

/// Identity-chart ALE distance on a fixed domain: the plain distance on `Ω`.
pub fn identity_ale_distance(u_i: &Field, u: &Field, p: f64) -> Result<f64> {
    if u_i.domain() != u.domain() {
        return Err(Error::NotApplicable("identity charts need equal domains".into()));
    }
    ze_distance(u_i, u, 1, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConnectingSystem {
    /// `E_i u = Ext(u)|_{Ω_i}` with nearest-value extension across a collar.
    RestrictExtension { collar: f64 },
    /// `E_i u = u|_{Ω_i}`; requires `Ω_i ⊆ Ω`.
    PlainRestriction,
}

/// Nearest-inside-value extension of `u` to the cells within `collar` of Ω
/// (face distance), as a field on the enlarged mask.
pub fn extension_field(u: &Field, collar: f64) -> Result<Field> {
    let m = u.domain();
    let spec = m.spec();
    let h = spec.spacing();
    if !(collar > 2.0 * h) {
        return Err(Error::InvalidParameter(format!("collar {collar} must exceed 2h = {}", 2.0 * h)));
    }
    let ft = feature_transform(spec, m.flags());
    let ext = crate::field::zero_extend(u);
    let mut inside = vec![false; spec.len()];
    let mut vals = vec![0.0; spec.len()];
    for c in 0..spec.len() {
        if m.is_inside(c) {
            inside[c] = true;
            vals[c] = ext.values()[c];
        } else if let Some(j) = ft.nearest[c] {
            if ft.squared[c].sqrt() * h - 0.5 * h < collar {
                inside[c] = true;
                vals[c] = ext.values()[j];
            }
        }
    }
    let mask = DomainMask::new(spec.clone(), inside)?;
    let values = mask.inside_indices().into_iter().map(|c| vals[c]).collect();
    Field::new(mask, values)
}

/// [`extension_field`] extended by zero to the box.
pub fn extension_operator(u: &Field, collar: f64) -> Result<ExtendedField> {
    Ok(crate::field::zero_extend(&extension_field(u, collar)?))
}

/// Measured extension bound `‖Ext u‖_{W^{1,p}} / ‖u‖_{W^{1,p}(Ω)}`.
pub fn extension_bound(u: &Field, collar: f64, p: f64) -> Result<f64> {
    let den = sobolev_norm(u, 1, p)?;
    if den == 0.0 {
        return Err(Error::ZeroDenominator("extension bound of a zero field".into()));
    }
    Ok(sobolev_norm(&extension_field(u, collar)?, 1, p)? / den)
}

/// Operators `E_i` from the limit space onto member domains.
pub trait Connector: Sync {
    fn connect(&self, u: &Field, target: &DomainMask) -> Result<Field>;
    fn label(&self) -> String;
}

impl Connector for ConnectingSystem {
    fn connect(&self, u: &Field, target: &DomainMask) -> Result<Field> {
        match *self {
            ConnectingSystem::RestrictExtension { collar } => {
                let e = extension_operator(u, collar)?;
                let values = target.inside_indices().into_iter().map(|c| e.values()[c]).collect();
                Field::new(target.clone(), values)
            }
            ConnectingSystem::PlainRestriction => {
                if !target.is_subset_of(u.domain())? {
                    return Err(Error::NotApplicable("plain restriction needs the member inside the limit".into()));
                }
                u.restrict_to(target)
            }
        }
    }
    fn label(&self) -> String {
        match self {
            ConnectingSystem::RestrictExtension { collar } => format!("restrict-extension(collar={collar})"),
            ConnectingSystem::PlainRestriction => "plain-restriction".into(),
        }
    }
}

/// `‖u_i − E_i u‖_{W^{1,p}(Ω_i)}`.
pub fn e_distance(u_i: &Field, u: &Field, sys: &dyn Connector, p: f64) -> Result<f64> {
    let e = sys.connect(u, u_i.domain())?;
    sobolev_norm(&u_i.lincomb(1.0, &e, -1.0)?, 1, p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum NotionVerdict {
    Strong,
    Fails,
    NotApplicable { reason: String },
}

impl NotionVerdict {
    pub fn applicable(&self) -> bool {
        !matches!(self, NotionVerdict::NotApplicable { .. })
    }
    pub fn label(&self) -> &'static str {
        match self {
            NotionVerdict::Strong => "strong",
            NotionVerdict::Fails => "fails",
            NotionVerdict::NotApplicable { .. } => "not-applicable",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NotionResult {
    pub notion: &'static str,
    pub distances: Option<Vec<f64>>,
    pub tail: Option<f64>,
    pub verdict: NotionVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub p: f64,
    pub tol: f64,
    pub scale: f64,
    pub tail_from: usize,
    pub system: String,
    /// Order: zero-extension, ALE, E.
    pub notions: [NotionResult; 3],
    /// `agreement[a][b]`: both applicable and equal verdicts; `None` if either is not applicable.
    pub agreement: [[Option<bool>; 3]; 3],
    pub topology: TopologySummary,
}

impl EquivalenceReport {
    pub fn ze(&self) -> &NotionVerdict {
        &self.notions[0].verdict
    }
    pub fn ale(&self) -> &NotionVerdict {
        &self.notions[1].verdict
    }
    pub fn e(&self) -> &NotionVerdict {
        &self.notions[2].verdict
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "i,ze_distance,ale_distance,e_distance")?;
        let n = self.notions[0].distances.as_ref().map_or(0, Vec::len);
        let cell = |k: usize, j: usize| {
            self.notions[k].distances.as_ref().map_or_else(String::new, |d| d[j].to_string())
        };
        for j in 0..n {
            writeln!(w, "{},{},{},{}", j + 1, cell(0, j), cell(1, j), cell(2, j))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TopologySummary {
    pub member_components: Vec<usize>,
    pub member_holes: Vec<usize>,
    pub limit_components: usize,
    pub limit_holes: usize,
    pub preserved: bool,
}

fn topology(seq: &GallerySequence) -> TopologySummary {
    let doms = seq.domains();
    let member_components: Vec<usize> = doms.par_iter().map(DomainMask::components).collect();
    let member_holes: Vec<usize> = doms.par_iter().map(DomainMask::enclosed_holes).collect();
    let lc = seq.limit_domain.components();
    let lh = seq.limit_domain.enclosed_holes();
    let preserved = member_components.iter().all(|&c| c == lc) && member_holes.iter().all(|&h| h == lh);
    TopologySummary { member_components, member_holes, limit_components: lc, limit_holes: lh, preserved }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EquivalenceOptions {
    pub p: f64,
    /// Strong verdict when the tail max is below `rel_tol · scale`.
    pub rel_tol: f64,
    pub tail_fraction: f64,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        EquivalenceOptions { p: 2.0, rel_tol: 0.1, tail_fraction: 0.5 }
    }
}

fn judged(notion: &'static str, d: Result<Vec<f64>>, ts: usize, tol: f64) -> NotionResult {
    match d {
        Ok(d) => {
            let tail = d[ts..].iter().cloned().fold(0.0, f64::max);
            let verdict = if tail < tol { NotionVerdict::Strong } else { NotionVerdict::Fails };
            NotionResult { notion, distances: Some(d), tail: Some(tail), verdict }
        }
        Err(e) => NotionResult {
            notion,
            distances: None,
            tail: None,
            verdict: NotionVerdict::NotApplicable { reason: e.to_string() },
        },
    }
}

/// Zero-extension, ALE and E verdicts for one gallery with one shared tolerance.
/// ALE is not applicable across topology changes or without graph charts (fixed
/// domains use the identity chart); E is not applicable where the system cannot
/// be applied.
pub fn equivalence_report(
    seq: &GallerySequence,
    sys: &dyn Connector,
    opts: &EquivalenceOptions,
) -> Result<EquivalenceReport> {
    let p = opts.p;
    check_exponent(p)?;
    let u = seq.limit_field.as_ref().ok_or(Error::MissingLimit)?;
    if seq.members.is_empty() {
        return Err(Error::EmptyOperand("empty gallery".into()));
    }
    let mut scale = sobolev_norm(u, 1, p)?;
    for f in &seq.members {
        scale = scale.max(sobolev_norm(f, 1, p)?);
    }
    let tol = opts.rel_tol * scale;
    let ts = tail_start(seq.members.len(), opts.tail_fraction);
    let ze: Result<Vec<f64>> = seq.members.par_iter().map(|f| ze_distance(f, u, 1, p)).collect();
    let topo = topology(seq);
    let ale: Result<Vec<f64>> = if !topo.preserved {
        Err(Error::NotApplicable(format!(
            "topology changes (components {:?} -> {}, holes {:?} -> {}): no diffeomorphic charts",
            topo.member_components, topo.limit_components, topo.member_holes, topo.limit_holes
        )))
    } else if seq.members.iter().all(|f| f.domain() == &seq.limit_domain) {
        seq.members.par_iter().map(|f| identity_ale_distance(f, u, p)).collect()
    } else {
        AleChart::for_gallery(seq).and_then(|chart| {
            seq.members.par_iter().enumerate().map(|(k, f)| ale_distance(f, u, &chart, k + 1, p)).collect()
        })
    };
    let e: Result<Vec<f64>> = seq.members.par_iter().map(|f| e_distance(f, u, sys, p)).collect();
    let notions = [judged("zero-extension", ze, ts, tol), judged("ale", ale, ts, tol), judged("e", e, ts, tol)];
    let mut agreement = [[None; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            if notions[a].verdict.applicable() && notions[b].verdict.applicable() {
                agreement[a][b] = Some(notions[a].verdict == notions[b].verdict);
            }
        }
    }
    Ok(EquivalenceReport {
        p,
        tol,
        scale,
        tail_from: ts + 1,
        system: sys.label(),
        notions,
        agreement,
        topology: topo,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub delta: f64,
    /// Per member: ∫_V |E_i u|^p over the widest inner collar V of measure ≤ δ.
    pub masses: Vec<f64>,
    pub max_mass: f64,
    /// Members where even the one-cell collar exceeds δ (probe set empty).
    pub below_resolution: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RigidityRow {
    pub alpha: f64,
    pub measure: f64,
    /// Members whose domain contains `U` (the others are skipped).
    pub checked: Vec<usize>,
    pub tail_distance: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub p: f64,
    pub rows: Vec<ProbeRow>,
    pub equiintegrable: bool,
    pub rigidity: Vec<RigidityRow>,
}

fn collar_mass(f: &Field, delta: f64, p: f64) -> (f64, bool) {
    let m = f.domain();
    let h = m.spec().spacing();
    let d = m.distance_to_outside();
    // Inner collars {face distance < α} grow with α in steps of h.
    let mut best: Option<f64> = None;
    let vol = m.spec().cell_volume();
    let cells = m.inside_indices();
    for k in 1.. {
        let alpha = k as f64 * h;
        let in_v: Vec<usize> = (0..cells.len()).filter(|&j| d[cells[j]] - 0.5 * h < alpha).collect();
        if in_v.len() as f64 * vol > delta || in_v.len() == cells.len() {
            if in_v.len() as f64 * vol <= delta {
                best = Some(in_v.iter().map(|&j| f.values()[j].abs().powf(p)).sum::<f64>() * vol);
            }
            break;
        }
        best = Some(in_v.iter().map(|&j| f.values()[j].abs().powf(p)).sum::<f64>() * vol);
    }
    match best {
        Some(v) => (v, false),
        None => (0.0, true),
    }
}

/// Boundary-collar masses of `E_i u` for shrinking `δ`, and a finite rigidity
/// check `‖u|_U − E_i u|_U‖` over the nested cores `U = shrink(Ω, α)`.
///
/// Equiintegrable when the max mass is non-increasing in δ and falls at least
/// like `δ^{1/p'}` between the largest and smallest resolved δ; fewer than two
/// resolved δ give `false`.
pub fn equiintegrability_probe(
    sys: &dyn Connector,
    u: &Field,
    domains: &[DomainMask],
    deltas: &[f64],
    alphas: &[f64],
    p: f64,
) -> Result<ProbeReport> {
    check_exponent(p)?;
    if deltas.is_empty() {
        return Err(Error::InvalidParameter("probe needs at least one delta".into()));
    }
    let connected: Vec<Field> = domains.par_iter().map(|m| sys.connect(u, m)).collect::<Result<_>>()?;
    let mut ds = deltas.to_vec();
    ds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let rows: Vec<ProbeRow> = ds
        .iter()
        .map(|&delta| {
            let res: Vec<(f64, bool)> = connected.par_iter().map(|f| collar_mass(f, delta, p)).collect();
            let masses: Vec<f64> = res.iter().map(|r| r.0).collect();
            ProbeRow {
                delta,
                max_mass: masses.iter().cloned().fold(0.0, f64::max),
                below_resolution: res.iter().enumerate().filter(|(_, r)| r.1).map(|(k, _)| k + 1).collect(),
                masses,
            }
        })
        .collect();
    // Rows where some probe set is empty carry no information and are skipped.
    let resolved: Vec<&ProbeRow> = rows.iter().filter(|r| r.below_resolution.is_empty()).collect();
    let equiintegrable = match (resolved.first(), resolved.last()) {
        (Some(a), Some(b)) if resolved.len() >= 2 => {
            let ratio = (b.delta / a.delta).powf(1.0 - 1.0 / p);
            let monotone = resolved.windows(2).all(|w| w[1].max_mass <= w[0].max_mass);
            monotone && b.max_mass <= a.max_mass * ratio + 1e-300
        }
        _ => false,
    };
    let ts = tail_start(domains.len(), 0.5);
    let rigidity = alphas
        .iter()
        .map(|&alpha| {
            let core = shrink(u.domain(), alpha);
            let mut checked = Vec::new();
            let mut tail: Option<f64> = None;
            for (k, (m, e)) in domains.iter().zip(&connected).enumerate() {
                if core.is_empty() || !core.is_subset_of(m)? {
                    continue;
                }
                checked.push(k + 1);
                if k >= ts {
                    let d = sobolev_norm(&e.restrict_to(&core)?.lincomb(1.0, &u.restrict_to(&core)?, -1.0)?, 1, p)?;
                    tail = Some(tail.map_or(d, |t: f64| t.max(d)));
                }
            }
            Ok(RigidityRow { alpha, measure: core.measure(), checked, tail_distance: tail })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbeReport { p, rows, equiintegrable, rigidity })
}

/// `L^p` norm of a pulled-back value array, for reports.
pub fn pulled_back_norm(u: &Field, chart: &AleChart, p: f64) -> Result<f64> {
    let d = pullback(u, &chart.limit, &chart.reference_mask)?;
    lp_norm_slice(d.value.values(), u.spec().cell_volume(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{AnnuliParams, BlobParams, ChannelParams, Gallery};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn channel(len: usize) -> GallerySequence {
        Gallery::Channel(ChannelParams { len, ..Default::default() }).generate().unwrap()
    }

    #[test]
    fn identity_chart_is_plain_distance() {
        let g = channel(2);
        let lim = g.graphs.as_ref().unwrap().limit.clone();
        let chart = AleChart::new(&lim, std::slice::from_ref(&lim), &lim, &g.spec).unwrap();
        let u = g.limit_field.as_ref().unwrap();
        let v = Field::from_fn(u.domain(), |p| p[0] * p[1] + 0.3).unwrap();
        assert_eq!(ale_distance(u, u, &chart, 1, 2.0).unwrap(), 0.0);
        assert_eq!(ale_distance(&v, u, &chart, 1, 2.0).unwrap(), ze_distance(&v, u, 1, 2.0).unwrap());
    }

    #[test]
    fn vertical_scaling_with_y_independent_field() {
        let h = 1.0 / 128.0;
        let spec = GridSpec::covering_rect((-0.125, 1.125), (-1.0, 1.0), h).unwrap();
        let r0 = GraphDomain::symmetric(Arc::new(|_| 0.5));
        let members: Vec<GraphDomain> = (1..=4)
            .map(|i| {
                let s = 1.0 + 0.5 / i as f64;
                GraphDomain::symmetric(Arc::new(move |_| 0.5 * s))
            })
            .collect();
        let chart = AleChart::new(&r0, &members, &r0, &spec).unwrap();
        let fx = |p: [f64; 2]| (3.0 * p[0]).sin();
        let u = Field::from_fn(&r0.mask(&spec).unwrap(), fx).unwrap();
        let mut prev = f64::INFINITY;
        for (k, g) in members.iter().enumerate() {
            let ui = Field::from_fn(&g.mask(&spec).unwrap(), fx).unwrap();
            let d = ale_distance(&ui, &u, &chart, k + 1, 2.0).unwrap();
            // The pullback of a y-independent field is exact up to the wall cells.
            assert!(d < 0.05, "i = {}: {d}", k + 1);
            assert!(d <= prev + 1e-12);
            prev = d;
        }
    }

    #[test]
    fn degenerate_jacobians_are_rejected() {
        let spec = GridSpec::covering_rect((-0.125, 1.125), (-1.0, 1.0), 1.0 / 32.0).unwrap();
        let r0 = GraphDomain::symmetric(Arc::new(|_| 0.5));
        let flipped = GraphDomain::new((0.0, 1.0), Arc::new(|_| 0.5), Arc::new(|x| if x < 0.5 { 0.6 } else { 0.5 }));
        assert!(matches!(AleChart::new(&r0, &[flipped], &r0, &spec), Err(Error::DegenerateJacobian { .. })));
        let cusp = Gallery::by_name("cusp").unwrap().generate().unwrap();
        assert!(matches!(AleChart::for_gallery(&cusp), Err(Error::DegenerateJacobian { .. })));
    }

    #[test]
    fn extension_properties() {
        let g = channel(2);
        let u = g.limit_field.as_ref().unwrap();
        let h = g.spec.spacing();
        assert!(extension_operator(u, 2.0 * h).is_err());
        let e = extension_operator(u, 0.1).unwrap();
        for (&c, &v) in u.domain().inside_indices().iter().zip(u.values()) {
            assert_eq!(e.values()[c], v);
        }
        let one = Field::from_fn(u.domain(), |_| 1.5).unwrap();
        let ef = extension_field(&one, 0.1).unwrap();
        assert!(ef.values().iter().all(|&v| v == 1.5));
        assert!(ef.domain().count() > u.domain().count());
        // Frozen measured bound for the channel's quartic field.
        let k = extension_bound(u, 0.1, 2.0).unwrap();
        assert!((1.0..1.5).contains(&k), "K = {k}");
    }

    #[test]
    fn e_distance_cases() {
        let g = channel(6);
        let u = g.limit_field.as_ref().unwrap();
        let sys = ConnectingSystem::RestrictExtension { collar: 0.3 };
        let plain = ze_distance(u, u, 1, 2.0).unwrap();
        assert_eq!(e_distance(u, u, &sys, 2.0).unwrap(), plain);
        let v = Field::from_fn(u.domain(), |p| p[0]).unwrap();
        let d = e_distance(&v, u, &sys, 2.0).unwrap();
        let sn = sobolev_norm(&v.lincomb(1.0, u, -1.0).unwrap(), 1, 2.0).unwrap();
        assert_eq!(d, sn);
        assert!(matches!(e_distance(&g.members[0], u, &ConnectingSystem::PlainRestriction, 2.0), Err(Error::NotApplicable(_))));

        let ring = Gallery::Annuli(AnnuliParams { len: 4, ..Default::default() }).generate().unwrap();
        let lu = ring.limit_field.as_ref().unwrap();
        for f in &ring.members {
            assert!(e_distance(f, lu, &ConnectingSystem::PlainRestriction, 2.0).unwrap() < 1e-12);
        }

        let zt: Vec<f64> = g.members.iter().map(|f| ze_distance(f, u, 1, 2.0).unwrap()).collect();
        let et: Vec<f64> = g.members.iter().map(|f| e_distance(f, u, &sys, 2.0).unwrap()).collect();
        let ts = tail_start(zt.len(), 0.5);
        let (a, b) = (zt[ts..].iter().cloned().fold(0.0, f64::max), et[ts..].iter().cloned().fold(0.0, f64::max));
        assert!((a - b).abs() <= 0.1 * a.max(b), "ze {a} vs e {b}");
    }

    #[test]
    fn equivalence_reports() {
        let sys = ConnectingSystem::RestrictExtension { collar: 0.3 };
        let opts = EquivalenceOptions::default();
        let ch = equivalence_report(&channel(16), &sys, &opts).unwrap();
        for n in &ch.notions {
            assert_eq!(n.verdict, NotionVerdict::Strong, "{}: {:?} tol {} all {:?}", n.notion, n.tail, ch.tol, ch.notions.iter().map(|m| m.distances.clone()).collect::<Vec<_>>());
        }
        assert!(ch.agreement.iter().flatten().all(|a| *a == Some(true)));

        let ring = Gallery::Annuli(AnnuliParams { len: 32, ..Default::default() }).generate().unwrap();
        let r = equivalence_report(&ring, &ConnectingSystem::PlainRestriction, &opts).unwrap();
        assert!(matches!(r.ale(), NotionVerdict::NotApplicable { .. }));
        assert_eq!(r.ze(), &NotionVerdict::Strong, "{:?} tol {} {:?}", r.notions[0].tail, r.tol, r.notions[0].distances);
        assert_eq!(r.e(), &NotionVerdict::Strong);
        assert_eq!(r.agreement[0][1], None);
        assert_eq!(r.agreement[0][2], Some(true));

        let bl = Gallery::Blobs(BlobParams { len: 8, cells_per_unit: 64, ..Default::default() }).generate().unwrap();
        let r = equivalence_report(&bl, &sys, &opts).unwrap();
        assert_eq!(r.ze(), &NotionVerdict::Fails);
        assert_eq!(r.e(), &NotionVerdict::Fails);
        assert_eq!(r.agreement[0][2], Some(true));

        let fixed = Gallery::by_name("oscillation").unwrap().generate().unwrap();
        let r = equivalence_report(&fixed, &ConnectingSystem::PlainRestriction, &opts).unwrap();
        assert!(r.ale().applicable());
        assert_eq!(r.notions[0].distances, r.notions[1].distances);
    }

    #[test]
    fn constant_sequences_have_zero_distances() {
        let g = channel(2);
        let u = g.limit_field.clone().unwrap();
        let mut s = g.clone();
        s.members = vec![u.clone(); 3];
        s.graphs.as_mut().unwrap().members = vec![s.graphs.as_ref().unwrap().limit.clone(); 3];
        let r = equivalence_report(&s, &ConnectingSystem::RestrictExtension { collar: 0.1 }, &Default::default()).unwrap();
        for n in &r.notions {
            assert!(n.distances.as_ref().unwrap().iter().all(|&d| d == 0.0), "{}", n.notion);
        }
    }

    /// Adds a spike of fixed L^p mass on one boundary cell of each target.
    struct Spiked(ConnectingSystem);

    impl Connector for Spiked {
        fn connect(&self, u: &Field, target: &DomainMask) -> Result<Field> {
            let base = self.0.connect(u, target)?;
            let b = target.boundary_cells()[0];
            let pos = target.inside_indices().iter().position(|&c| c == b).unwrap();
            let mut vals = base.values().to_vec();
            vals[pos] += 1.0 / target.spec().spacing();
            Field::new(target.clone(), vals)
        }
        fn label(&self) -> String {
            "spiked".into()
        }
    }

    #[test]
    fn equiintegrability_probe_cases() {
        let g = channel(6);
        let u = g.limit_field.as_ref().unwrap();
        let sys = ConnectingSystem::RestrictExtension { collar: 0.3 };
        let deltas = [0.2, 0.1, 0.05, 0.025];
        let alphas = [0.05, 0.1];
        let r = equiintegrability_probe(&sys, u, &g.domains(), &deltas, &alphas, 2.0).unwrap();
        assert!(r.equiintegrable, "{:?}", r.rows.iter().map(|x| x.max_mass).collect::<Vec<_>>());
        assert!(r.rigidity.iter().all(|row| row.tail_distance.unwrap() < 1e-12));
        let bad = equiintegrability_probe(&Spiked(sys), u, &g.domains(), &deltas, &alphas, 2.0).unwrap();
        assert!(!bad.equiintegrable, "{:?}", bad.rows);
        let zero = Field::zeros(u.domain());
        let z = equiintegrability_probe(&sys, &zero, &g.domains(), &deltas, &alphas, 2.0).unwrap();
        assert!(z.rows.iter().all(|row| row.masses.iter().all(|&m| m == 0.0)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn affine_fiber_maps_hit_the_target(lo in -0.4f64..-0.1, hi in 0.1f64..0.4, s in 0.5f64..1.5, x in 0.01f64..0.99) {
            let r0 = GraphDomain::symmetric(Arc::new(|_| 0.5));
            let t = GraphDomain::new((0.0, 1.0), Arc::new(move |x| lo * s + 0.05 * x), Arc::new(move |x| hi * s + 0.05 * x));
            let m = FiberMap { reference: r0, target: t.clone() };
            let top = m.apply([x, 0.5]);
            let bottom = m.apply([x, -0.5]);
            prop_assert!((top[1] - (t.upper)(x)).abs() < 1e-12);
            prop_assert!((bottom[1] - (t.lower)(x)).abs() < 1e-12);
            prop_assert!(m.coefficients(x).1 > 0.0);
        }
    }
}
