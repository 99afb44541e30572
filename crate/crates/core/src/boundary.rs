//! Traces along graph charts, trace convergence, and zero-boundary transfer.
//!
//! Traces are sampled one cell inward from the chart point `η(x) = (x, h(x))`
//! by bilinear interpolation of inside-cell values.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_exponent, gradient, lp_norm_slice, restrict, sobolev_norm, zero_extend, Field};
use crate::gallery::GraphDomain;
use crate::grid::{enlarge, shrink, DomainMask, GridSpec};
use crate::ze::{tail_start, ze_distance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Upper,
    Lower,
}

/// Sampled boundary chart `x ↦ (x, h(x))` over a uniform parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceChart {
    pub params: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    /// Unit inward normal offset direction (`−e_y` for an upper graph).
    pub inward: [f64; 2],
    pub param_spacing: f64,
}

impl TraceChart {
    /// Chart of `y = h(x)` over the column centers of `spec` inside `x_range`.
    pub fn from_graph(spec: &GridSpec, x_range: (f64, f64), h: impl Fn(f64) -> f64, side: Side) -> Result<Self> {
        if spec.dim() != 2 {
            return Err(Error::InvalidParameter("trace charts need a 2D grid".into()));
        }
        let params: Vec<f64> = (0..spec.shape()[0])
            .map(|i| spec.axis_center(0, i))
            .filter(|&x| x > x_range.0 && x < x_range.1)
            .collect();
        if params.is_empty() {
            return Err(Error::InvalidParameter("chart has no parameter samples".into()));
        }
        let points = params.iter().map(|&x| [x, h(x)]).collect();
        let inward = match side {
            Side::Upper => [0.0, -1.0],
            Side::Lower => [0.0, 1.0],
        };
        Ok(TraceChart { params, points, inward, param_spacing: spec.spacing() })
    }

    pub fn for_domain(g: &GraphDomain, spec: &GridSpec, side: Side) -> Result<Self> {
        let f = match side {
            Side::Upper => g.upper.clone(),
            Side::Lower => g.lower.clone(),
        };
        Self::from_graph(spec, g.x_range, |x| f(x), side)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }
    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    fn sample_point(&self, k: usize, h: f64) -> [f64; 2] {
        let p = self.points[k];
        [p[0] + h * self.inward[0], p[1] + h * self.inward[1]]
    }
}

/// Bilinear stencil: up to four `(cell, weight)` pairs with positive weight.
fn stencil(spec: &GridSpec, q: [f64; 2]) -> Vec<(Option<usize>, f64)> {
    let fx = spec.fractional(0, q[0]);
    let fy = spec.fractional(1, q[1]);
    let (x0, y0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - x0, fy - y0);
    let mut out = Vec::with_capacity(4);
    for (dx, wx) in [(0.0, 1.0 - tx), (1.0, tx)] {
        for (dy, wy) in [(0.0, 1.0 - ty), (1.0, ty)] {
            let w = wx * wy;
            if w <= 0.0 {
                continue;
            }
            let (ix, iy) = (x0 + dx, y0 + dy);
            let cell = (ix >= 0.0 && iy >= 0.0 && (ix as usize) < spec.shape()[0] && (iy as usize) < spec.shape()[1])
                .then(|| spec.index(ix as usize, iy as usize));
            out.push((cell, w));
        }
    }
    out
}

/// Discrete trace samples on the chart's parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSamples {
    pub params: Vec<f64>,
    pub values: Vec<f64>,
    /// Whether every positively weighted stencil cell was inside.
    pub supported: Vec<bool>,
    pub param_spacing: f64,
}

impl TraceSamples {
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_slice(&self.values, self.param_spacing, p)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x,trace,supported")?;
        for ((x, v), s) in self.params.iter().zip(&self.values).zip(&self.supported) {
            writeln!(w, "{x},{v},{s}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Trace of `f` along `chart`. Stencil cells outside the domain are dropped
/// and the remaining weights renormalized; a point with no inside stencil cell
/// is an error.
pub fn trace(f: &Field, chart: &TraceChart) -> Result<TraceSamples> {
    let spec = f.spec();
    if spec.dim() != 2 {
        return Err(Error::InvalidParameter("trace needs a 2D field".into()));
    }
    let h = spec.spacing();
    let full = zero_extend(f);
    let m = f.domain();
    let mut values = Vec::with_capacity(chart.len());
    let mut supported = Vec::with_capacity(chart.len());
    for k in 0..chart.len() {
        let q = chart.sample_point(k, h);
        let (mut acc, mut wsum, mut all) = (0.0, 0.0, true);
        for (cell, w) in stencil(spec, q) {
            match cell {
                Some(c) if m.is_inside(c) => {
                    acc += w * full.values()[c];
                    wsum += w;
                }
                _ => all = false,
            }
        }
        if wsum == 0.0 {
            return Err(Error::NoInsideNeighbors { x: q[0], y: q[1] });
        }
        values.push(acc / wsum);
        supported.push(all);
    }
    Ok(TraceSamples { params: chart.params.clone(), values, supported, param_spacing: chart.param_spacing })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceVerdict {
    Converges,
    NotConverged,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceConvergence {
    pub p: f64,
    pub distances: Vec<f64>,
    pub tail_from: usize,
    pub tail: f64,
    pub tol: f64,
    pub verdict: TraceVerdict,
    /// Parameters refused because some chart point there is not fully supported.
    pub refused_params: Vec<f64>,
    /// True when only part of the chart entered the distances.
    pub partial: bool,
}

impl TraceConvergence {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "i,trace_distance")?;
        for (k, d) in self.distances.iter().enumerate() {
            writeln!(w, "{},{}", k + 1, d)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `‖u_i∘η_i − u∘η‖_{L^p(ω)}` per member. All charts must share the same
/// parameter grid. Parameters where any chart point is unsupported (e.g. at a
/// cusp) are refused and the verdict is marked partial.
pub fn trace_convergence(
    members: &[Field],
    charts: &[TraceChart],
    limit: &Field,
    limit_chart: &TraceChart,
    p: f64,
    tol: f64,
) -> Result<TraceConvergence> {
    check_exponent(p)?;
    if members.is_empty() {
        return Err(Error::EmptyOperand("trace convergence of an empty sequence".into()));
    }
    if members.len() != charts.len() {
        return Err(Error::InvalidParameter(format!("{} members but {} charts", members.len(), charts.len())));
    }
    if charts.iter().any(|c| c.params != limit_chart.params) {
        return Err(Error::InvalidParameter("charts must share one parameter grid".into()));
    }
    let lim = trace(limit, limit_chart)?;
    let traces =
        members.par_iter().zip(charts.par_iter()).map(|(f, c)| trace(f, c)).collect::<Result<Vec<_>>>()?;
    let keep: Vec<bool> =
        (0..lim.params.len()).map(|k| lim.supported[k] && traces.iter().all(|t| t.supported[k])).collect();
    let refused_params: Vec<f64> = lim.params.iter().zip(&keep).filter(|(_, &k)| !k).map(|(&x, _)| x).collect();
    let distances = traces
        .iter()
        .map(|t| {
            let diff: Vec<f64> = (0..keep.len()).filter(|&k| keep[k]).map(|k| t.values[k] - lim.values[k]).collect();
            lp_norm_slice(&diff, lim.param_spacing, p)
        })
        .collect::<Result<Vec<_>>>()?;
    let tail_from = tail_start(distances.len(), 0.5);
    let tail = distances[tail_from..].iter().cloned().fold(0.0, f64::max);
    Ok(TraceConvergence {
        p,
        verdict: if tail < tol { TraceVerdict::Converges } else { TraceVerdict::NotConverged },
        distances,
        tail_from: tail_from + 1,
        tail,
        tol,
        partial: !refused_params.is_empty(),
        refused_params,
    })
}

/// `‖tr u‖_{L^p(ω)} / ‖u‖_{W^{1,p}}`.
pub fn trace_norm_bound(f: &Field, chart: &TraceChart, p: f64) -> Result<f64> {
    let den = sobolev_norm(f, 1, p)?;
    if den == 0.0 {
        return Err(Error::ZeroDenominator("trace ratio of a zero field".into()));
    }
    Ok(trace(f, chart)?.lp_norm(p)? / den)
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Cutoff `ψ_ε = smoothstep((d − ε)/ε)` with `d` the face distance to the
/// complement: 0 within `ε` of it, 1 beyond `2ε`, slope at most `1.5/ε`.
pub fn cutoff_profile(m: &DomainMask, eps: f64) -> Result<Vec<f64>> {
    let h = m.spec().spacing();
    if !(eps > 4.0 * h) {
        return Err(Error::InvalidParameter(format!("cutoff width {eps} must exceed 4h = {}", 4.0 * h)));
    }
    let d = m.distance_to_outside();
    Ok(m.inside_indices().into_iter().map(|c| smoothstep((d[c] - 0.5 * h - eps) / eps)).collect())
}

/// `ψ_ε · u`, supported in `shrink(Ω, ε)`.
pub fn inner_cutoff(u: &Field, eps: f64) -> Result<Field> {
    let psi = cutoff_profile(u.domain(), eps)?;
    let values = u.values().iter().zip(&psi).map(|(v, s)| v * s).collect();
    Field::new(u.domain().clone(), values)
}

/// Zero-boundary transfer: cut off `u` at `ε`, extend by zero, restrict to `target`.
/// Requires the 2h-enlargement of `shrink(Ω, ε)` to lie in `target`, so the
/// result vanishes on the target's boundary cells and their neighbors.
pub fn transfer_zero_boundary(u: &Field, target: &DomainMask, eps: f64) -> Result<Field> {
    let core = shrink(u.domain(), eps);
    let h = u.spec().spacing();
    if !enlarge(&core, 2.0 * h).is_subset_of(target)? {
        return Err(Error::Containment("the eps-core of the source (with a two-cell margin) is not inside the target".into()));
    }
    let cut = inner_cutoff(u, eps)?;
    restrict(&zero_extend(&cut), target, 0.0, 1.0)
}

/// `L^p` mass of `f` on the domain's boundary cells and their inside neighbors.
pub fn boundary_mass(f: &Field, p: f64) -> Result<f64> {
    let m = f.domain();
    let spec = m.spec();
    let mut near = vec![false; spec.len()];
    for c in m.boundary_cells() {
        near[c] = true;
        for axis in 0..spec.dim() {
            for step in [-1, 1] {
                if let Some(j) = spec.neighbor(c, axis, step) {
                    near[j] |= m.is_inside(j);
                }
            }
        }
    }
    let full = zero_extend(f);
    let vals: Vec<f64> = (0..spec.len()).filter(|&i| near[i]).map(|i| full.values()[i]).collect();
    lp_norm_slice(&vals, spec.cell_volume(), p)
}

/// Discrete `W^{1,p}_0` proxy: boundary mass of `f` below `tol` and at most
/// half of the gradient `L^p` mass in the one-cell collar.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ZeroBoundaryCheck {
    pub boundary_mass: f64,
    pub collar_gradient_fraction: f64,
    pub accepted: bool,
}

pub fn zero_boundary_check(f: &Field, p: f64, tol: f64) -> Result<ZeroBoundaryCheck> {
    let bm = boundary_mass(f, p)?;
    let g = gradient(f);
    let spec = f.spec();
    let boundary: std::collections::HashSet<usize> = f.domain().boundary_cells().into_iter().collect();
    let (mut total, mut collar) = (0.0, 0.0);
    for axis in 0..spec.dim() {
        for (i, (&v, &d)) in g.component(axis).iter().zip(g.defined(axis)).enumerate() {
            if d {
                let w = v.abs().powf(p);
                total += w;
                if boundary.contains(&i) {
                    collar += w;
                }
            }
        }
    }
    let frac = if total > 0.0 { collar / total } else { 0.0 };
    Ok(ZeroBoundaryCheck { boundary_mass: bm, collar_gradient_fraction: frac, accepted: bm < tol && frac <= 0.5 })
}

/// `ze_distance(transfer_zero_boundary(u, target, ε), u)` for `k = 1`.
pub fn transfer_loss(u: &Field, target: &DomainMask, eps: f64, p: f64) -> Result<f64> {
    ze_distance(&transfer_zero_boundary(u, target, eps)?, u, 1, p)
}
