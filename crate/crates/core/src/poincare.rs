//! Poincaré constants of single domains and Poincaré-sequence verdicts.
//!
//! Constants use the mean-integral normalization
//! `(⨍|u − ū|^q)^{1/q} ≤ C'_P (⨍|∇u|^p)^{1/p}`.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::check_exponent;
use crate::gallery::{GallerySequence, GraphDomain};
use crate::grid::DomainMask;
use crate::linalg::{conjugate_gradient, remove_mean, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Eigen,
    RayleighSearch,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Eigen => "eigen",
            Method::RayleighSearch => "rayleigh-search",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareEstimate {
    pub q: f64,
    pub p: f64,
    pub constant: f64,
    pub method: Method,
    pub domain_measure: f64,
}

const EIGEN_TOL: f64 = 1e-8;
const EIGEN_MAX_OUTER: usize = 400;
const EIGEN_SEED: u64 = 0x5eed;

/// `C = 1/√λ₂` for the graph Neumann Laplacian of the inside cells, by inverse
/// power iteration orthogonal to constants.
pub fn poincare_constant_22(m: &DomainMask) -> Result<PoincareEstimate> {
    if m.is_empty() {
        return Err(Error::EmptyOperand("poincare_constant_22 on an empty mask".into()));
    }
    let comps = m.components();
    if comps != 1 {
        return Err(Error::Disconnected { components: comps });
    }
    let t = Topology::new(m);
    let n = t.len();
    let est = |c| PoincareEstimate { q: 2.0, p: 2.0, constant: c, method: Method::Eigen, domain_measure: m.measure() };
    if n == 1 {
        // No nonconstant functions: every admissible ratio is 0/0; report a zero-size constant.
        return Ok(est(f64::MIN_POSITIVE));
    }
    let apply = |x: &[f64], y: &mut [f64]| t.apply_neumann(x, y);
    let mut rng = ChaCha8Rng::seed_from_u64(EIGEN_SEED);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    remove_mean(&mut x);
    normalize(&mut x);
    let mut lx = vec![0.0; n];
    apply(&x, &mut lx);
    let mut lambda = dot(&x, &lx);
    let cg_cap = 50 * n.max(100);
    for _ in 0..EIGEN_MAX_OUTER {
        // Warm start at x/λ, the exact solution when x is an eigenvector.
        let mut y: Vec<f64> = x.iter().map(|v| v / lambda).collect();
        conjugate_gradient(apply, &x, &mut y, 1e-11, cg_cap, true)?;
        remove_mean(&mut y);
        normalize(&mut y);
        apply(&y, &mut lx);
        let next = dot(&y, &lx);
        x = y;
        let change = (next - lambda).abs() / next;
        lambda = next;
        if change < EIGEN_TOL {
            return Ok(est(1.0 / lambda.sqrt()));
        }
    }
    Err(Error::NotConverged { what: "inverse power iteration", iterations: EIGEN_MAX_OUTER, residual: f64::NAN })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Mean-normalized ratio `(⨍|u−ū|^q)^{1/q} / (⨍|∇u|^p)^{1/p}` of a trial field
/// given on the inside cells of `t`; `None` when the gradient vanishes.
pub fn rayleigh_ratio(t: &Topology, u: &[f64], q: f64, p: f64) -> Option<f64> {
    let n = u.len() as f64;
    let mean = u.iter().sum::<f64>() / n;
    let num = (u.iter().map(|v| (v - mean).abs().powf(q)).sum::<f64>() / n).powf(1.0 / q);
    // Forward differences only, matching the graph Laplacian's edge set.
    let mut den = 0.0;
    for (k, links) in t.links.iter().enumerate() {
        let mut g2 = 0.0;
        for l in links.iter().skip(1).step_by(2) {
            if let crate::linalg::Link::Inside(j) = *l {
                let d = (u[j as usize] - u[k]) / t.h;
                g2 += d * d;
            }
        }
        den += if p == 2.0 { g2 } else { g2.powf(0.5 * p) };
    }
    let den = (den / n).powf(1.0 / p);
    (den > 0.0 && den.is_finite()).then(|| num / den)
}

fn trial_fields(m: &DomainMask, trials: usize, seed: u64) -> Vec<Box<dyn Fn([f64; 2]) -> f64 + Send + Sync>> {
    let spec = m.spec();
    let cells = m.inside_indices();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for &c in &cells {
        let x = spec.center(c);
        for a in 0..spec.dim() {
            lo[a] = lo[a].min(x[a]);
            hi[a] = hi[a].max(x[a]);
        }
    }
    let h = spec.spacing();
    let mut out: Vec<Box<dyn Fn([f64; 2]) -> f64 + Send + Sync>> = Vec::new();
    let pi = std::f64::consts::PI;
    for a in 0..spec.dim() {
        let (l0, len) = (lo[a] - 0.5 * h, hi[a] - lo[a] + h);
        out.push(Box::new(move |x| x[a]));
        for k in 1..=3 {
            out.push(Box::new(move |x| (k as f64 * pi * (x[a] - l0) / len).cos()));
        }
        // Plateau ramps ±1 switching across a thin layer at several cut positions.
        for s in 1..16 {
            let c = l0 + len * s as f64 / 16.0;
            for w in [2.0, 8.0] {
                out.push(Box::new(move |x| ((x[a] - c) / (w * h)).clamp(-1.0, 1.0)));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lens = [hi[0] - lo[0] + h, (hi[1] - lo[1] + h).max(h)];
    for _ in 0..trials {
        let terms: Vec<([f64; 2], f64, f64)> = (0..4)
            .map(|_| {
                let kx = rng.gen_range(0..=3) as f64;
                let ky = if spec.dim() == 2 { rng.gen_range(0..=3) as f64 } else { 0.0 };
                let k = if kx == 0.0 && ky == 0.0 { [1.0, 0.0] } else { [kx, ky] };
                (k, rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let (o, l) = (lo, lens);
        out.push(Box::new(move |x| {
            terms
                .iter()
                .map(|(k, ph, amp)| {
                    amp * (pi * (k[0] * (x[0] - o[0]) / l[0] + k[1] * (x[1] - o[1]) / l[1]) + ph).cos()
                })
                .sum()
        }));
    }
    out
}

/// Maximum mean-normalized Rayleigh ratio over smooth random trial fields and
/// coordinate, cosine and plateau profiles: a certified lower bound on `C'_P`.
pub fn poincare_lower_bound(m: &DomainMask, q: f64, p: f64, trials: usize) -> Result<PoincareEstimate> {
    check_exponent(q)?;
    check_exponent(p)?;
    if !q.is_finite() || !p.is_finite() {
        return Err(Error::InvalidParameter("poincare_lower_bound needs finite exponents".into()));
    }
    if m.is_empty() {
        return Err(Error::EmptyOperand("poincare_lower_bound on an empty mask".into()));
    }
    let t = Topology::new(m);
    let spec = m.spec();
    let fields = trial_fields(m, trials, 0);
    let best = fields
        .par_iter()
        .filter_map(|f| {
            let u: Vec<f64> = t.cells.iter().map(|&c| f(spec.center(c))).collect();
            rayleigh_ratio(&t, &u, q, p)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    if !best.is_finite() || best <= 0.0 {
        return Err(Error::DegenerateFit("all trial gradients vanish".into()));
    }
    Ok(PoincareEstimate { q, p, constant: best, method: Method::RayleighSearch, domain_measure: m.measure() })
}

/// `(C'_P + 1) · sup_i |Ω_i|^{1/q − 1/p}`.
pub fn uniform_sobolev_constant(measures: &[f64], c_p: f64, q: f64, p: f64) -> Result<f64> {
    if measures.is_empty() {
        return Err(Error::EmptyOperand("uniform_sobolev_constant with no measures".into()));
    }
    check_exponent(q)?;
    check_exponent(p)?;
    let e = 1.0 / q - 1.0 / p;
    let sup = measures.iter().map(|m| m.powf(e)).fold(f64::NEG_INFINITY, f64::max);
    Ok((c_p + 1.0) * sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceVerdict {
    Bounded,
    BlowUpDetected,
}

#[derive(Debug, Clone, Serialize)]
pub struct PoincareSequenceReport {
    pub q: f64,
    pub p: f64,
    pub estimates: Vec<PoincareEstimate>,
    pub growth: f64,
    pub verdict: SequenceVerdict,
    pub notes: Vec<String>,
}

const BLOW_UP_FACTOR: f64 = 4.0;
const MONOTONE_SLACK: f64 = 0.05;

/// Per-domain constants (eigen method for `p = q = 2`, lower bounds otherwise)
/// and a blow-up verdict: growth by more than 4× that is monotone to within 5%.
pub fn is_poincare_sequence(seq: &[DomainMask], q: f64, p: f64, budget: usize) -> Result<PoincareSequenceReport> {
    if seq.is_empty() {
        return Err(Error::EmptyOperand("empty domain sequence".into()));
    }
    let eigen = q == 2.0 && p == 2.0;
    let estimates = seq
        .par_iter()
        .map(|m| if eigen { poincare_constant_22(m) } else { poincare_lower_bound(m, q, p, budget) })
        .collect::<Result<Vec<_>>>()?;
    let c: Vec<f64> = estimates.iter().map(|e| e.constant).collect();
    let growth = c[c.len() - 1] / c[0];
    let monotone = c.windows(2).all(|w| w[1] >= w[0] * (1.0 - MONOTONE_SLACK));
    let verdict =
        if growth > BLOW_UP_FACTOR && monotone { SequenceVerdict::BlowUpDetected } else { SequenceVerdict::Bounded };
    let mut notes = Vec::new();
    if !eigen {
        notes.push("lower bounds only: 'bounded' means no blow-up witness was found".into());
    }
    if q < p {
        notes.push(format!("q = {q} < p = {p}: the uniform Sobolev bound is not the relevant regime"));
    }
    Ok(PoincareSequenceReport { q, p, estimates, growth, verdict, notes })
}

impl PoincareSequenceReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "i,measure,constant,method")?;
        for (k, e) in self.estimates.iter().enumerate() {
            writeln!(w, "{},{},{},{}", k + 1, e.domain_measure, e.constant, e.method.as_str())?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    /// Per-member max of the lower/upper graph difference quotients.
    pub per_member: Vec<f64>,
    pub sup: f64,
    pub bound: f64,
    pub uniform: bool,
    /// Minimum thickness `h⁺ − h⁻` per member, then of the limit.
    pub min_thickness: Vec<f64>,
    pub limit_min_thickness: f64,
    pub thickness_degenerates: bool,
}

fn graph_lipschitz(g: &GraphDomain) -> f64 {
    let xs = g.sample_points();
    let mut best: f64 = 0.0;
    for w in xs.windows(2) {
        let dx = w[1] - w[0];
        for f in [&g.lower, &g.upper] {
            best = best.max(((f(w[1]) - f(w[0])) / dx).abs());
        }
    }
    best
}

/// Difference-quotient scan of finely sampled graph functions, with a thickness scan of the limit.
pub fn lipschitz_scan(members: &[GraphDomain], limit: &GraphDomain, bound: f64) -> Result<LipschitzReport> {
    if members.is_empty() {
        return Err(Error::EmptyOperand("empty graph sequence".into()));
    }
    let per_member: Vec<f64> = members.iter().map(graph_lipschitz).collect();
    let sup = per_member.iter().cloned().fold(0.0, f64::max);
    let min_thickness: Vec<f64> = members.iter().map(|g| g.min_thickness().0).collect();
    let limit_min = limit.min_thickness().0;
    let limit_max = limit.sample_points().into_iter().map(|x| limit.thickness(x)).fold(0.0, f64::max);
    Ok(LipschitzReport {
        uniform: sup.is_finite() && sup <= bound,
        per_member,
        sup,
        bound,
        min_thickness,
        limit_min_thickness: limit_min,
        thickness_degenerates: limit_min <= 1e-3 * limit_max,
    })
}

/// [`lipschitz_scan`] for a generated gallery; galleries without graph charts are rejected.
pub fn uniform_lipschitz_check(seq: &GallerySequence, bound: f64) -> Result<LipschitzReport> {
    let g = seq
        .graphs
        .as_ref()
        .ok_or_else(|| Error::NotApplicable(format!("gallery '{}' is not given by graphs", seq.name)))?;
    lipschitz_scan(&g.members, &g.limit, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{BlobParams, ChannelParams, Gallery};
    use crate::grid::{shrink, GridSpec};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn neck_domain(w: f64, h: f64) -> DomainMask {
        let spec = GridSpec::covering_rect((0.0, 2.5), (0.0, 1.0), h).unwrap();
        DomainMask::from_fn(&spec, |p| {
            p[0] < 1.0 || p[0] > 1.5 || (p[1] - 0.5).abs() < 0.5 * w
        })
    }

    #[test]
    fn interval_constant() {
        let l = 1.0;
        let spec = GridSpec::interval(0.0, l / 512.0, 512).unwrap();
        let e = poincare_constant_22(&DomainMask::full(&spec)).unwrap();
        let exact = l / std::f64::consts::PI;
        assert!((e.constant - exact).abs() / exact < 0.02, "{}", e.constant);
        assert_eq!(e.method, Method::Eigen);
    }

    #[test]
    fn square_constant_and_lower_bound() {
        let spec = GridSpec::rect([0.0, 0.0], 1.0 / 128.0, [128, 128]).unwrap();
        let m = DomainMask::full(&spec);
        let e = poincare_constant_22(&m).unwrap();
        let exact = 1.0 / std::f64::consts::PI;
        assert!((e.constant - exact).abs() / exact < 0.02);
        let lb = poincare_lower_bound(&m, 2.0, 2.0, 200).unwrap();
        assert!(lb.constant <= e.constant * 1.02 && lb.constant >= 0.8 * e.constant, "{} vs {}", lb.constant, e.constant);
    }

    #[test]
    fn neck_constants_grow() {
        let h = 1.0 / 40.0;
        let ws = [0.2, 0.1, 0.05];
        let c: Vec<f64> = ws.iter().map(|&w| poincare_constant_22(&neck_domain(w, h)).unwrap().constant).collect();
        assert!(c[0] < c[1] && c[1] < c[2], "{c:?}");
        let lb: Vec<f64> =
            ws.iter().map(|&w| poincare_lower_bound(&neck_domain(w, h), 2.0, 2.0, 20).unwrap().constant).collect();
        assert!(lb[0] < lb[1] && lb[1] < lb[2], "{lb:?}");
        for (a, b) in lb.iter().zip(&c) {
            assert!(*a <= b * 1.02);
        }
    }

    #[test]
    fn disconnected_and_degenerate_inputs() {
        let spec = GridSpec::interval(0.0, 0.1, 10).unwrap();
        let m = DomainMask::from_fn(&spec, |p| p[0] < 0.3 || p[0] > 0.6);
        assert!(matches!(poincare_constant_22(&m), Err(Error::Disconnected { components: 2 })));
        let single = DomainMask::from_fn(&spec, |p| p[0] < 0.1);
        assert!(poincare_lower_bound(&single, 2.0, 2.0, 3).is_err());
    }

    #[test]
    fn uniform_sobolev_examples() {
        assert_eq!(uniform_sobolev_constant(&[1.0], 1.0, 2.0, 2.0).unwrap(), 2.0);
        // sup over {1, 4} of |Ω|^{-1/2} is attained at measure 1.
        assert_eq!(uniform_sobolev_constant(&[1.0, 4.0], 1.0, 2.0, 1.0).unwrap(), 2.0);
        assert!(uniform_sobolev_constant(&[], 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn channel_bounded_blobs_blow_up() {
        let ch = Gallery::Channel(ChannelParams { len: 6, cells_per_unit: 48, ..Default::default() }).generate().unwrap();
        let r = is_poincare_sequence(&ch.domains(), 2.0, 2.0, 0).unwrap();
        assert_eq!(r.verdict, SequenceVerdict::Bounded, "{:?}", r.growth);
        let measures: Vec<f64> = ch.domains().iter().map(|m| m.measure()).collect();
        let c = r.estimates.iter().map(|e| e.constant).fold(0.0, f64::max);
        let s = uniform_sobolev_constant(&measures, c, 2.0, 2.0).unwrap();
        assert!(s.is_finite() && s > 0.0);

        let bl = Gallery::Blobs(BlobParams { len: 8, cells_per_unit: 64, ..Default::default() }).generate().unwrap();
        let r = is_poincare_sequence(&bl.domains(), 2.0, 2.0, 0).unwrap();
        assert_eq!(r.verdict, SequenceVerdict::BlowUpDetected, "{:?}", r.estimates);

        let same = vec![ch.limit_domain.clone(); 3];
        let r = is_poincare_sequence(&same, 2.0, 2.0, 0).unwrap();
        assert_eq!(r.verdict, SequenceVerdict::Bounded);
        assert!(r.estimates.windows(2).all(|w| w[0].constant == w[1].constant));
    }

    #[test]
    fn lipschitz_scans() {
        let base = 0.5;
        let members: Vec<GraphDomain> = (1..=8)
            .map(|i| {
                let a = 1.0 / i as f64;
                GraphDomain::symmetric(Arc::new(move |x: f64| base + a * x.sin()))
            })
            .collect();
        let limit = GraphDomain::symmetric(Arc::new(move |_| base));
        let r = lipschitz_scan(&members, &limit, 10.0).unwrap();
        assert!((r.sup - 1.0).abs() < 1e-3, "{}", r.sup);
        assert!(r.per_member.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.uniform && !r.thickness_degenerates);
        let flat = lipschitz_scan(std::slice::from_ref(&limit), &limit, 1.0).unwrap();
        assert_eq!(flat.sup, 0.0);

        let cusp = Gallery::by_name("cusp").unwrap().generate().unwrap();
        let r = uniform_lipschitz_check(&cusp, 10.0).unwrap();
        assert!(r.uniform && r.thickness_degenerates);
        let split = Gallery::by_name("split-interval").unwrap().generate().unwrap();
        assert!(matches!(uniform_lipschitz_check(&split, 10.0), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn nested_intervals_decrease() {
        let spec = GridSpec::interval(-0.5, 1.0 / 256.0, 512).unwrap();
        let m = DomainMask::from_fn(&spec, |p| p[0] > 0.0 && p[0] < 1.0);
        let c0 = poincare_constant_22(&m).unwrap().constant;
        let c1 = poincare_constant_22(&shrink(&m, 0.1)).unwrap().constant;
        assert!(c1 < c0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn dilation_and_translation(scale in 0.5f64..3.0, shift in 0usize..5, cut in 0.3f64..0.7) {
            let h = 1.0 / 32.0;
            let spec = GridSpec::rect([0.0, 0.0], h, [40, 30]).unwrap();
            let pred = |x: f64, y: f64| x < 30.0 * h && y < 20.0 * h && !(x > cut && y > 0.25 && y < 0.4);
            let m = DomainMask::from_fn(&spec, |p| pred(p[0], p[1]));
            let c1 = poincare_constant_22(&m).unwrap().constant;
            let dilated = GridSpec::rect([0.0, 0.0], h * scale, [40, 30]).unwrap();
            let md = DomainMask::new(dilated, m.flags().to_vec()).unwrap();
            let cs = poincare_constant_22(&md).unwrap().constant;
            prop_assert!((cs / c1 - scale).abs() / scale < 0.01);
            let x0 = shift as f64 * h;
            let mt = DomainMask::from_fn(&spec, |p| p[0] > x0 && pred(p[0] - x0, p[1]));
            let ct = poincare_constant_22(&mt).unwrap().constant;
            prop_assert!((ct - c1).abs() / c1 < 1e-6);
        }

        #[test]
        fn lower_bound_below_eigen(w in 0.3f64..0.9, t in 0.3f64..0.9) {
            let spec = GridSpec::covering_rect((0.0, 1.0), (0.0, 1.0), 1.0 / 32.0).unwrap();
            let m = DomainMask::from_fn(&spec, |p| p[1] < t || p[0] < w);
            let e = poincare_constant_22(&m).unwrap().constant;
            let lb = poincare_lower_bound(&m, 2.0, 2.0, 10).unwrap().constant;
            prop_assert!(lb <= e * 1.02);
        }
    }
}
