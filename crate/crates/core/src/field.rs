//! Discrete Sobolev fields on masks.
//!
//! A [`Field`] stores one value per inside cell of its domain. Its zero-extension
//! is an [`ExtendedField`] over the whole ambient grid. Gradients are forward
//! differences, available only on *stencil cells* (inside cells whose `+axis`
//! neighbor is also inside). All integrals use midpoint quadrature.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dictionary::Bump;
use crate::error::{Error, Result};
use crate::grid::{ensure_same_spec, sidecar_path, DomainMask, GridSpec};

/// `(Σ|v|^p · vol)^{1/p}` with the summation order of `values`.
pub fn lp_norm_slice(values: &[f64], cell_volume: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let sum: f64 = if p == 2.0 {
        values.iter().map(|v| v * v).sum()
    } else if p == 1.0 {
        values.iter().map(|v| v.abs()).sum()
    } else {
        values.iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((sum * cell_volume).powf(1.0 / p))
}

pub fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("exponent p must lie in [1, ∞), got {p}")))
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidParameter(format!("non-finite value at position {i}"))),
        None => Ok(()),
    }
}

/// Values on the inside cells of a domain, in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    domain: DomainMask,
    values: Vec<f64>,
}

impl Field {
    pub fn new(domain: DomainMask, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.count() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, domain has {} inside cells",
                values.len(),
                domain.count()
            )));
        }
        check_finite(&values)?;
        Ok(Field { domain, values })
    }

    /// Sample `f` at the inside cell centers.
    pub fn from_fn(domain: &DomainMask, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let spec = domain.spec();
        let values = domain.inside_indices().into_iter().map(|i| f(spec.center(i))).collect();
        Field::new(domain.clone(), values)
    }

    pub fn zeros(domain: &DomainMask) -> Self {
        Field { domain: domain.clone(), values: vec![0.0; domain.count()] }
    }

    pub fn domain(&self) -> &DomainMask {
        &self.domain
    }
    pub fn spec(&self) -> &GridSpec {
        self.domain.spec()
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, lambda: f64) -> Field {
        Field { domain: self.domain.clone(), values: self.values.iter().map(|v| lambda * v).collect() }
    }

    /// `a·self + b·other` on a shared domain.
    pub fn lincomb(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        if self.domain != other.domain {
            return Err(Error::SpecMismatch("fields live on different domains".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Field { domain: self.domain.clone(), values })
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_slice(&self.values, self.spec().cell_volume(), p)
    }

    /// Restriction to a subdomain of `self.domain`.
    pub fn restrict_to(&self, sub: &DomainMask) -> Result<Field> {
        if !sub.is_subset_of(&self.domain)? {
            return Err(Error::Containment("restriction target is not a subdomain".into()));
        }
        let e = zero_extend(self);
        let values = sub.inside_indices().into_iter().map(|i| e.values[i]).collect();
        Ok(Field { domain: sub.clone(), values })
    }

    /// Write values (little-endian f64) to `path`, the mask to `mask_path`, and a
    /// JSON sidecar `path` + ".json" that names the mask file.
    pub fn save(&self, path: &Path, mask_path: &Path) -> Result<()> {
        self.domain.save(mask_path)?;
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(path, bytes)?;
        let mask_ref = match (path.parent(), mask_path.parent()) {
            (Some(a), Some(b)) if a == b => PathBuf::from(mask_path.file_name().unwrap()),
            _ => mask_path.to_path_buf(),
        };
        let side = FieldSidecar { mask: mask_ref, count: self.values.len() };
        fs::write(sidecar_path(path), serde_json::to_vec_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Field> {
        let side_path = sidecar_path(path);
        let side: FieldSidecar = serde_json::from_slice(&fs::read(&side_path)?)
            .map_err(|e| Error::Format { path: side_path.clone(), reason: e.to_string() })?;
        let mask_path = if side.mask.is_absolute() {
            side.mask.clone()
        } else {
            path.parent().unwrap_or(Path::new(".")).join(&side.mask)
        };
        let domain = DomainMask::load(&mask_path)?;
        let bytes = fs::read(path)?;
        let bad = |reason: String| Error::Format { path: path.to_path_buf(), reason };
        if bytes.len() != 8 * side.count {
            return Err(bad(format!("expected {} values, file holds {} bytes", side.count, bytes.len())));
        }
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Field::new(domain, values).map_err(|e| bad(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct FieldSidecar {
    mask: PathBuf,
    count: usize,
}

/// Values on every cell of the ambient grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ExtendedField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidParameter(format!(
                "extended field has {} values, grid has {} cells",
                values.len(),
                spec.len()
            )));
        }
        check_finite(&values)?;
        Ok(ExtendedField { spec, values })
    }
    pub fn zeros(spec: &GridSpec) -> Self {
        ExtendedField { spec: spec.clone(), values: vec![0.0; spec.len()] }
    }
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_slice(&self.values, self.spec.cell_volume(), p)
    }
    /// Cellwise difference `self − other`.
    pub fn sub(&self, other: &ExtendedField) -> Result<ExtendedField> {
        ensure_same_spec(&self.spec, &other.spec)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(ExtendedField { spec: self.spec.clone(), values })
    }
    /// L^p mass of the values on cells outside `m`.
    pub fn mass_outside(&self, m: &DomainMask, p: f64) -> Result<f64> {
        ensure_same_spec(&self.spec, m.spec())?;
        let outside: Vec<f64> =
            self.values.iter().zip(m.flags()).filter(|(_, &ins)| !ins).map(|(&v, _)| v).collect();
        lp_norm_slice(&outside, self.spec.cell_volume(), p)
    }
}

pub fn zero_extend(f: &Field) -> ExtendedField {
    let spec = f.spec().clone();
    let mut values = vec![0.0; spec.len()];
    for (&i, &v) in f.domain.inside_indices().iter().zip(&f.values) {
        values[i] = v;
    }
    ExtendedField { spec, values }
}

/// Restrict `e` to `m`, refusing when the L^p mass of `e` outside `m` exceeds `leak_tol`.
pub fn restrict(e: &ExtendedField, m: &DomainMask, leak_tol: f64, p: f64) -> Result<Field> {
    let mass = e.mass_outside(m, p)?;
    if mass > leak_tol {
        return Err(Error::SupportLeakage { mass, tol: leak_tol });
    }
    let values = m.inside_indices().into_iter().map(|i| e.values[i]).collect();
    Ok(Field { domain: m.clone(), values })
}

/// Discrete gradient: per-axis components on the full grid, meaningful where
/// `defined` holds and exactly zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    domain: DomainMask,
    components: Vec<Vec<f64>>,
    defined: Vec<Vec<bool>>,
}

impl GradientField {
    /// Arbitrary component arrays supported on the inside cells of `domain`.
    pub fn from_components(domain: &DomainMask, components: Vec<Vec<f64>>) -> Result<Self> {
        let spec = domain.spec();
        if components.len() != spec.dim() || components.iter().any(|c| c.len() != spec.len()) {
            return Err(Error::InvalidParameter("gradient needs one full-grid array per axis".into()));
        }
        for c in &components {
            check_finite(c)?;
            if c.iter().zip(domain.flags()).any(|(&v, &ins)| !ins && v != 0.0) {
                return Err(Error::InvalidParameter("gradient component supported outside the domain".into()));
            }
        }
        let defined = vec![domain.flags().to_vec(); spec.dim()];
        Ok(GradientField { domain: domain.clone(), components, defined })
    }

    pub fn domain(&self) -> &DomainMask {
        &self.domain
    }
    pub fn dim(&self) -> usize {
        self.components.len()
    }
    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }
    pub fn defined(&self, axis: usize) -> &[bool] {
        &self.defined[axis]
    }
    /// Number of cells carrying a value for `axis`.
    pub fn stencil_count(&self, axis: usize) -> usize {
        self.defined[axis].iter().filter(|&&d| d).count()
    }
    pub fn is_empty(&self) -> bool {
        (0..self.dim()).all(|a| self.stencil_count(a) == 0)
    }
    /// Zero-extended component (zero off the stencil).
    pub fn extended(&self, axis: usize) -> ExtendedField {
        ExtendedField { spec: self.domain.spec().clone(), values: self.components[axis].clone() }
    }
    /// Component values on defined cells, row-major.
    pub fn stencil_values(&self, axis: usize) -> Vec<f64> {
        self.components[axis]
            .iter()
            .zip(&self.defined[axis])
            .filter(|(_, &d)| d)
            .map(|(&v, _)| v)
            .collect()
    }
}

/// Forward differences `(v[+axis] − v)/h` on stencil cells.
pub fn gradient(f: &Field) -> GradientField {
    let spec = f.spec();
    let h = spec.spacing();
    let ext = zero_extend(f);
    let flags = f.domain.flags();
    let mut components = Vec::with_capacity(spec.dim());
    let mut defined = Vec::with_capacity(spec.dim());
    for axis in 0..spec.dim() {
        let mut comp = vec![0.0; spec.len()];
        let mut def = vec![false; spec.len()];
        for i in 0..spec.len() {
            if !flags[i] {
                continue;
            }
            if let Some(j) = spec.neighbor(i, axis, 1) {
                if flags[j] {
                    comp[i] = (ext.values[j] - ext.values[i]) / h;
                    def[i] = true;
                }
            }
        }
        components.push(comp);
        defined.push(def);
    }
    GradientField { domain: f.domain.clone(), components, defined }
}

/// Zero-extensions of a field and of each gradient component.
#[derive(Debug, Clone)]
pub struct W1pData {
    pub value: ExtendedField,
    pub gradient: Vec<ExtendedField>,
}

impl W1pData {
    /// `Σ_{|α|≤k} ‖D^α u‖_p` from the packaged extensions.
    pub fn norm(&self, k: usize, p: f64) -> Result<f64> {
        let mut s = self.value.lp_norm(p)?;
        if k >= 1 {
            for g in &self.gradient {
                s += g.lp_norm(p)?;
            }
        }
        Ok(s)
    }
}

pub fn w1p_distance_data(f: &Field) -> W1pData {
    let g = gradient(f);
    W1pData { value: zero_extend(f), gradient: (0..g.dim()).map(|a| g.extended(a)).collect() }
}

/// Sum-form Sobolev norm `Σ_{|α|≤k} ‖D^α u‖_{L^p}` for `k ∈ {0, 1}`.
pub fn sobolev_norm(f: &Field, k: usize, p: f64) -> Result<f64> {
    check_order(k)?;
    w1p_distance_data(f).norm(k, p)
}

pub fn check_order(k: usize) -> Result<()> {
    if k <= 1 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("derivative order k must be 0 or 1, got {k}")))
    }
}

/// Check that every bump's closed support, padded by one cell, lies inside `m`.
pub fn check_bumps_inside(m: &DomainMask, bumps: &[Bump]) -> Result<()> {
    let spec = m.spec();
    let h = spec.spacing();
    for b in bumps {
        let reach = b.radius + h;
        for i in 0..spec.len() {
            if m.is_inside(i) {
                continue;
            }
            let c = spec.center(i);
            let d2 = (c[0] - b.center[0]).powi(2) + (c[1] - b.center[1]).powi(2);
            if d2 <= reach * reach {
                return Err(Error::BumpOutsideDomain { x: b.center[0], y: b.center[1], radius: b.radius });
            }
        }
    }
    Ok(())
}

/// Largest integration-by-parts defect `|∫ u ∂_jφ + ∫ g_j φ|` over bumps φ and axes j.
pub fn verify_weak_derivative(u: &Field, g: &GradientField, bumps: &[Bump]) -> Result<f64> {
    if g.domain() != u.domain() {
        return Err(Error::SpecMismatch("gradient and field live on different domains".into()));
    }
    check_bumps_inside(u.domain(), bumps)?;
    let spec = u.spec();
    let vol = spec.cell_volume();
    let ext = zero_extend(u);
    let mut worst: f64 = 0.0;
    for b in bumps {
        let mut acc = vec![0.0; spec.dim()];
        for i in 0..spec.len() {
            let c = spec.center(i);
            if !b.covers(c) {
                continue;
            }
            let phi = b.value(c);
            let dphi = b.gradient(c);
            for (axis, a) in acc.iter_mut().enumerate() {
                *a += ext.values[i] * dphi[axis] + g.components[axis][i] * phi;
            }
        }
        for a in acc {
            worst = worst.max((a * vol).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn interval(spec: &GridSpec, lo: f64, hi: f64) -> DomainMask {
        DomainMask::from_fn(spec, |p| p[0] > lo && p[0] < hi)
    }

    #[test]
    fn zero_extension_examples() {
        let spec = GridSpec::covering_interval(-1.0, 2.0, 1.0 / 256.0).unwrap();
        let m = interval(&spec, 0.0, 1.0);
        let one = Field::from_fn(&m, |_| 1.0).unwrap();
        let e = zero_extend(&one);
        assert!((e.lp_norm(2.0).unwrap() - 1.0).abs() <= 2.0 / 256.0);
        assert_eq!(e.lp_norm(2.0).unwrap(), one.lp_norm(2.0).unwrap());
        assert!(zero_extend(&Field::zeros(&m)).values().iter().all(|&v| v == 0.0));
        // Exact zeros off the domain.
        assert!(e.values().iter().zip(m.flags()).all(|(&v, &ins)| ins || v == 0.0));
        assert_eq!(restrict(&e, &m, 0.0, 2.0).unwrap(), one);
    }

    #[test]
    fn restrict_detects_leakage() {
        let spec = GridSpec::covering_interval(0.0, 2.0, 1.0 / 128.0).unwrap();
        let m = interval(&spec, 0.0, 1.0);
        // Value 1 on (1, 1.25): L^1 mass 0.25, L^2 mass 0.5.
        let vals = (0..spec.len()).map(|i| if (1.0..1.25).contains(&spec.center(i)[0]) { 1.0 } else { 0.0 }).collect();
        let e = ExtendedField::new(spec, vals).unwrap();
        match restrict(&e, &m, 0.1, 2.0) {
            Err(Error::SupportLeakage { mass, .. }) => assert!((mass - 0.5).abs() < 1e-12),
            other => panic!("expected leakage, got {other:?}"),
        }
    }

    #[test]
    fn lp_norm_examples() {
        let spec = GridSpec::covering_interval(-1.0, 3.0, 1.0 / 64.0).unwrap();
        let m = interval(&spec, 0.0, 2.0);
        let c = Field::from_fn(&m, |_| 3.0).unwrap();
        let meas = m.measure();
        assert!((c.lp_norm(3.0).unwrap() - 3.0 * meas.powf(1.0 / 3.0)).abs() < 1e-12);

        let tau = 2.0 * std::f64::consts::PI;
        let s = GridSpec::interval(0.0, tau / 512.0, 512).unwrap();
        let f = Field::from_fn(&DomainMask::full(&s), |p| p[0].sin()).unwrap();
        assert!((f.lp_norm(2.0).unwrap() - std::f64::consts::PI.sqrt()).abs() < 0.01);
        assert!(f.lp_norm(0.5).is_err());
        for lambda in [2.0, -4.0, 0.5] {
            assert_eq!(f.scaled(lambda).lp_norm(2.0).unwrap(), lambda.abs() * f.lp_norm(2.0).unwrap());
        }
    }

    #[test]
    fn gradient_examples() {
        let spec = GridSpec::covering_interval(-0.5, 1.5, 1.0 / 256.0).unwrap();
        let m = interval(&spec, 0.0, 1.0);
        let h = spec.spacing();
        let affine = Field::from_fn(&m, |p| 3.0 * p[0]).unwrap();
        let g = gradient(&affine);
        let vals = g.stencil_values(0);
        assert_eq!(vals.len(), m.count() - 1);
        assert!(vals.iter().all(|&v| (v - 3.0).abs() < 1e-9));

        // Forward difference of x² at x is 2x + h.
        let sq = Field::from_fn(&m, |p| p[0] * p[0]).unwrap();
        let gs = gradient(&sq);
        for i in 0..spec.len() {
            if gs.defined(0)[i] {
                let x = spec.center(i)[0];
                assert!((gs.component(0)[i] - 2.0 * x).abs() <= 2.0 * h);
            }
        }

        let s2 = GridSpec::rect([0.0, 0.0], 0.1, [5, 5]).unwrap();
        let mut flags = vec![false; 25];
        flags[12] = true;
        let lone = Field::from_fn(&DomainMask::new(s2, flags).unwrap(), |_| 1.0).unwrap();
        assert!(gradient(&lone).is_empty());
    }

    #[test]
    fn distance_data_shapes() {
        let spec = GridSpec::rect([0.0, 0.0], 0.25, [4, 3]).unwrap();
        let m = DomainMask::from_fn(&spec, |p| p[0] < 0.8);
        let f = Field::from_fn(&m, |p| p[0] + 2.0 * p[1]).unwrap();
        let d = w1p_distance_data(&f);
        assert_eq!(d.gradient.len(), 2);
        assert_eq!(d.value, zero_extend(&f));
        assert_eq!(d.gradient[1], gradient(&f).extended(1));
    }

    #[test]
    fn field_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec::rect([-1.0, -1.0], 1.0 / 16.0, [32, 32]).unwrap();
        let m = DomainMask::from_fn(&spec, |p| p[0] * p[0] + p[1] * p[1] < 0.7);
        let f = Field::from_fn(&m, |p| (3.0 * p[0]).sin() * p[1] + 1.0 / 3.0).unwrap();
        let path = dir.path().join("u.f64");
        f.save(&path, &dir.path().join("u.mask")).unwrap();
        let back = Field::load(&path).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn weak_derivative_examples() {
        let spec = GridSpec::covering_interval(-0.5, 2.5, 1.0 / 256.0).unwrap();
        let omega = interval(&spec, 0.0, 2.0);
        let bumps = vec![Bump { center: [1.0, 0.0], radius: 0.25 }];

        let chi = Field::from_fn(&omega, |p| if p[0] < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let zero_g = GradientField::from_components(&omega, vec![vec![0.0; spec.len()]]).unwrap();
        let r = verify_weak_derivative(&chi, &zero_g, &bumps).unwrap();
        // ∫χ φ' = φ(1) − φ(0) = 1 for a bump of peak 1 centered at 1.
        assert!((r - 1.0).abs() < 0.01, "{r}");

        let z = Field::zeros(&omega);
        assert_eq!(verify_weak_derivative(&z, &zero_g, &bumps).unwrap(), 0.0);

        let outside = vec![Bump { center: [1.9, 0.0], radius: 0.25 }];
        assert!(matches!(verify_weak_derivative(&z, &zero_g, &outside), Err(Error::BumpOutsideDomain { .. })));
    }

    #[test]
    fn weak_derivative_of_smooth_fields_is_order_h() {
        // Frozen regression: the residual constant C in residual ≤ C·h.
        const C_FROZEN: f64 = 2.0;
        let bumps = vec![
            Bump { center: [0.4, 0.5], radius: 0.2 },
            Bump { center: [0.65, 0.35], radius: 0.15 },
        ];
        for n in [32usize, 64, 128] {
            let h = 1.0 / n as f64;
            let spec = GridSpec::rect([0.0, 0.0], h, [n, n]).unwrap();
            let m = DomainMask::full(&spec);
            let affine = Field::from_fn(&m, |p| 2.0 * p[0] - 0.5 * p[1] + 0.3).unwrap();
            let smooth = Field::from_fn(&m, |p| (2.0 * p[0]).sin() * (p[1] + 1.0).ln()).unwrap();
            for f in [&affine, &smooth] {
                let r = verify_weak_derivative(f, &gradient(f), &bumps).unwrap();
                assert!(r <= C_FROZEN * h, "n = {n}: residual {r}");
            }
        }
    }

    fn dyadic_field(m: &DomainMask, seed: &[i32]) -> Field {
        let vals = (0..m.count()).map(|i| f64::from(seed[i % seed.len()]) / 8.0).collect();
        Field::new(m.clone(), vals).unwrap()
    }

    proptest! {
        #[test]
        fn isometry_for_every_p(vals in proptest::collection::vec(-10.0f64..10.0, 64), p in 1.0f64..6.0, cut in 0.1f64..0.9) {
            let spec = GridSpec::rect([0.0, 0.0], 1.0 / 16.0, [16, 16]).unwrap();
            let m = DomainMask::from_fn(&spec, |q| q[0] + 0.3 * q[1] < cut);
            prop_assume!(!m.is_empty());
            let f = Field::new(m.clone(), (0..m.count()).map(|i| vals[i % 64]).collect()).unwrap();
            let e = zero_extend(&f);
            prop_assert_eq!(e.lp_norm(p).unwrap(), f.lp_norm(p).unwrap());
            prop_assert_eq!(restrict(&e, &m, 0.0, p).unwrap(), f);
        }

        #[test]
        fn gradient_is_linear(a in -4i32..5, b in -4i32..5, s1 in proptest::collection::vec(-64i32..64, 7), s2 in proptest::collection::vec(-64i32..64, 5)) {
            // Dyadic data keeps every operation exact, so equality is bitwise.
            let spec = GridSpec::rect([0.0, 0.0], 0.125, [9, 7]).unwrap();
            let m = DomainMask::from_fn(&spec, |q| (q[0] - 0.5).powi(2) + (q[1] - 0.4).powi(2) < 0.2);
            let f = dyadic_field(&m, &s1);
            let g = dyadic_field(&m, &s2);
            let (a, b) = (f64::from(a), f64::from(b));
            let lhs = gradient(&f.lincomb(a, &g, b).unwrap());
            let (gf, gg) = (gradient(&f), gradient(&g));
            for axis in 0..2 {
                for i in 0..spec.len() {
                    prop_assert_eq!(lhs.component(axis)[i], a * gf.component(axis)[i] + b * gg.component(axis)[i]);
                }
            }
        }

        #[test]
        fn gradient_is_linear_to_rounding(a in -3.0f64..3.0, b in -3.0f64..3.0, phase in 0.0f64..6.0) {
            let spec = GridSpec::rect([0.0, 0.0], 1.0 / 20.0, [20, 20]).unwrap();
            let m = DomainMask::full(&spec);
            let f = Field::from_fn(&m, |q| (q[0] * 3.0 + phase).sin()).unwrap();
            let g = Field::from_fn(&m, |q| q[1] * q[0] - phase).unwrap();
            let lhs = gradient(&f.lincomb(a, &g, b).unwrap());
            let (gf, gg) = (gradient(&f), gradient(&g));
            for axis in 0..2 {
                for i in 0..spec.len() {
                    let r = a * gf.component(axis)[i] + b * gg.component(axis)[i];
                    prop_assert!((lhs.component(axis)[i] - r).abs() <= 1e-11 * (1.0 + r.abs()));
                }
            }
        }
    }
}
