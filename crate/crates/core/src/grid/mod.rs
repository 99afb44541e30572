//! Rasterized domain geometry on uniform grids.
//!
//! A [`GridSpec`] describes a bounded ambient box split into square cells and a
//! [`DomainMask`] flags the cells whose centers lie in a domain. Distances are
//! measured between cell centers with an exact Euclidean distance transform.

mod edt;
mod io;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use edt::{distance_to, feature_transform, FeatureTransform};
pub use io::sidecar_path;

/// Uniform cell grid over an ambient box in one or two dimensions.
///
/// Cells are indexed row-major with x fastest: `index = ix + nx * iy`.
/// In 1D the second shape entry is 1 and the second coordinate is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRecord", into = "SpecRecord")]
pub struct GridSpec {
    dim: usize,
    origin: [f64; 2],
    spacing: f64,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct SpecRecord {
    dim: usize,
    origin: Vec<f64>,
    spacing: f64,
    shape: Vec<usize>,
}

impl TryFrom<SpecRecord> for GridSpec {
    type Error = Error;
    fn try_from(r: SpecRecord) -> Result<Self> {
        GridSpec::new(r.dim, &r.origin, r.spacing, &r.shape)
    }
}

impl From<GridSpec> for SpecRecord {
    fn from(s: GridSpec) -> Self {
        SpecRecord {
            dim: s.dim,
            origin: s.origin[..s.dim].to_vec(),
            spacing: s.spacing,
            shape: s.shape[..s.dim].to_vec(),
        }
    }
}

impl GridSpec {
    pub fn new(dim: usize, origin: &[f64], spacing: f64, shape: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dim must be 1 or 2, got {dim}")));
        }
        if origin.len() != dim || shape.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "origin and shape need {dim} entries, got {} and {}",
                origin.len(),
                shape.len()
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {spacing}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidParameter("origin must be finite".into()));
        }
        if shape.contains(&0) {
            return Err(Error::InvalidParameter("every shape entry must be at least 1".into()));
        }
        let mut o = [0.0; 2];
        let mut s = [1usize; 2];
        o[..dim].copy_from_slice(origin);
        s[..dim].copy_from_slice(shape);
        Ok(GridSpec { dim, origin: o, spacing, shape: s })
    }

    /// 1D grid with `n` cells of width `h` starting at `a`.
    pub fn interval(a: f64, h: f64, n: usize) -> Result<Self> {
        Self::new(1, &[a], h, &[n])
    }

    pub fn rect(origin: [f64; 2], h: f64, shape: [usize; 2]) -> Result<Self> {
        Self::new(2, &origin, h, &shape)
    }

    /// 1D grid covering `(a, b)` with spacing `h` (cell count rounded).
    pub fn covering_interval(a: f64, b: f64, h: f64) -> Result<Self> {
        let n = ((b - a) / h).round();
        if !(n >= 1.0) {
            return Err(Error::InvalidParameter(format!("empty interval ({a}, {b})")));
        }
        Self::interval(a, h, n as usize)
    }

    /// 2D grid covering `(x0, x1) × (y0, y1)` with spacing `h` (cell counts rounded).
    pub fn covering_rect(x: (f64, f64), y: (f64, f64), h: f64) -> Result<Self> {
        let nx = ((x.1 - x.0) / h).round();
        let ny = ((y.1 - y.0) / h).round();
        if !(nx >= 1.0 && ny >= 1.0) {
            return Err(Error::InvalidParameter("empty rectangle".into()));
        }
        Self::rect([x.0, y.0], h, [nx as usize, ny as usize])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    /// Cell counts `[nx, ny]` (`ny == 1` in 1D).
    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }
    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Volume `hⁿ` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }
    /// Upper corner of the ambient box.
    pub fn upper(&self) -> [f64; 2] {
        [
            self.origin[0] + self.shape[0] as f64 * self.spacing,
            if self.dim == 2 { self.origin[1] + self.shape[1] as f64 * self.spacing } else { 0.0 },
        ]
    }
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix + self.shape[0] * iy
    }
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.shape[0], idx / self.shape[0])
    }
    /// Center coordinate of cell `i` along `axis`.
    pub fn axis_center(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + (i as f64 + 0.5) * self.spacing
    }
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let (ix, iy) = self.coords(idx);
        [
            self.axis_center(0, ix),
            if self.dim == 2 { self.axis_center(1, iy) } else { 0.0 },
        ]
    }
    /// Neighbor of `idx` one step along `axis` in direction `step` (±1), if in the box.
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> Option<usize> {
        if axis >= self.dim {
            return None;
        }
        let (ix, iy) = self.coords(idx);
        let c = if axis == 0 { ix } else { iy } as isize + step;
        if c < 0 || c >= self.shape[axis] as isize {
            return None;
        }
        Some(if axis == 0 { self.index(c as usize, iy) } else { self.index(ix, c as usize) })
    }
    /// Fractional cell position of coordinate `t` along `axis`, such that cell
    /// centers sit at integers. Values within 1e-9 of an integer are snapped.
    pub fn fractional(&self, axis: usize, t: f64) -> f64 {
        let s = (t - self.origin[axis]) / self.spacing - 0.5;
        let r = s.round();
        if (s - r).abs() < 1e-9 {
            r
        } else {
            s
        }
    }
    fn require_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpecMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Check that two grid specs agree exactly.
pub fn ensure_same_spec(a: &GridSpec, b: &GridSpec) -> Result<()> {
    a.require_same(b)
}

/// Discrete domain: one inside flag per cell of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    spec: GridSpec,
    inside: Vec<bool>,
}

impl DomainMask {
    pub fn new(spec: GridSpec, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != spec.len() {
            return Err(Error::InvalidParameter(format!(
                "mask has {} flags, grid has {} cells",
                inside.len(),
                spec.len()
            )));
        }
        Ok(DomainMask { spec, inside })
    }

    /// Center-sampled mask: a cell is inside iff `pred(center)` holds.
    pub fn from_fn(spec: &GridSpec, pred: impl Fn([f64; 2]) -> bool) -> Self {
        let inside = (0..spec.len()).map(|i| pred(spec.center(i))).collect();
        DomainMask { spec: spec.clone(), inside }
    }

    pub fn empty(spec: &GridSpec) -> Self {
        DomainMask { spec: spec.clone(), inside: vec![false; spec.len()] }
    }

    pub fn full(spec: &GridSpec) -> Self {
        DomainMask { spec: spec.clone(), inside: vec![true; spec.len()] }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn flags(&self) -> &[bool] {
        &self.inside
    }
    pub fn is_inside(&self, idx: usize) -> bool {
        self.inside[idx]
    }
    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }
    pub fn is_empty(&self) -> bool {
        !self.inside.iter().any(|&b| b)
    }
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.spec.cell_volume()
    }
    /// Grid indices of the inside cells in row-major order.
    pub fn inside_indices(&self) -> Vec<usize> {
        (0..self.inside.len()).filter(|&i| self.inside[i]).collect()
    }

    fn zip(&self, other: &DomainMask, op: impl Fn(bool, bool) -> bool) -> Result<DomainMask> {
        self.spec.require_same(&other.spec)?;
        let inside = self.inside.iter().zip(&other.inside).map(|(&a, &b)| op(a, b)).collect();
        Ok(DomainMask { spec: self.spec.clone(), inside })
    }
    pub fn union(&self, other: &DomainMask) -> Result<DomainMask> {
        self.zip(other, |a, b| a || b)
    }
    pub fn intersection(&self, other: &DomainMask) -> Result<DomainMask> {
        self.zip(other, |a, b| a && b)
    }
    pub fn difference(&self, other: &DomainMask) -> Result<DomainMask> {
        self.zip(other, |a, b| a && !b)
    }
    /// Complement within the ambient box.
    pub fn complement(&self) -> DomainMask {
        DomainMask { spec: self.spec.clone(), inside: self.inside.iter().map(|&b| !b).collect() }
    }
    pub fn is_subset_of(&self, other: &DomainMask) -> Result<bool> {
        self.spec.require_same(&other.spec)?;
        Ok(self.inside.iter().zip(&other.inside).all(|(&a, &b)| !a || b))
    }
    pub fn symmetric_difference_measure(&self, other: &DomainMask) -> Result<f64> {
        Ok(self.zip(other, |a, b| a != b)?.measure())
    }

    /// Inside cells with at least one outside 4-neighbor; leaving the box counts as outside.
    pub fn boundary_cells(&self) -> Vec<usize> {
        let dim = self.spec.dim();
        (0..self.inside.len())
            .filter(|&i| {
                self.inside[i]
                    && (0..dim).any(|ax| {
                        [-1isize, 1].iter().any(|&s| match self.spec.neighbor(i, ax, s) {
                            Some(j) => !self.inside[j],
                            None => true,
                        })
                    })
            })
            .collect()
    }

    /// Label connected components of the cells where `flags` holds.
    /// `diagonal` adds the four diagonal neighbors in 2D.
    fn label(&self, flags: &[bool], diagonal: bool) -> (Vec<usize>, usize) {
        const NONE: usize = usize::MAX;
        let [nx, ny] = self.spec.shape();
        let mut label = vec![NONE; flags.len()];
        let mut next = 0;
        let mut stack = Vec::new();
        for seed in 0..flags.len() {
            if !flags[seed] || label[seed] != NONE {
                continue;
            }
            label[seed] = next;
            stack.push(seed);
            while let Some(c) = stack.pop() {
                let (ix, iy) = self.spec.coords(c);
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        if (dx == 0 && dy == 0) || (!diagonal && dx != 0 && dy != 0) {
                            continue;
                        }
                        let jx = ix as isize + dx;
                        let jy = iy as isize + dy;
                        if jx < 0 || jy < 0 || jx >= nx as isize || jy >= ny as isize {
                            continue;
                        }
                        let j = self.spec.index(jx as usize, jy as usize);
                        if flags[j] && label[j] == NONE {
                            label[j] = next;
                            stack.push(j);
                        }
                    }
                }
            }
            next += 1;
        }
        (label, next)
    }

    /// Number of 4-connected components of the inside cells.
    pub fn components(&self) -> usize {
        self.label(&self.inside, false).1
    }

    pub fn is_connected(&self) -> bool {
        self.components() == 1
    }

    /// Number of outside components (8-connected, the dual of 4-connectivity)
    /// that do not reach the border of the ambient box. Each one is a hole.
    pub fn enclosed_holes(&self) -> usize {
        let outside: Vec<bool> = self.inside.iter().map(|&b| !b).collect();
        let (label, n) = self.label(&outside, self.spec.dim() == 2);
        let [nx, ny] = self.spec.shape();
        let mut touching = HashSet::new();
        for i in 0..outside.len() {
            if !outside[i] {
                continue;
            }
            let (ix, iy) = self.spec.coords(i);
            let border = ix == 0 || ix + 1 == nx || (self.spec.dim() == 2 && (iy == 0 || iy + 1 == ny));
            if border {
                touching.insert(label[i]);
            }
        }
        n - touching.len()
    }

    /// Center distance from every cell to the nearest inside cell.
    pub fn distance_to_inside(&self) -> Vec<f64> {
        distance_to(&self.spec, &self.inside)
    }

    /// Center distance from every cell to the nearest outside cell of the box.
    pub fn distance_to_outside(&self) -> Vec<f64> {
        let outside: Vec<bool> = self.inside.iter().map(|&b| !b).collect();
        distance_to(&self.spec, &outside)
    }
}

pub fn measure(m: &DomainMask) -> f64 {
    m.measure()
}

/// Which sets a Hausdorff distance compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HausdorffMode {
    /// The domains themselves.
    Set,
    /// Their complements within the ambient box.
    Complement,
}

fn directed(from: &DomainMask, dist_to_other: &[f64]) -> f64 {
    from.inside
        .iter()
        .zip(dist_to_other)
        .filter(|(&a, _)| a)
        .map(|(_, &d)| d)
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two masks, measured between cell centers.
pub fn hausdorff(a: &DomainMask, b: &DomainMask, mode: HausdorffMode) -> Result<f64> {
    a.spec.require_same(&b.spec)?;
    let (a, b) = match mode {
        HausdorffMode::Set => (a.clone(), b.clone()),
        HausdorffMode::Complement => (a.complement(), b.complement()),
    };
    if a.is_empty() || b.is_empty() {
        let what = match mode {
            HausdorffMode::Set => "Hausdorff distance of an empty set",
            HausdorffMode::Complement => "Hausdorff distance of an empty complement",
        };
        return Err(Error::EmptyOperand(what.into()));
    }
    let da = a.distance_to_inside();
    let db = b.distance_to_inside();
    Ok(directed(&a, &db).max(directed(&b, &da)))
}

/// Outer enlargement `{x : dist(x, Ω) < α}`.
///
/// The distance of an outside cell to the domain is taken to the nearest inside
/// cell's face, i.e. the center distance minus half a cell, which is exact for
/// axis-aligned boundaries.
pub fn enlarge(m: &DomainMask, alpha: f64) -> DomainMask {
    let h = m.spec.spacing();
    let d = m.distance_to_inside();
    let inside = m.inside.iter().zip(&d).map(|(&b, &di)| b || di - 0.5 * h < alpha).collect();
    DomainMask { spec: m.spec.clone(), inside }
}

/// Inner core: inside cells whose distance to the complement (within the box)
/// is at least `α`, with the same half-cell face convention as [`enlarge`].
pub fn shrink(m: &DomainMask, alpha: f64) -> DomainMask {
    let h = m.spec.spacing();
    let d = m.distance_to_outside();
    let inside = m.inside.iter().zip(&d).map(|(&b, &di)| b && di - 0.5 * h >= alpha).collect();
    DomainMask { spec: m.spec.clone(), inside }
}

/// Measure of the collar `enlarge(m, α) \ shrink(m, α)`.
pub fn collar_measure(m: &DomainMask, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("collar width must be positive, got {alpha}")));
    }
    Ok(enlarge(m, alpha).measure() - shrink(m, alpha).measure())
}

/// Dyadic scales `2^j · h` for `j = 2, …, count + 1`, all above the 2h floor.
pub fn dyadic_scales(spec: &GridSpec, count: usize) -> Vec<f64> {
    (0..count).map(|j| spec.spacing() * f64::from(1u32 << (j + 2))).collect()
}

/// Box-counting estimate for the discrete boundary.
#[derive(Debug, Clone, Serialize)]
pub struct BoxCount {
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    pub dimension: f64,
}

/// Least-squares slope of `log N(α)` against `log(1/α)`, where `N(α)` counts the
/// α-boxes (anchored at the grid origin) containing a boundary cell center.
pub fn box_counting_dimension(m: &DomainMask, scales: &[f64]) -> Result<BoxCount> {
    let h = m.spec.spacing();
    if scales.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 scales, got {}", scales.len())));
    }
    if let Some(a) = scales.iter().find(|&&a| !(a > 2.0 * h)) {
        return Err(Error::InvalidParameter(format!("scale {a} is not above 2h = {}", 2.0 * h)));
    }
    let boundary = m.boundary_cells();
    if boundary.is_empty() {
        return Err(Error::EmptyOperand("mask has no boundary cells".into()));
    }
    let origin = m.spec.origin();
    let counts: Vec<usize> = scales
        .iter()
        .map(|&a| {
            let boxes: HashSet<(i64, i64)> = boundary
                .iter()
                .map(|&i| {
                    let c = m.spec.center(i);
                    (((c[0] - origin[0]) / a).floor() as i64, ((c[1] - origin[1]) / a).floor() as i64)
                })
                .collect();
            boxes.len()
        })
        .collect();
    if counts.iter().all(|&c| c == counts[0]) {
        return Err(Error::DegenerateFit(format!("all box counts equal {}", counts[0])));
    }
    let xs: Vec<f64> = scales.iter().map(|a| (1.0 / a).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all scales equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(BoxCount { scales: scales.to_vec(), counts, dimension: sxy / sxx })
}

/// How `containment_index` tests a member against the limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContainmentMode {
    /// `Ω_i ⊆ Ω_{α+}` and `Ω_{α−} ⊆ Ω_i`.
    Complement,
    /// `Ω_i ⊆ Ω_{α+}` and `Ω ⊆ (Ω_i)_{α+}`.
    Set,
}

/// Smallest `N` such that every member with 1-based index `i > N` is caught
/// between the α-core and the α-enlargement of the limit (in the chosen mode).
/// `None` means the last member already fails, so no such `N` exists.
pub fn containment_index(
    seq: &[DomainMask],
    limit: &DomainMask,
    alpha: f64,
    mode: ContainmentMode,
) -> Result<Option<usize>> {
    for m in seq {
        m.spec.require_same(&limit.spec)?;
    }
    let outer = enlarge(limit, alpha);
    let core = shrink(limit, alpha);
    let mut last_fail = 0;
    for (k, m) in seq.iter().enumerate() {
        let ok = m.is_subset_of(&outer)?
            && match mode {
                ContainmentMode::Complement => core.is_subset_of(m)?,
                ContainmentMode::Set => limit.is_subset_of(&enlarge(m, alpha))?,
            };
        if !ok {
            last_fail = k + 1;
        }
    }
    if last_fail == seq.len() && !seq.is_empty() {
        Ok(None)
    } else {
        Ok(Some(last_fail))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(a: f64, b: f64, h: f64) -> GridSpec {
        GridSpec::covering_interval(a, b, h).unwrap()
    }

    fn interval_mask(spec: &GridSpec, lo: f64, hi: f64) -> DomainMask {
        DomainMask::from_fn(spec, |p| p[0] > lo && p[0] < hi)
    }

    fn square_grid(h: f64) -> GridSpec {
        GridSpec::covering_rect((-0.25, 1.25), (-0.25, 1.25), h).unwrap()
    }

    fn unit_square(spec: &GridSpec) -> DomainMask {
        DomainMask::from_fn(spec, |p| p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0)
    }

    #[test]
    fn measures() {
        let spec = square_grid(1.0 / 64.0);
        assert_eq!(DomainMask::empty(&spec).measure(), 0.0);
        assert!((unit_square(&spec).measure() - 1.0).abs() <= 2.0 / 64.0);
        let fine = GridSpec::covering_rect((-0.5, 0.5), (-0.5, 0.5), 1.0 / 128.0).unwrap();
        let disk = DomainMask::from_fn(&fine, |p| p[0] * p[0] + p[1] * p[1] < 0.25);
        // Oracle: lattice-point count of the disk on an 8x finer grid.
        let n = 1024i64;
        let mut hits = 0i64;
        for i in 0..n {
            for j in 0..n {
                let x = -0.5 + (i as f64 + 0.5) / n as f64;
                let y = -0.5 + (j as f64 + 0.5) / n as f64;
                if x * x + y * y < 0.25 {
                    hits += 1;
                }
            }
        }
        let oracle = hits as f64 / (n * n) as f64;
        assert!((oracle - std::f64::consts::FRAC_PI_4).abs() < 1e-3);
        assert!((disk.measure() - oracle).abs() < 0.01);
    }

    #[test]
    fn hausdorff_examples() {
        let spec = line(-0.5, 2.5, 1.0 / 256.0);
        let h = spec.spacing();
        let a = interval_mask(&spec, 0.0, 1.0);
        let b = interval_mask(&spec, 0.0, 2.0);
        assert_eq!(hausdorff(&a, &a, HausdorffMode::Set).unwrap(), 0.0);
        assert!((hausdorff(&a, &b, HausdorffMode::Set).unwrap() - 1.0).abs() <= 2.0 * h);

        let i = 10.0;
        let split = DomainMask::from_fn(&spec, |p| (p[0] > 0.0 && p[0] < 1.0) || (p[0] > 1.0 + 1.0 / i && p[0] < 2.0));
        // Brute force over all pairs of complement cell centers.
        let ca = split.complement();
        let cb = b.complement();
        let pts = |m: &DomainMask| m.inside_indices().iter().map(|&k| spec.center(k)[0]).collect::<Vec<_>>();
        let (pa, pb) = (pts(&ca), pts(&cb));
        let dir = |from: &[f64], to: &[f64]| {
            from.iter().map(|x| to.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
        };
        let oracle = dir(&pa, &pb).max(dir(&pb, &pa));
        let got = hausdorff(&split, &b, HausdorffMode::Complement).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        // The supremum sits at the gap endpoint x = 1, equidistant from 0 and 2.
        assert!((got - 1.0).abs() <= 2.0 * h, "{got}");
        assert!(got > 0.9);
    }

    #[test]
    fn hausdorff_errors() {
        let spec = line(0.0, 1.0, 0.1);
        let other = line(0.0, 1.0, 0.05);
        let m = interval_mask(&spec, 0.2, 0.4);
        assert!(matches!(hausdorff(&m, &DomainMask::empty(&spec), HausdorffMode::Set), Err(Error::EmptyOperand(_))));
        assert!(matches!(
            hausdorff(&m, &DomainMask::full(&spec), HausdorffMode::Complement),
            Err(Error::EmptyOperand(_))
        ));
        assert!(matches!(
            hausdorff(&m, &interval_mask(&other, 0.2, 0.4), HausdorffMode::Set),
            Err(Error::SpecMismatch(_))
        ));
    }

    #[test]
    fn enlarge_and_shrink_examples() {
        let spec = line(0.0, 1.0, 1.0 / 256.0);
        let h = spec.spacing();
        let m = interval_mask(&spec, 0.4, 0.6);
        assert_eq!(enlarge(&m, 0.0), m);
        let e = enlarge(&m, 0.1);
        let target = interval_mask(&spec, 0.3, 0.7);
        assert!(e.symmetric_difference_measure(&target).unwrap() <= 2.0 * h);

        let sq_spec = square_grid(1.0 / 128.0);
        let sq = unit_square(&sq_spec);
        assert!((shrink(&sq, 0.1).measure() - 0.64).abs() <= 0.02);
        let collar = collar_measure(&sq, 0.1).unwrap();
        // Outer frame with rounded corners (4α + πα²) plus inner frame 1 − (1 − 2α)².
        let oracle = 0.4 + std::f64::consts::PI * 0.01 + (1.0 - 0.64);
        assert!((collar - oracle).abs() <= 0.04, "collar {collar} vs {oracle}");
        assert!((collar - 0.80).abs() <= 0.04);

        let unit = interval_mask(&line(-0.5, 1.5, 1.0 / 256.0), 0.0, 1.0);
        assert!((collar_measure(&unit, 0.05).unwrap() - 0.2).abs() <= 2.0 / 256.0);
    }

    #[test]
    fn collar_is_monotone() {
        let spec = square_grid(1.0 / 64.0);
        let sq = unit_square(&spec);
        let vals: Vec<f64> = [0.2, 0.1, 0.05, 0.02].iter().map(|&a| collar_measure(&sq, a).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn box_counting_examples() {
        let spec = square_grid(1.0 / 128.0);
        let scales = dyadic_scales(&spec, 4);
        let sq = unit_square(&spec);
        assert!((box_counting_dimension(&sq, &scales).unwrap().dimension - 1.0).abs() <= 0.15);
        let half = DomainMask::from_fn(&spec, |p| p[1] < 0.5);
        assert!((box_counting_dimension(&half, &scales).unwrap().dimension - 1.0).abs() <= 0.15);
        let full = DomainMask::full(&spec);
        assert!((box_counting_dimension(&full, &scales).unwrap().dimension - 1.0).abs() <= 0.15);
        assert!(box_counting_dimension(&sq, &scales[..2]).is_err());
        assert!(box_counting_dimension(&sq, &[spec.spacing(), 0.1, 0.2]).is_err());
    }

    #[test]
    fn box_counting_degenerate_fit() {
        let spec = square_grid(1.0 / 32.0);
        let mut flags = vec![false; spec.len()];
        flags[spec.index(3, 3)] = true;
        let dot = DomainMask::new(spec.clone(), flags).unwrap();
        let err = box_counting_dimension(&dot, &[0.1, 0.2, 0.3]).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(_)));
    }

    #[test]
    fn containment_examples() {
        let spec = line(-0.5, 2.5, 1.0 / 256.0);
        let limit = interval_mask(&spec, 0.0, 2.0);
        let seq = vec![limit.clone(); 5];
        assert_eq!(containment_index(&seq, &limit, 0.1, ContainmentMode::Complement).unwrap(), Some(0));

        let split: Vec<DomainMask> = (1..=16)
            .map(|i| {
                let g = 1.0 / i as f64;
                DomainMask::from_fn(&spec, move |p| (p[0] > 0.0 && p[0] < 1.0) || (p[0] > 1.0 + g && p[0] < 2.0))
            })
            .collect();
        // Set sense: the gap closes below α eventually.
        let n = containment_index(&split, &limit, 0.2, ContainmentMode::Set).unwrap();
        assert!(matches!(n, Some(k) if k < 16));
        assert_eq!(containment_index(&split, &limit, 0.2, ContainmentMode::Complement).unwrap(), None);
    }

    #[test]
    fn connectivity_and_holes() {
        let spec = GridSpec::covering_rect((-1.125, 1.125), (-1.125, 1.125), 1.0 / 32.0).unwrap();
        let disk = DomainMask::from_fn(&spec, |p| p[0] * p[0] + p[1] * p[1] < 1.0);
        let ring = DomainMask::from_fn(&spec, |p| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            r2 < 1.0 && r2 > 0.1
        });
        assert!(disk.is_connected() && ring.is_connected());
        assert_eq!(disk.enclosed_holes(), 0);
        assert_eq!(ring.enclosed_holes(), 1);
        let two = DomainMask::from_fn(&spec, |p| p[0].abs() > 0.5 && p[1].abs() < 0.3);
        assert_eq!(two.components(), 2);
    }

    fn arb_mask() -> impl Strategy<Value = DomainMask> {
        proptest::collection::vec(
            (0.0f64..1.0, 0.0f64..1.0, 0.05f64..0.4),
            1..4,
        )
        .prop_map(|disks| {
            let spec = GridSpec::covering_rect((0.0, 1.0), (0.0, 1.0), 1.0 / 32.0).unwrap();
            DomainMask::from_fn(&spec, |p| {
                disks.iter().any(|&(x, y, r)| (p[0] - x).powi(2) + (p[1] - y).powi(2) < r * r)
            })
        })
        .prop_filter("nonempty with nonempty complement", |m| !m.is_empty() && !m.complement().is_empty())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn hausdorff_metric_axioms(a in arb_mask(), b in arb_mask(), c in arb_mask()) {
            let h = a.spec().spacing();
            for mode in [HausdorffMode::Set, HausdorffMode::Complement] {
                let ab = hausdorff(&a, &b, mode).unwrap();
                let ba = hausdorff(&b, &a, mode).unwrap();
                let ac = hausdorff(&a, &c, mode).unwrap();
                let bc = hausdorff(&b, &c, mode).unwrap();
                prop_assert_eq!(ab, ba);
                prop_assert!(ab >= 0.0);
                prop_assert_eq!(hausdorff(&a, &a, mode).unwrap(), 0.0);
                prop_assert!(ac <= ab + bc + 2.0 * h);
            }
            prop_assert_eq!(hausdorff(&a, &b, HausdorffMode::Set).unwrap() == 0.0, a == b);
        }

        #[test]
        fn shrink_subset_enlarge(m in arb_mask(), alpha in 0.001f64..0.3) {
            prop_assert!(shrink(&m, alpha).is_subset_of(&m).unwrap());
            prop_assert!(m.is_subset_of(&enlarge(&m, alpha)).unwrap());
        }

        #[test]
        fn enlarge_composes(m in arb_mask(), alpha in 0.0f64..0.2, beta in 0.0f64..0.2) {
            let h = m.spec().spacing();
            let twice = enlarge(&enlarge(&m, alpha), beta);
            let once = enlarge(&m, alpha + beta);
            // One-cell slack: everything in `once` is within h of `twice`.
            let slack = enlarge(&twice, h);
            prop_assert!(once.is_subset_of(&slack).unwrap());
        }

        #[test]
        fn collar_shrinks_with_alpha(m in arb_mask()) {
            let vals: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|&a| collar_measure(&m, a).unwrap()).collect();
            prop_assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
