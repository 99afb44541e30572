//! Finite families of test functions: tensor trigonometric modes on the ambient
//! box (dual test functions ψ) and smooth compactly supported bumps φ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DomainMask, GridSpec};

/// `φ(x) = exp(1 − 1/(1 − |x−c|²/R²))` inside the ball, 0 outside; peak value 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Bump {
    pub const PEAK: f64 = 1.0;

    fn t(&self, p: [f64; 2]) -> f64 {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        (dx * dx + dy * dy) / (self.radius * self.radius)
    }
    /// Whether `p` lies in the open support.
    pub fn covers(&self, p: [f64; 2]) -> bool {
        self.t(p) < 1.0
    }
    pub fn value(&self, p: [f64; 2]) -> f64 {
        let t = self.t(p);
        if t >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - t)).exp()
        }
    }
    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let t = self.t(p);
        if t >= 1.0 {
            return [0.0, 0.0];
        }
        let phi = (1.0 - 1.0 / (1.0 - t)).exp();
        let s = -phi * 2.0 / (self.radius * self.radius * (1.0 - t) * (1.0 - t));
        [s * (p[0] - self.center[0]), s * (p[1] - self.center[1])]
    }
}

/// One factor of a tensor mode along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wave {
    Cos(u32),
    Sin(u32),
}

impl Wave {
    fn eval(self, t: f64) -> f64 {
        let tau = std::f64::consts::TAU;
        match self {
            Wave::Cos(k) => (tau * f64::from(k) * t).cos(),
            Wave::Sin(k) => (tau * f64::from(k) * t).sin(),
        }
    }
    fn label(self) -> String {
        match self {
            Wave::Cos(k) => format!("cos{k}"),
            Wave::Sin(k) => format!("sin{k}"),
        }
    }
}

/// Trig modes `Π_axis wave(x_axis)` with box-periodic frequencies up to `max_freq`,
/// plus a list of bumps.
#[derive(Debug, Clone)]
pub struct TestDictionary {
    spec: GridSpec,
    max_freq: u32,
    waves: Vec<Wave>,
    /// `factors[axis][w][cell index along axis]`.
    factors: Vec<Vec<Vec<f64>>>,
    bumps: Vec<Bump>,
}

pub const DEFAULT_MAX_FREQ: u32 = 8;
pub const DEFAULT_BUMPS: usize = 10;

impl TestDictionary {
    pub fn new(spec: &GridSpec, max_freq: u32, bumps: Vec<Bump>) -> Self {
        let mut waves = vec![Wave::Cos(0)];
        for k in 1..=max_freq {
            waves.push(Wave::Cos(k));
            waves.push(Wave::Sin(k));
        }
        let upper = spec.upper();
        let factors = (0..spec.dim())
            .map(|axis| {
                let len = upper[axis] - spec.origin()[axis];
                waves
                    .iter()
                    .map(|&w| {
                        (0..spec.shape()[axis])
                            .map(|i| w.eval((spec.axis_center(axis, i) - spec.origin()[axis]) / len))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        TestDictionary { spec: spec.clone(), max_freq, waves, factors, bumps }
    }

    /// Default dictionary: modes up to frequency 8 and 10 bumps placed in `domain`.
    pub fn standard(domain: &DomainMask, seed: u64) -> Result<Self> {
        let bumps = place_bumps(domain, DEFAULT_BUMPS, None, seed)?;
        Ok(Self::new(domain.spec(), DEFAULT_MAX_FREQ, bumps))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn max_freq(&self) -> u32 {
        self.max_freq
    }
    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }
    pub fn mode_count(&self) -> usize {
        self.waves.len().pow(self.spec.dim() as u32)
    }
    fn mode_waves(&self, mode: usize) -> (usize, Option<usize>) {
        let n = self.waves.len();
        if self.spec.dim() == 1 {
            (mode, None)
        } else {
            (mode % n, Some(mode / n))
        }
    }
    pub fn mode_label(&self, mode: usize) -> String {
        match self.mode_waves(mode) {
            (a, None) => self.waves[a].label(),
            (a, Some(b)) => format!("{}x{}", self.waves[a].label(), self.waves[b].label()),
        }
    }
    /// Mode `mode` sampled on every cell center of the grid.
    pub fn sample_mode(&self, mode: usize) -> Vec<f64> {
        let (a, b) = self.mode_waves(mode);
        (0..self.spec.len())
            .map(|i| {
                let (ix, iy) = self.spec.coords(i);
                let fy = b.map_or(1.0, |b| self.factors[1][b][iy]);
                self.factors[0][a][ix] * fy
            })
            .collect()
    }
    /// `∫ v ψ` for every mode ψ, by midpoint quadrature over the whole grid
    /// (separable evaluation: rows first, then columns).
    pub fn pair_all(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.spec.len());
        let vol = self.spec.cell_volume();
        let [nx, ny] = self.spec.shape();
        let nw = self.waves.len();
        // row_sums[a][iy] = Σ_x X_a(x) v(x, y)
        let row_sums: Vec<Vec<f64>> = (0..nw)
            .map(|a| {
                let fx = &self.factors[0][a];
                (0..ny)
                    .map(|iy| values[iy * nx..(iy + 1) * nx].iter().zip(fx).map(|(v, f)| v * f).sum())
                    .collect()
            })
            .collect();
        if self.spec.dim() == 1 {
            return row_sums.into_iter().map(|r| r[0] * vol).collect();
        }
        let mut out = Vec::with_capacity(nw * nw);
        for b in 0..nw {
            let fy = &self.factors[1][b];
            for rs in &row_sums {
                out.push(rs.iter().zip(fy).map(|(r, f)| r * f).sum::<f64>() * vol);
            }
        }
        out
    }
}

/// Place `count` bumps of radius `radius` (default: a quarter of the
/// inradius) compactly inside `domain`. The first center is drawn with a
/// seeded RNG and the rest follow by farthest-point sampling among eligible
/// cells.
pub fn place_bumps(domain: &DomainMask, count: usize, radius: Option<f64>, seed: u64) -> Result<Vec<Bump>> {
    let spec = domain.spec();
    let h = spec.spacing();
    let depth: Vec<f64> = domain
        .distance_to_outside()
        .into_iter()
        .zip(domain.flags())
        .map(|(d, &ins)| if ins { d - 0.5 * h } else { 0.0 })
        .collect();
    let inradius = depth.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
    let r = radius.unwrap_or(0.25 * inradius);
    if !(r >= 2.0 * h) {
        return Err(Error::InvalidParameter(format!("bump radius {r} is below two cells (domain too thin)")));
    }
    let eligible: Vec<usize> = (0..spec.len()).filter(|&i| depth[i] >= r + 2.0 * h).collect();
    if eligible.is_empty() {
        return Err(Error::InvalidParameter(format!("no room for bumps of radius {r}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![eligible[rng.gen_range(0..eligible.len())]];
    let mut nearest: Vec<f64> = vec![f64::INFINITY; eligible.len()];
    while chosen.len() < count {
        let last = spec.center(*chosen.last().unwrap());
        let mut best = (0.0, usize::MAX);
        for (k, &cell) in eligible.iter().enumerate() {
            let c = spec.center(cell);
            let d2 = (c[0] - last[0]).powi(2) + (c[1] - last[1]).powi(2);
            nearest[k] = nearest[k].min(d2);
            if nearest[k] > best.0 {
                best = (nearest[k], cell);
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        chosen.push(best.1);
    }
    Ok(chosen.into_iter().map(|i| Bump { center: spec.center(i), radius: r }).collect())
}
