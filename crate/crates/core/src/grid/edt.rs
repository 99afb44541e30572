//! Exact Euclidean distance transform on cell centers.
//!
//! Separable lower-envelope-of-parabolas passes (Felzenszwalb & Huttenlocher),
//! one per axis, on squared distances measured in cell units. Squared distances
//! between cell centers are integers, so the transform is exact in `f64`.

use super::GridSpec;

/// Squared distance (cell units) from every cell center to the nearest feature
/// cell center, together with the index of that nearest feature cell.
/// Cells get `f64::INFINITY` and `None` when there are no features at all.
#[derive(Debug, Clone)]
pub struct FeatureTransform {
    pub squared: Vec<f64>,
    pub nearest: Vec<Option<usize>>,
}

/// One-dimensional transform of `f` (squared costs, `INFINITY` for "no feature").
/// Writes the envelope value and the arg-minimizing sample into `d` and `arg`.
fn envelope_1d(f: &[f64], d: &mut [f64], arg: &mut [usize], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let qf = q as f64;
        loop {
            let Some(&last) = v.last() else {
                v.push(q);
                z.push(f64::NEG_INFINITY);
                break;
            };
            let lf = last as f64;
            let s = ((f[q] + qf * qf) - (f[last] + lf * lf)) / (2.0 * qf - 2.0 * lf);
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                z.push(s);
                break;
            }
        }
    }
    if v.is_empty() {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for q in 0..n {
        let qf = q as f64;
        while k + 1 < v.len() && z[k + 1] < qf {
            k += 1;
        }
        let dq = qf - v[k] as f64;
        d[q] = dq * dq + f[v[k]];
        arg[q] = v[k];
    }
}

/// Distance transform to the cells flagged in `feature`.
pub fn feature_transform(spec: &GridSpec, feature: &[bool]) -> FeatureTransform {
    let [nx, ny] = spec.shape();
    let len = nx * ny;
    assert_eq!(feature.len(), len, "feature array length must match the grid");

    // Pass along x: per row, nearest feature column.
    let mut sq = vec![f64::INFINITY; len];
    let mut col = vec![0usize; len];
    let mut v = Vec::new();
    let mut z = Vec::new();
    let mut f = vec![0.0; nx.max(ny)];
    let mut d = vec![0.0; nx.max(ny)];
    let mut arg = vec![0usize; nx.max(ny)];
    for iy in 0..ny {
        let row = iy * nx;
        for ix in 0..nx {
            f[ix] = if feature[row + ix] { 0.0 } else { f64::INFINITY };
        }
        envelope_1d(&f[..nx], &mut d[..nx], &mut arg[..nx], &mut v, &mut z);
        sq[row..row + nx].copy_from_slice(&d[..nx]);
        col[row..row + nx].copy_from_slice(&arg[..nx]);
    }

    let mut nearest = vec![None; len];
    if ny == 1 {
        for ix in 0..nx {
            if sq[ix].is_finite() {
                nearest[ix] = Some(col[ix]);
            }
        }
        return FeatureTransform { squared: sq, nearest };
    }

    // Pass along y: per column, combine the row results.
    let mut out = vec![f64::INFINITY; len];
    for ix in 0..nx {
        for iy in 0..ny {
            f[iy] = sq[iy * nx + ix];
        }
        envelope_1d(&f[..ny], &mut d[..ny], &mut arg[..ny], &mut v, &mut z);
        for iy in 0..ny {
            let idx = iy * nx + ix;
            out[idx] = d[iy];
            if d[iy].is_finite() {
                let src_row = arg[iy];
                nearest[idx] = Some(src_row * nx + col[src_row * nx + ix]);
            }
        }
    }
    FeatureTransform { squared: out, nearest }
}

/// Euclidean distance (length units) from each cell center to the nearest
/// feature cell center.
pub fn distance_to(spec: &GridSpec, feature: &[bool]) -> Vec<f64> {
    let h = spec.spacing();
    feature_transform(spec, feature)
        .squared
        .into_iter()
        .map(|s| s.sqrt() * h)
        .collect()
}
