//! Masked 5-point Laplacians and an unpreconditioned conjugate-gradient solver.

use crate::error::{Error, Result};
use crate::grid::DomainMask;

/// Where one of a cell's axis neighbors lands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    /// Another inside cell (by ordinal).
    Inside(u32),
    /// Outside the domain: the shared face has midpoint `face` and outward normal `normal`.
    Ghost { face: [f64; 2], normal: [i8; 2] },
}

/// Inside-cell adjacency of a mask, in ordinal (row-major inside) numbering.
#[derive(Debug, Clone)]
pub struct Topology {
    pub cells: Vec<usize>,
    pub links: Vec<Vec<Link>>,
    pub h: f64,
}

impl Topology {
    pub fn new(m: &DomainMask) -> Self {
        let spec = m.spec();
        let h = spec.spacing();
        let cells = m.inside_indices();
        let mut ordinal = vec![u32::MAX; spec.len()];
        for (k, &c) in cells.iter().enumerate() {
            ordinal[c] = k as u32;
        }
        let links = cells
            .iter()
            .map(|&c| {
                let center = spec.center(c);
                let mut out = Vec::with_capacity(2 * spec.dim());
                for axis in 0..spec.dim() {
                    for step in [-1isize, 1] {
                        match spec.neighbor(c, axis, step) {
                            Some(j) if m.is_inside(j) => out.push(Link::Inside(ordinal[j])),
                            _ => {
                                let mut face = center;
                                face[axis] += 0.5 * h * step as f64;
                                let mut normal = [0i8; 2];
                                normal[axis] = step as i8;
                                out.push(Link::Ghost { face, normal });
                            }
                        }
                    }
                }
                out
            })
            .collect();
        Topology { cells, links, h }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Graph (natural boundary) Laplacian `Σ_{inside nbrs} (x_i − x_j)/h²`.
    pub fn apply_neumann(&self, x: &[f64], y: &mut [f64]) {
        let s = 1.0 / (self.h * self.h);
        for (k, links) in self.links.iter().enumerate() {
            let mut acc = 0.0;
            for l in links {
                if let Link::Inside(j) = *l {
                    acc += x[k] - x[j as usize];
                }
            }
            y[k] = acc * s;
        }
    }

    /// Dirichlet Laplacian with face data: outside neighbor values are the
    /// linear ghosts `2g − x_i`, so each ghost face adds `2x_i/h²` here and
    /// `2g/h²` to the right-hand side.
    pub fn apply_dirichlet(&self, x: &[f64], y: &mut [f64]) {
        let s = 1.0 / (self.h * self.h);
        for (k, links) in self.links.iter().enumerate() {
            let mut acc = 0.0;
            for l in links {
                match *l {
                    Link::Inside(j) => acc += x[k] - x[j as usize],
                    Link::Ghost { .. } => acc += 2.0 * x[k],
                }
            }
            y[k] = acc * s;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solve `A x = b` for symmetric positive (semi)definite `A`, starting from `x`.
/// Stops when `‖b − A x‖ ≤ rel_tol · ‖b‖`. When `project` is set, iterates are
/// kept orthogonal to constants (for singular Neumann systems).
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
    project: bool,
) -> Result<CgStats> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    if project {
        remove_mean(&mut r);
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let res = rr.sqrt() / bnorm;
        if res <= rel_tol {
            if project {
                remove_mean(x);
            }
            return Ok(CgStats { iterations: it, relative_residual: res });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotConverged { what: "conjugate gradient (breakdown)", iterations: it, residual: res });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if project {
            remove_mean(&mut r);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let res = rr.sqrt() / bnorm;
    if res <= rel_tol {
        return Ok(CgStats { iterations: max_iter, relative_residual: res });
    }
    Err(Error::NotConverged { what: "conjugate gradient", iterations: max_iter, residual: res })
}

pub fn remove_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}
