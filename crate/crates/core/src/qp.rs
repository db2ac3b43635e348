//! Minimum-norm point of a polytope.
//!
//! Solves
//!
//! ```text
//!     minimize    1/2 ||v||^2
//!     subject to  <a_i, v> >= b_i    for every row i
//! ```
//!
//! with the dual active-set method of Goldfarb and Idnani, specialised to an
//! identity Hessian. The method starts from the unconstrained minimiser
//! `v = 0` and adds violated constraints one at a time while keeping the
//! active multipliers nonnegative, so it either reaches the optimum or proves
//! that no feasible point exists. Active-set factorizations are recomputed
//! from scratch on every change, which is cheap at the sizes used here.

use crate::error::{Error, Result};
use crate::linalg::dot;

/// One half-space `<normal, v> >= offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn slack(&self, v: &[f64]) -> f64 {
        dot(&self.normal, v) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpOutcome {
    /// The minimiser and the indices of the constraints active at it.
    Solved {
        v: Vec<f64>,
        active: Vec<usize>,
    },
    Infeasible,
}

impl QpOutcome {
    pub fn solution(&self) -> Option<&[f64]> {
        match self {
            QpOutcome::Solved { v, .. } => Some(v),
            QpOutcome::Infeasible => None,
        }
    }
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpTolerance {
    /// Largest accepted violation of a constraint, measured as a distance.
    pub feasibility: f64,
}

impl Default for QpTolerance {
    fn default() -> Self {
        Self { feasibility: 1e-11 }
    }
}

/// Full QR of a `d x q` matrix given as `q` columns: returns the `d x d`
/// orthogonal factor (column-major, `q[c][r]`) and the `q x q` triangle.
fn householder_qr(cols: &[&[f64]], d: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let q = cols.len();
    // r_full[c] is column c of the working matrix
    let mut r_full: Vec<Vec<f64>> = cols.iter().map(|c| c.to_vec()).collect();
    let mut qmat: Vec<Vec<f64>> = (0..d)
        .map(|c| {
            let mut e = vec![0.0; d];
            e[c] = 1.0;
            e
        })
        .collect();
    for k in 0..q.min(d) {
        let alpha_sq: f64 = r_full[k][k..].iter().map(|v| v * v).sum();
        let alpha = alpha_sq.sqrt();
        if alpha == 0.0 {
            continue;
        }
        let sign = if r_full[k][k] >= 0.0 { 1.0 } else { -1.0 };
        let mut h = r_full[k][k..].to_vec();
        h[0] += sign * alpha;
        let hh: f64 = h.iter().map(|v| v * v).sum();
        if hh == 0.0 {
            continue;
        }
        // apply H = I - 2 h h^T / (h^T h) to remaining columns of R
        for col in r_full.iter_mut().skip(k) {
            let s = 2.0 * dot(&h, &col[k..]) / hh;
            for (c, hv) in col[k..].iter_mut().zip(&h) {
                *c -= s * hv;
            }
        }
        // Q <- Q H, acting on rows of Q restricted to coordinates k..
        for r in 0..d {
            let s: f64 = (k..d).map(|c| qmat[c][r] * h[c - k]).sum::<f64>() * 2.0 / hh;
            for c in k..d {
                qmat[c][r] -= s * h[c - k];
            }
        }
    }
    let rmat = (0..q)
        .map(|row| {
            (0..q)
                .map(|col| if row <= col { r_full[col][row] } else { 0.0 })
                .collect()
        })
        .collect();
    (qmat, rmat)
}

/// Solves `R r = rhs` for upper-triangular `R`.
fn back_substitute(r: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let q = rhs.len();
    let mut out = vec![0.0; q];
    for i in (0..q).rev() {
        let s: f64 = ((i + 1)..q).map(|j| r[i][j] * out[j]).sum();
        out[i] = (rhs[i] - s) / r[i][i];
    }
    out
}

/// Projects the origin onto `{v : <a_i, v> >= b_i}` in dimension `dim`.
pub fn min_norm_point(
    dim: usize,
    constraints: &[HalfSpace],
    tol: QpTolerance,
) -> Result<QpOutcome> {
    let norms: Vec<f64> = constraints
        .iter()
        .map(|c| dot(&c.normal, &c.normal).sqrt())
        .collect();
    for (i, c) in constraints.iter().enumerate() {
        if c.normal.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: c.normal.len(),
            });
        }
        if norms[i] == 0.0 && c.offset > 0.0 {
            return Ok(QpOutcome::Infeasible);
        }
    }

    let mut v = vec![0.0; dim];
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let max_iter = 20 * (constraints.len() + dim) + 100;
    let mut iter = 0;

    loop {
        // most violated constraint, by distance
        let mut pick: Option<(usize, f64)> = None;
        for (i, c) in constraints.iter().enumerate() {
            if norms[i] == 0.0 || active.contains(&i) {
                continue;
            }
            let viol = -c.slack(&v) / norms[i];
            if viol > tol.feasibility && pick.is_none_or(|(_, best)| viol > best) {
                pick = Some((i, viol));
            }
        }
        let Some((p, _)) = pick else {
            return Ok(QpOutcome::Solved { v, active });
        };
        let np = &constraints[p].normal;
        let mut up = 0.0;

        loop {
            iter += 1;
            if iter > max_iter {
                return Err(Error::QpNotConverged { iterations: iter });
            }
            let q = active.len();
            let cols: Vec<&[f64]> = active
                .iter()
                .map(|&i| constraints[i].normal.as_slice())
                .collect();
            let (jmat, rmat) = householder_qr(&cols, dim);
            let dvec: Vec<f64> = jmat.iter().map(|col| dot(col, np)).collect();
            // primal direction: component of n_p orthogonal to the active normals
            let mut z = vec![0.0; dim];
            for c in q..dim {
                for (zr, jr) in z.iter_mut().zip(&jmat[c]) {
                    *zr += dvec[c] * jr;
                }
            }
            let r = back_substitute(&rmat, &dvec[..q]);

            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (idx, (&rj, &uj)) in r.iter().zip(&mult).enumerate() {
                if rj > 0.0 {
                    let t = uj / rj;
                    if t < t1 {
                        t1 = t;
                        drop = Some(idx);
                    }
                }
            }
            let zz = dot(&z, &z);
            let t2 = if zz > 1e-14 * norms[p] * norms[p] {
                -constraints[p].slack(&v) / zz
            } else {
                f64::INFINITY
            };

            if t1.is_infinite() && t2.is_infinite() {
                return Ok(QpOutcome::Infeasible);
            }
            let t = t1.min(t2);
            if t2.is_finite() {
                for (vi, zi) in v.iter_mut().zip(&z) {
                    *vi += t * zi;
                }
            }
            for (u, rj) in mult.iter_mut().zip(&r) {
                *u = (*u - t * rj).max(0.0);
            }
            up += t;
            if t2 <= t1 {
                active.push(p);
                mult.push(up);
                break;
            }
            let l = drop.expect("finite partial step has a blocking constraint");
            active.remove(l);
            mult.remove(l);
        }
    }
}
