//! Local refinement of a nonnegative decomposition against the tensor entries.
//!
//! Atoms read off a numerically flat moment sequence inherit the accuracy of
//! the SDP solution, which is often around `1e-5`. A few projected
//! Levenberg–Marquardt steps on `min ½‖Σ (v_i)^{⊗m} − A‖²` over `v_i ≥ 0`
//! bring an already close decomposition to machine precision.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::{residual, Decomposition, SymmetricTensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub max_iter: usize,
    /// Stop once the max-norm residual falls below `tol · max(1, ‖A‖_∞)`.
    pub tol: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-14 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub iterations: usize,
    pub residual_before: f64,
    pub residual_after: f64,
}

struct Model<'a> {
    a: &'a SymmetricTensor,
    r: usize,
    n: usize,
}

impl Model<'_> {
    fn eval(&self, v: &[f64]) -> Vec<f64> {
        let idx = self.a.index();
        let mut out: Vec<f64> = self.a.identifying_vector().iter().map(|x| -x).collect();
        for i in 0..self.r {
            let vi = &v[i * self.n..(i + 1) * self.n];
            for (o, alpha) in out.iter_mut().zip(idx.iter()) {
                *o += alpha.eval(vi);
            }
        }
        out
    }

    /// `∂(v_i)^α / ∂v_{ij} = α_j v_i^{α − e_j}`.
    fn jacobian(&self, v: &[f64]) -> Mat<f64> {
        let idx = self.a.index();
        let mut jac = Mat::<f64>::zeros(idx.len(), self.r * self.n);
        for (row, alpha) in idx.iter().enumerate() {
            let e = alpha.exponents();
            for i in 0..self.r {
                let vi = &v[i * self.n..(i + 1) * self.n];
                for j in 0..self.n {
                    if e[j] == 0 {
                        continue;
                    }
                    let mut p = e[j] as f64;
                    for (l, &el) in e.iter().enumerate() {
                        let pw = if l == j { el - 1 } else { el };
                        if pw > 0 {
                            p *= vi[l].powi(pw as i32);
                        }
                    }
                    jac[(row, i * self.n + j)] = p;
                }
            }
        }
        jac
    }
}

fn half_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Refines `dec` towards `a`, keeping every vector entrywise nonnegative.
/// The input is returned unchanged if refinement does not lower the residual.
pub fn refine(a: &SymmetricTensor, dec: &Decomposition, opts: &RefineOptions) -> Result<(Decomposition, RefineReport)> {
    let m = a.order();
    let n = a.dim();
    let before = residual(a, dec)?;
    let mut report = RefineReport { iterations: 0, residual_before: before, residual_after: before };
    if dec.is_empty() {
        return Ok((dec.clone(), report));
    }
    let model = Model { a, r: dec.len(), n };
    let mut v: Vec<f64> = dec.to_rank_one_vectors(m).into_iter().flatten().map(|x| x.max(0.0)).collect();
    let stop = opts.tol * a.max_abs().max(1.0);
    let mut res = model.eval(&v);
    let mut cost = half_sq(&res);
    let mut mu = 1e-3;
    let nv = v.len();
    for iter in 0..opts.max_iter {
        report.iterations = iter;
        if max_abs(&res) <= stop {
            break;
        }
        let jac = model.jacobian(&v);
        let g: Vec<f64> = (0..nv).map(|c| (0..res.len()).map(|r| jac[(r, c)] * res[r]).sum()).collect();
        // variables pinned at zero whose gradient pushes them negative stay put
        let free: Vec<usize> = (0..nv).filter(|&c| v[c] > 0.0 || g[c] < 0.0).collect();
        if free.is_empty() {
            break;
        }
        let jf = Mat::from_fn(jac.nrows(), free.len(), |r, k| jac[(r, free[k])]);
        let jtj = jf.transpose() * &jf;
        let dmax = (0..free.len()).fold(0.0f64, |s, i| s.max(jtj[(i, i)]));
        let mut improved = false;
        while mu < 1e12 {
            let mut lhs = jtj.clone();
            for i in 0..free.len() {
                lhs[(i, i)] += mu * (jtj[(i, i)] + 1e-12 * dmax);
            }
            let Ok(llt) = lhs.llt(Side::Lower) else {
                mu *= 10.0;
                continue;
            };
            let rhs = Mat::from_fn(free.len(), 1, |k, _| -g[free[k]]);
            let step = llt.solve(&rhs);
            let mut trial = v.clone();
            for (k, &c) in free.iter().enumerate() {
                trial[c] = (trial[c] + step[(k, 0)]).max(0.0);
            }
            let tres = model.eval(&trial);
            let tcost = half_sq(&tres);
            if tcost < cost {
                v = trial;
                res = tres;
                cost = tcost;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let vectors: Vec<Vec<f64>> = v.chunks(n).map(|c| c.to_vec()).collect();
    let out = Decomposition::from_rank_one_vectors(m, &vectors)?;
    let after = residual(a, &out)?;
    if after < before {
        report.residual_after = after;
        Ok((out, report))
    } else {
        Ok((dec.clone(), report))
    }
}
