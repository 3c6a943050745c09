//! Flatness detection and recovery of atomic measures from flat truncated
//! moment sequences (multiplication-matrix method).

use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{max_abs, min_eigenvalue, singular_values, sym_eigen_desc};
use crate::moment::{localizing_matrix, moment_matrix, Tms};
use crate::multiindex::{basis, MultiIndex, MultiIndexBasis};
use crate::tensor::SetK;

/// How singular values are compared against the rank threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RankMode {
    /// `σ_i ≥ threshold`.
    #[default]
    Absolute,
    /// `σ_i ≥ threshold · σ_1`.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTolerance {
    pub threshold: f64,
    pub mode: RankMode,
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self { threshold: 1e-6, mode: RankMode::Absolute }
    }
}

/// Number of singular values at or above the threshold, with the spectrum.
pub fn numeric_rank(m: &Mat<f64>, tol: RankTolerance) -> (usize, Vec<f64>) {
    let sv = singular_values(m.as_ref());
    let cut = match tol.mode {
        RankMode::Absolute => tol.threshold,
        RankMode::Relative => tol.threshold * sv.first().copied().unwrap_or(0.0),
    };
    let rank = sv.iter().filter(|&&s| s >= cut && s > 0.0).count();
    (rank, sv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub t: u32,
    /// `rank M_{t−1}(w)`.
    pub rank_lo: usize,
    /// `rank M_t(w)`.
    pub rank_hi: usize,
    pub singular_lo: Vec<f64>,
    pub singular_hi: Vec<f64>,
    /// `‖L_h^{(t)}(w)‖_∞`.
    #[serde(with = "crate::serde_float")]
    pub h_residual: f64,
    /// Smallest eigenvalue over `L_{g_j}^{(t)}(w)`, `j = 0..n`.
    #[serde(with = "crate::serde_float")]
    pub min_localizing_eigenvalue: f64,
    pub is_flat: bool,
    pub rank_tol: RankTolerance,
    pub tol_feas: f64,
}

/// Evaluates the rank condition and the necessary conditions
/// `L_h(w) = 0`, `L_{g_j}(w) ⪰ 0` at truncation `t`.
pub fn check_flat(w: &Tms, t: u32, rank_tol: RankTolerance, tol_feas: f64) -> FlatnessReport {
    let fail = |h_residual: f64| FlatnessReport {
        t,
        rank_lo: 0,
        rank_hi: 0,
        singular_lo: Vec::new(),
        singular_hi: Vec::new(),
        h_residual,
        min_localizing_eigenvalue: f64::NEG_INFINITY,
        is_flat: false,
        rank_tol,
        tol_feas,
    };
    if t == 0 || w.degree() < 2 * t {
        return fail(f64::INFINITY);
    }
    let Ok(w) = w.restrict(2 * t) else { return fail(f64::INFINITY) };
    let n = w.dim();
    let set = SetK::new(n);
    let (Ok(mt), Ok(lo)) = (moment_matrix(&w, t), w.restrict(2 * t - 2).and_then(|s| moment_matrix(&s, t - 1))) else {
        return fail(f64::INFINITY);
    };
    let h_residual = localizing_matrix(&w, &set.h(), t).map(|m| max_abs(m.as_ref())).unwrap_or(f64::INFINITY);
    let mut min_eig = min_eigenvalue(mt.as_ref());
    for j in 1..=n {
        if let Ok(l) = localizing_matrix(&w, &set.g(j), t) {
            min_eig = min_eig.min(min_eigenvalue(l.as_ref()));
        }
    }
    let (rank_lo, singular_lo) = numeric_rank(&lo, rank_tol);
    let (rank_hi, singular_hi) = numeric_rank(&mt, rank_tol);
    let is_flat = rank_lo == rank_hi && rank_hi > 0 && h_residual <= tol_feas && min_eig >= -tol_feas;
    FlatnessReport {
        t,
        rank_lo,
        rank_hi,
        singular_lo,
        singular_hi,
        h_residual,
        min_localizing_eigenvalue: min_eig,
        is_flat,
        rank_tol,
        tol_feas,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub seed: u64,
    /// Nonnegativity and sphere tolerance for atoms (`tol_K`).
    pub tol_k: f64,
    /// Smallest acceptable relative pivot in the basis selection.
    pub pivot_tol: f64,
    /// Atoms with `ρ_i ≤ rho_min_rel · max ρ` are dropped.
    pub rho_min_rel: f64,
    pub max_redraws: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { seed: 0, tol_k: 1e-6, pivot_tol: 1e-8, rho_min_rel: 1e-8, max_redraws: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum ExtractionError {
    #[error("requested rank {0} is not usable")]
    BadRank(usize),
    #[error("moment matrix has only {found} positive eigenvalues, rank {rank} requested")]
    Spectrum { found: usize, rank: usize },
    #[error("basis selection degenerate: relative pivot {pivot:.3e} below tolerance")]
    Echelon { pivot: f64 },
    #[error("multiplication matrix has complex or repeated eigenvalues after {redraws} redraws")]
    Eigenvalues { redraws: usize },
    #[error("atom {index} has coordinate {min_coordinate:.3e} and squared norm {norm2:.6}, outside K")]
    OutsideK { index: usize, min_coordinate: f64, norm2: f64 },
    #[error("all atoms vanished during weight fitting")]
    NoAtoms,
}

/// `μ = Σ ρ_i δ(u_i)` as recovered by [`extract_atoms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// `rank M_t(w)` used for the extraction, before any atom was dropped.
    pub rank: usize,
    /// Basis monomials selected for the multiplication matrices.
    pub basis_monomials: Vec<Vec<u32>>,
    pub redraws: usize,
    pub dropped: usize,
    /// `‖Σ ρ_i [u_i]_{2t} − w‖_∞`.
    pub fit_residual: f64,
}

impl AtomicMeasure {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Rows of `v` (basis order) with residual norms picked greedily by size
/// among the allowed rows; returns the selected row indices sorted.
fn select_pivots(v: &Mat<f64>, allowed: &[usize], r: usize, tol: f64) -> Result<Vec<usize>, ExtractionError> {
    let cols = v.ncols();
    let mut resid: Vec<Vec<f64>> = allowed.iter().map(|&i| (0..cols).map(|c| v[(i, c)]).collect()).collect();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = resid.iter().map(|x| norm(x)).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(ExtractionError::Echelon { pivot: 0.0 });
    }
    let mut chosen = Vec::with_capacity(r);
    let mut used = vec![false; allowed.len()];
    for _ in 0..r {
        let mut best = None;
        let mut best_norm = -1.0;
        for (k, x) in resid.iter().enumerate() {
            if used[k] {
                continue;
            }
            let nx = norm(x);
            if nx > best_norm * (1.0 + 1e-12) {
                best_norm = nx;
                best = Some(k);
            }
        }
        let Some(k) = best else {
            return Err(ExtractionError::Echelon { pivot: 0.0 });
        };
        if best_norm < tol * scale {
            return Err(ExtractionError::Echelon { pivot: best_norm / scale });
        }
        used[k] = true;
        chosen.push(allowed[k]);
        let q: Vec<f64> = resid[k].iter().map(|a| a / best_norm).collect();
        for (kk, x) in resid.iter_mut().enumerate() {
            if used[kk] {
                continue;
            }
            // two passes keep the projection accurate
            for _ in 0..2 {
                let d: f64 = x.iter().zip(&q).map(|(a, b)| a * b).sum();
                for (a, b) in x.iter_mut().zip(&q) {
                    *a -= d * b;
                }
            }
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Modified Gram–Schmidt on the columns of `x`.
fn orthonormal_columns(x: &Mat<f64>) -> Mat<f64> {
    let (n, r) = (x.nrows(), x.ncols());
    let mut q = x.clone();
    for j in 0..r {
        for _ in 0..2 {
            for p in 0..j {
                let d: f64 = (0..n).map(|i| q[(i, p)] * q[(i, j)]).sum();
                for i in 0..n {
                    q[(i, j)] -= d * q[(i, p)];
                }
            }
        }
        let nrm = (0..n).map(|i| q[(i, j)] * q[(i, j)]).sum::<f64>().sqrt();
        for i in 0..n {
            q[(i, j)] /= nrm;
        }
    }
    q
}

/// Eigenvectors of `n` as a real matrix when all eigenvalues are real and
/// pairwise separated; `None` otherwise.
fn real_eigenvectors(n: &Mat<f64>) -> Option<Mat<f64>> {
    let r = n.nrows();
    let evd = n.eigen().ok()?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let vals: Vec<f64> = (0..r).map(|i| s[i].re).collect();
    let spread = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for i in 0..r {
        if s[i].im.abs() > 1e-8 * (1.0 + spread) {
            return None;
        }
        for j in 0..i {
            if (vals[i] - vals[j]).abs() < 1e-6 * spread {
                return None;
            }
        }
    }
    let mut x = Mat::<f64>::zeros(r, r);
    for j in 0..r {
        // rotate the column to be real: divide by the phase of its largest entry
        let mut big = 0;
        for i in 0..r {
            if u[(i, j)].norm() > u[(big, j)].norm() {
                big = i;
            }
        }
        let p = u[(big, j)];
        let phase = p / p.norm();
        for i in 0..r {
            x[(i, j)] = (u[(i, j)] / phase).re;
        }
    }
    Some(x)
}

/// Monomial vector `[u]` over `index`.
pub fn monomial_vector(index: &MultiIndexBasis, u: &[f64]) -> Vec<f64> {
    index.iter().map(|a| a.eval(u)).collect()
}

/// Lawson–Hanson nonnegative least squares `min ‖Ax − b‖₂, x ≥ 0`.
pub fn nnls(a: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut x = vec![0.0; n];
    if n == 0 {
        return x;
    }
    let anorm = max_abs(a.as_ref()).max(1e-300);
    let tol = 10.0 * f64::EPSILON * anorm * (m.max(n) as f64) * (1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs())));
    let mut passive = vec![false; n];
    let grad = |x: &[f64]| -> Vec<f64> {
        let mut r = b.to_vec();
        for j in 0..n {
            if x[j] != 0.0 {
                for i in 0..m {
                    r[i] -= a[(i, j)] * x[j];
                }
            }
        }
        (0..n).map(|j| (0..m).map(|i| a[(i, j)] * r[i]).sum()).collect()
    };
    let solve_passive = |passive: &[bool]| -> Vec<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = Mat::from_fn(m, idx.len(), |i, k| a[(i, idx[k])]);
        let rhs = Mat::from_fn(m, 1, |i, _| b[i]);
        let sol = sub.col_piv_qr().solve_lstsq(&rhs);
        let mut z = vec![0.0; n];
        for (k, &j) in idx.iter().enumerate() {
            z[j] = sol[(k, 0)];
        }
        z
    };
    for _ in 0..(3 * n + 10) {
        let w = grad(&x);
        let pick = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = pick else { break };
        passive[j] = true;
        loop {
            let z = solve_passive(&passive);
            if (0..n).all(|j| !passive[j] || z[j] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in 0..n {
                if passive[j] && z[j] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[j]));
                }
            }
            for j in 0..n {
                x[j] += alpha * (z[j] - x[j]);
                if passive[j] && x[j] <= tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Nonnegative weights `ρ` with `Σ ρ_i [u_i]_index ≈ target`; returns the
/// weights and the max-norm residual.
pub fn fit_weights(atoms: &[Vec<f64>], target: &[f64], index: &MultiIndexBasis) -> (Vec<f64>, f64) {
    let a = Mat::from_fn(index.len(), atoms.len(), |i, j| index.get(i).eval(&atoms[j]));
    let rho = nnls(&a, target);
    let mut res: f64 = 0.0;
    for i in 0..index.len() {
        let fit: f64 = (0..atoms.len()).map(|j| a[(i, j)] * rho[j]).sum();
        res = res.max((fit - target[i]).abs());
    }
    (rho, res)
}

/// Recovers an `r`-atomic measure from a flat `w` of degree `≥ 2t`.
pub fn extract_atoms(w: &Tms, t: u32, r: usize, opts: &ExtractOptions) -> Result<AtomicMeasure, ExtractionError> {
    let n = w.dim();
    if r == 0 || t == 0 || w.degree() < 2 * t {
        return Err(ExtractionError::BadRank(r));
    }
    let w = w.restrict(2 * t).map_err(|_| ExtractionError::BadRank(r))?;
    let mt = moment_matrix(&w, t).map_err(|_| ExtractionError::BadRank(r))?;
    let rows_t = basis(n, t);
    if r > rows_t.len() {
        return Err(ExtractionError::BadRank(r));
    }

    // (1) M_t ≈ V Vᵀ
    let (ev, evec) = sym_eigen_desc(mt.as_ref());
    let positive = ev.iter().filter(|&&l| l > 0.0).count();
    if positive < r {
        return Err(ExtractionError::Spectrum { found: positive, rank: r });
    }
    let v = Mat::from_fn(rows_t.len(), r, |i, j| evec[(i, j)] * ev[j].sqrt());

    // (2) r basis monomials of degree ≤ t − 1 and U = V V[piv]⁻¹
    let allowed: Vec<usize> = (0..rows_t.len()).filter(|&i| rows_t.get(i).degree() < t).collect();
    let piv = select_pivots(&v, &allowed, r, opts.pivot_tol)?;
    let vp = Mat::from_fn(r, r, |i, j| v[(piv[i], j)]);
    // U = V vp⁻¹, solved as vpᵀ Uᵀ = Vᵀ
    let ut = vp.transpose().to_owned().partial_piv_lu().solve(v.transpose());
    let u = ut.transpose().to_owned();

    // (3) multiplication matrices on the selected basis
    let mults: Vec<Mat<f64>> = (0..n)
        .map(|i| {
            let e = MultiIndex::unit(n, i);
            Mat::from_fn(r, r, |j, c| {
                let pos = rows_t.position_of(&rows_t.get(piv[j]).add(&e)).expect("degree ≤ t");
                u[(pos, c)]
            })
        })
        .collect();

    // (4) random combination, Schur vectors, coordinates
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut redraws = 0;
    let q = loop {
        let mut lam: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nrm = lam.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut lam {
            *x /= nrm;
        }
        let mut comb = Mat::<f64>::zeros(r, r);
        for (l, m) in lam.iter().zip(&mults) {
            for j in 0..r {
                for i in 0..r {
                    comb[(i, j)] += l * m[(i, j)];
                }
            }
        }
        if let Some(x) = real_eigenvectors(&comb) {
            break orthonormal_columns(&x);
        }
        if redraws >= opts.max_redraws {
            return Err(ExtractionError::Eigenvalues { redraws });
        }
        redraws += 1;
    };
    let mut atoms: Vec<Vec<f64>> = (0..r)
        .map(|l| {
            (0..n)
                .map(|i| {
                    let m = &mults[i];
                    let mut acc = 0.0;
                    for c in 0..r {
                        let mut row = 0.0;
                        for a in 0..r {
                            row += m[(a, c)] * q[(a, l)];
                        }
                        acc += row * q[(c, l)];
                    }
                    acc
                })
                .collect()
        })
        .collect();

    // (5), (6) weights, cleanup against K, refit
    let index = w.basis().clone();
    for (i, atom) in atoms.iter_mut().enumerate() {
        let min = atom.iter().copied().fold(f64::INFINITY, f64::min);
        let norm2: f64 = atom.iter().map(|x| x * x).sum();
        if min < -opts.tol_k || (norm2 - 1.0).abs() > opts.tol_k.sqrt() {
            return Err(ExtractionError::OutsideK { index: i, min_coordinate: min, norm2 });
        }
        for x in atom.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let nrm = atom.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in atom.iter_mut() {
            *x /= nrm;
        }
    }
    let (rho, _) = fit_weights(&atoms, w.values(), &index);
    let rmax = rho.iter().copied().fold(0.0f64, f64::max);
    if rmax <= 0.0 {
        return Err(ExtractionError::NoAtoms);
    }
    let keep: Vec<usize> = (0..atoms.len()).filter(|&i| rho[i] > opts.rho_min_rel * rmax).collect();
    let dropped = atoms.len() - keep.len();
    let atoms: Vec<Vec<f64>> = keep.iter().map(|&i| atoms[i].clone()).collect();
    let (weights, fit_residual) = fit_weights(&atoms, w.values(), &index);
    Ok(AtomicMeasure {
        atoms,
        weights,
        rank: r,
        basis_monomials: piv.iter().map(|&i| rows_t.get(i).exponents().to_vec()).collect(),
        redraws,
        dropped,
        fit_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::moment::tms_from_measure;
    use crate::multiindex::exact_degree_basis;
    use crate::tensor::{residual, Decomposition, SymmetricTensor, WeightedAtom};
    use proptest::prelude::*;
    use rand::Rng;

    fn printed_tol() -> RankTolerance {
        RankTolerance { threshold: 1e-3, mode: RankMode::Absolute }
    }

    fn worked_extension() -> Tms {
        let ext = fixtures::load("sec2").unwrap().extension.unwrap();
        Tms::new(3, ext.degree, ext.values).unwrap()
    }

    fn random_unit_nonneg(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / s).collect()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let one = |p: &[Vec<f64>], q: &[Vec<f64>]| {
            p.iter().map(|x| q.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
        };
        one(a, b).max(one(b, a))
    }

    #[test]
    fn numeric_rank_basics() {
        assert_eq!(numeric_rank(&Mat::zeros(4, 4), RankTolerance::default()).0, 0);
        let u = [0.6, 0.0, 0.8];
        let v = monomial_vector(&basis(3, 2), &u);
        let m = Mat::from_fn(v.len(), v.len(), |i, j| v[i] * v[j]);
        let (r, sv) = numeric_rank(&m, RankTolerance::default());
        assert_eq!(r, 1);
        assert_eq!(sv.len(), 10);
    }

    #[test]
    fn worked_extension_has_rank_three_and_is_flat() {
        let w = worked_extension();
        let rep = check_flat(&w, 2, printed_tol(), 1e-3);
        assert_eq!((rep.rank_lo, rep.rank_hi), (3, 3));
        assert!(rep.h_residual <= 1e-3);
        assert!(rep.is_flat);
    }

    #[test]
    fn two_atom_measure_is_flat_and_perturbation_breaks_it() {
        let atoms = vec![vec![1.0, 0.0], vec![0.6, 0.8]];
        let w = tms_from_measure(&atoms, &[1.0, 2.0], 2, 4);
        let rep = check_flat(&w, 2, RankTolerance::default(), 1e-9);
        assert_eq!((rep.rank_lo, rep.rank_hi), (2, 2));
        assert!(rep.is_flat);

        let mut vals = w.values().to_vec();
        let pos = w.basis().position_of_exponents(&[2, 2]).unwrap();
        vals[pos] += 0.1;
        let bad = Tms::new(2, 4, vals).unwrap();
        let rep = check_flat(&bad, 2, RankTolerance::default(), 1e-9);
        assert!(rep.rank_hi > rep.rank_lo);
        assert!(!rep.is_flat);
    }

    #[test]
    fn flatness_needs_degree_two_t() {
        let w = tms_from_measure(&[vec![1.0, 0.0]], &[1.0], 2, 2);
        assert!(!check_flat(&w, 2, RankTolerance::default(), 1e-9).is_flat);
        assert!(!check_flat(&w, 0, RankTolerance::default(), 1e-9).is_flat);
    }

    #[test]
    fn dirac_at_e1() {
        let w = tms_from_measure(&[vec![1.0, 0.0, 0.0]], &[1.0], 3, 2);
        let mu = extract_atoms(&w, 1, 1, &ExtractOptions::default()).unwrap();
        assert_eq!(mu.len(), 1);
        assert!(dist(&mu.atoms[0], &[1.0, 0.0, 0.0]) <= 1e-12);
        assert!((mu.weights[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn worked_extension_yields_three_atoms_reconstructing_the_tensor() {
        let w = worked_extension();
        let opts = ExtractOptions { tol_k: 1e-3, ..ExtractOptions::default() };
        let mu = extract_atoms(&w, 2, 3, &opts).unwrap();
        assert_eq!(mu.len(), 3);
        assert_eq!(mu.rank, 3);
        let a = SymmetricTensor::from_identifying_vector(3, 3, vec![2.0, 1.0, 1.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 1.0]).unwrap();
        let dec = Decomposition::new(
            mu.atoms.iter().zip(&mu.weights).map(|(u, &w)| WeightedAtom { weight: w, atom: u.clone() }).collect(),
        );
        assert!(residual(&a, &dec).unwrap() <= 1e-4);
        let (_, res) = fit_weights(&mu.atoms, a.identifying_vector(), &exact_degree_basis(3, 3));
        assert!(res <= 1e-4);
    }

    #[test]
    fn four_random_atoms_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let atoms: Vec<Vec<f64>> = (0..4).map(|_| random_unit_nonneg(&mut rng, 3)).collect();
        let weights = [0.5, 1.0, 1.5, 2.0];
        let w = tms_from_measure(&atoms, &weights, 3, 4);
        let mu = extract_atoms(&w, 2, 4, &ExtractOptions::default()).unwrap();
        assert!(hausdorff(&mu.atoms, &atoms) <= 1e-6);
    }

    #[test]
    fn rank_above_basis_size_is_rejected() {
        let w = tms_from_measure(&[vec![1.0, 0.0]], &[1.0], 2, 2);
        assert!(matches!(extract_atoms(&w, 1, 5, &ExtractOptions::default()), Err(ExtractionError::BadRank(5))));
        assert!(matches!(extract_atoms(&w, 1, 0, &ExtractOptions::default()), Err(ExtractionError::BadRank(0))));
    }

    #[test]
    fn atoms_outside_k_are_reported() {
        // a measure on points with a negative coordinate passes the rank test
        // but must not come back as a valid K-measure
        let atoms = vec![vec![0.6, -0.8], vec![0.0, 1.0]];
        let w = tms_from_measure(&atoms, &[1.0, 1.0], 2, 4);
        let err = extract_atoms(&w, 2, 2, &ExtractOptions::default()).unwrap_err();
        assert!(matches!(err, ExtractionError::OutsideK { .. }), "{err:?}");
    }

    #[test]
    fn fit_weights_on_unit_atoms() {
        let e = exact_degree_basis(2, 3);
        let target: Vec<f64> = e
            .iter()
            .map(|a| a.eval(&[1.0, 0.0]) + 2.0 * a.eval(&[0.0, 1.0]))
            .collect();
        let (rho, res) = fit_weights(&[vec![1.0, 0.0], vec![0.0, 1.0]], &target, &e);
        assert!((rho[0] - 1.0).abs() <= 1e-12 && (rho[1] - 2.0).abs() <= 1e-12);
        assert!(res <= 1e-12);
    }

    #[test]
    fn fit_weights_random_three_atoms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let atoms: Vec<Vec<f64>> = (0..3).map(|_| random_unit_nonneg(&mut rng, 3)).collect();
        let truth = [0.7, 1.3, 2.9];
        let e = exact_degree_basis(3, 3);
        let target: Vec<f64> = e.iter().map(|a| atoms.iter().zip(&truth).map(|(u, w)| w * a.eval(u)).sum()).collect();
        let (rho, _) = fit_weights(&atoms, &target, &e);
        for (x, y) in rho.iter().zip(&truth) {
            assert!((x - y).abs() <= 1e-10, "{rho:?}");
        }
    }

    #[test]
    fn nnls_clamps_negative_solution() {
        // unconstrained solution is (2, -1); NNLS drops the second column
        let a = Mat::from_fn(3, 2, |i, j| [[1.0, 1.0], [1.0, 2.0], [1.0, 3.0]][i][j]);
        let b = [1.0, 0.0, -1.0];
        let x = nnls(&a, &b);
        assert!(x[0].abs() <= 1e-12 && x[1] == 0.0, "{x:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn numeric_rank_is_monotone_in_threshold(
            vals in proptest::collection::vec(-2.0f64..2.0, 16),
            t1 in 1e-8f64..1.0,
            t2 in 1e-8f64..1.0,
        ) {
            let m = Mat::from_fn(4, 4, |i, j| vals[4 * i + j]);
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let r_lo = numeric_rank(&m, RankTolerance { threshold: lo, mode: RankMode::Absolute }).0;
            let r_hi = numeric_rank(&m, RankTolerance { threshold: hi, mode: RankMode::Absolute }).0;
            prop_assert!(r_hi <= r_lo);
        }

        #[test]
        fn extraction_round_trip(seed in 0u64..10_000, n in 2usize..5, r in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut atoms: Vec<Vec<f64>> = Vec::new();
            while atoms.len() < r {
                let u = random_unit_nonneg(&mut rng, n);
                if atoms.iter().all(|a| dist(a, &u) > 0.2) {
                    atoms.push(u);
                }
            }
            let weights: Vec<f64> = (0..r).map(|_| rng.random_range(0.5..2.0)).collect();
            let t = (1..).find(|&t| crate::multiindex::count_upto(n, t - 1) >= r).unwrap() as u32;
            let w = tms_from_measure(&atoms, &weights, n, 2 * t);
            let rep = check_flat(&w, t, RankTolerance::default(), 1e-9);
            prop_assert!(rep.is_flat, "{rep:?}");
            let mu = extract_atoms(&w, t, rep.rank_hi, &ExtractOptions { seed, ..ExtractOptions::default() }).unwrap();
            prop_assert_eq!(mu.rank, r);
            prop_assert!(hausdorff(&mu.atoms, &atoms) <= 1e-6);
            for (u, &rho) in atoms.iter().zip(&weights) {
                let j = (0..mu.len()).min_by(|&i, &j| dist(&mu.atoms[i], u).total_cmp(&dist(&mu.atoms[j], u))).unwrap();
                prop_assert!((mu.weights[j] - rho).abs() <= 1e-6 * rho);
            }
        }
    }
}
