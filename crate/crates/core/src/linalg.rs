//! Small dense helpers on top of faer shared by the solver and the extraction code.

use faer::{Mat, MatRef, Side};

/// `⟨A, B⟩ = trace(AᵀB)`.
pub fn frob_inner(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    debug_assert_eq!(a.nrows(), b.nrows());
    debug_assert_eq!(a.ncols(), b.ncols());
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        let (ca, cb) = (a.col(j), b.col(j));
        for i in 0..a.nrows() {
            acc += ca[i] * cb[i];
        }
    }
    acc
}

pub fn max_abs(a: MatRef<'_, f64>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

pub fn vec_max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(A + Aᵀ)/2`.
pub fn symmetrize(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(a: MatRef<'_, f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut ev = a
        .self_adjoint_eigenvalues(Side::Lower)
        .unwrap_or_else(|_| vec![f64::NAN; a.nrows()]);
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(a: MatRef<'_, f64>) -> f64 {
    sym_eigenvalues(a).first().copied().unwrap_or(f64::INFINITY)
}

/// Symmetric eigendecomposition `A = V diag(w) Vᵀ`, eigenvalues descending.
pub fn sym_eigen_desc(a: MatRef<'_, f64>) -> (Vec<f64>, Mat<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric eigendecomposition failed");
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let w = order.iter().map(|&i| s[i]).collect();
    let v = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    (w, v)
}

/// Projection onto the PSD cone by clipping negative eigenvalues.
pub fn psd_projection(a: MatRef<'_, f64>) -> Mat<f64> {
    let n = a.nrows();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let (w, v) = sym_eigen_desc(a);
    let mut out = Mat::<f64>::zeros(n, n);
    for (k, &lam) in w.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        for j in 0..n {
            let vj = v[(j, k)] * lam;
            for i in 0..n {
                out[(i, j)] += v[(i, k)] * vj;
            }
        }
    }
    symmetrize(&out)
}

/// Singular values in descending order.
pub fn singular_values(a: MatRef<'_, f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv = a.singular_values().expect("singular value decomposition failed");
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Orthonormal basis of the orthogonal complement of `span(cols)` in `R^n`.
/// `cols` is `n × k`; the result is `n × (n − rank)`.
pub fn orthogonal_complement(cols: MatRef<'_, f64>, tol: f64) -> Mat<f64> {
    let n = cols.nrows();
    if cols.ncols() == 0 {
        return Mat::identity(n, n);
    }
    // eigenvectors of the projector C Cᵀ with zero eigenvalue
    let gram = cols * cols.transpose();
    let (w, v) = sym_eigen_desc(gram.as_ref());
    let top = w.first().copied().unwrap_or(0.0).max(1.0);
    let keep: Vec<usize> = (0..n).filter(|&i| w[i] <= tol * top).collect();
    Mat::from_fn(n, keep.len(), |i, j| v[(i, keep[j])])
}
