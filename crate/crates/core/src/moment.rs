//! Truncated moment sequences, Riesz pairing, moment and localizing matrices.

use faer::Mat;

use crate::error::{Error, Result};
use crate::multiindex::{basis, MultiIndex, MultiIndexBasis};

/// A polynomial stored densely over `basis(n, nominal_degree)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    basis: MultiIndexBasis,
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(n: usize, nominal_degree: u32, coeffs: Vec<f64>) -> Result<Self> {
        let basis = basis(n, nominal_degree);
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: coeffs.len(),
            });
        }
        if let Some((position, &value)) = coeffs.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(Error::NonFinite { position, value });
        }
        Ok(Polynomial { basis, coeffs })
    }

    pub fn zero(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Polynomial {
            basis: basis(n, 0),
            coeffs: vec![c],
        }
    }

    /// Builds `Σ c·x^α` from sparse terms; repeated exponents accumulate.
    pub fn from_terms(n: usize, terms: &[(MultiIndex, f64)]) -> Result<Self> {
        let deg = terms.iter().map(|(a, _)| a.degree()).max().unwrap_or(0);
        let basis = basis(n, deg);
        let mut coeffs = vec![0.0; basis.len()];
        for (alpha, c) in terms {
            coeffs[basis.position_of(alpha)?] += c;
        }
        Ok(Polynomial { basis, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &MultiIndexBasis {
        &self.basis
    }

    /// Coefficient vector over `basis(n, nominal_degree)`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree of the highest nonzero term (zero for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.terms().map(|(a, _)| a.degree()).max().unwrap_or(0)
    }

    /// Nonzero terms in basis order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.basis
            .iter()
            .zip(self.coeffs.iter().copied())
            .filter(|(_, c)| *c != 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms().map(|(a, c)| c * a.eval(x)).sum()
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.dim(), other.dim());
        let n = self.dim();
        let out_basis = basis(n, self.basis.max_degree() + other.basis.max_degree());
        let mut coeffs = vec![0.0; out_basis.len()];
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                coeffs[out_basis.position_of(&a.add(b)).unwrap()] += ca * cb;
            }
        }
        Polynomial {
            basis: out_basis,
            coeffs,
        }
    }
}

/// A truncated moment sequence `s = (s_α)_{|α| ≤ d}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tms {
    basis: MultiIndexBasis,
    values: Vec<f64>,
}

impl Tms {
    pub fn new(n: usize, degree: u32, values: Vec<f64>) -> Result<Self> {
        let basis = basis(n, degree);
        if values.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: values.len(),
            });
        }
        if let Some((position, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { position, value });
        }
        Ok(Tms { basis, values })
    }

    pub fn zeros(n: usize, degree: u32) -> Self {
        let basis = basis(n, degree);
        let values = vec![0.0; basis.len()];
        Tms { basis, values }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn degree(&self) -> u32 {
        self.basis.max_degree()
    }

    pub fn basis(&self) -> &MultiIndexBasis {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, alpha: &MultiIndex) -> Result<f64> {
        Ok(self.values[self.basis.position_of(alpha)?])
    }

    /// `F_s(p) = Σ p_α s_α`.
    pub fn riesz(&self, p: &Polynomial) -> Result<f64> {
        riesz(&self.basis, &self.values, p)
    }

    /// `z|_{d'}`: the prefix of moments with degree at most `degree`.
    pub fn restrict(&self, degree: u32) -> Result<Tms> {
        if degree > self.degree() {
            return Err(Error::InvalidDegree(format!(
                "cannot restrict degree-{} sequence to degree {degree}",
                self.degree()
            )));
        }
        let basis = basis(self.dim(), degree);
        let values = self.values[..basis.len()].to_vec();
        Ok(Tms { basis, values })
    }

    /// `z|_E` for an arbitrary index set within the degree range.
    pub fn restrict_to(&self, index: &MultiIndexBasis) -> Result<Vec<f64>> {
        index.iter().map(|a| self.get(a)).collect()
    }

    /// Pads with zero moments up to `degree`.
    pub fn extend(&self, degree: u32) -> Result<Tms> {
        if degree < self.degree() {
            return Err(Error::InvalidDegree(format!(
                "cannot extend degree-{} sequence to degree {degree}",
                self.degree()
            )));
        }
        let mut out = Tms::zeros(self.dim(), degree);
        out.values[..self.values.len()].copy_from_slice(&self.values);
        Ok(out)
    }
}

/// Riesz pairing of a polynomial with values indexed by `index`.
pub fn riesz(index: &MultiIndexBasis, values: &[f64], p: &Polynomial) -> Result<f64> {
    let mut acc = 0.0;
    for (alpha, c) in p.terms() {
        acc += c * values[index.position_of(alpha)?];
    }
    Ok(acc)
}

/// Moments `s_α = Σ ρ_i u_i^α` of `Σ ρ_i δ(u_i)` for all `|α| ≤ degree`.
pub fn tms_from_measure(atoms: &[Vec<f64>], weights: &[f64], n: usize, degree: u32) -> Tms {
    assert_eq!(atoms.len(), weights.len(), "one weight per atom");
    let mut s = Tms::zeros(n, degree);
    for (u, &rho) in atoms.iter().zip(weights) {
        assert_eq!(u.len(), n, "atom dimension");
        for (v, alpha) in s.values.iter_mut().zip(s.basis.iter()) {
            *v += rho * alpha.eval(u);
        }
    }
    s
}

/// One coefficient of a linear matrix map: cell `(row, col)` (upper
/// triangle, `row ≤ col`) receives `coef · z[var]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapEntry {
    pub row: usize,
    pub col: usize,
    pub var: usize,
    pub coef: f64,
}

/// The linear map `z ↦ L_q^{(k)}(z)` in coefficient form, with `z`
/// indexed by `basis(n, 2k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMatrixMap {
    pub size: usize,
    pub entries: Vec<MapEntry>,
    /// Row/column labels: the monomials `β ∈ N^n_{k'}`.
    pub labels: MultiIndexBasis,
}

impl LinearMatrixMap {
    /// Evaluates the map on a moment vector.
    pub fn apply(&self, z: &[f64]) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.size, self.size);
        for e in &self.entries {
            m[(e.row, e.col)] += e.coef * z[e.var];
        }
        for j in 0..self.size {
            for i in 0..j {
                m[(j, i)] = m[(i, j)];
            }
        }
        m
    }
}

/// Size parameter `k' = k − ⌈deg(q)/2⌉` of the localizing matrix.
pub fn localizing_order(q: &Polynomial, k: u32) -> Result<u32> {
    let half = q.degree().div_ceil(2);
    if q.degree() > 2 * k {
        return Err(Error::InvalidDegree(format!(
            "polynomial degree {} exceeds 2k = {}",
            q.degree(),
            2 * k
        )));
    }
    Ok(k - half)
}

/// Coefficient form of `L_q^{(k)}`: entry `(β, γ)` is `Σ_α q_α z_{α+β+γ}`.
pub fn localizing_map(q: &Polynomial, k: u32) -> Result<LinearMatrixMap> {
    let n = q.dim();
    let order = localizing_order(q, k)?;
    let labels = basis(n, order);
    let vars = basis(n, 2 * k);
    let size = labels.len();
    let mut entries = Vec::new();
    let mut buf = vec![0u32; n];
    for col in 0..size {
        for row in 0..=col {
            let bg = labels.get(row).add(labels.get(col));
            for (alpha, c) in q.terms() {
                for ((b, &x), &y) in buf.iter_mut().zip(alpha.exponents()).zip(bg.exponents()) {
                    *b = x + y;
                }
                entries.push(MapEntry {
                    row,
                    col,
                    var: vars.position_of_exponents(&buf)?,
                    coef: c,
                });
            }
        }
    }
    Ok(LinearMatrixMap {
        size,
        entries,
        labels,
    })
}

/// `L_q^{(k)}(s)`.
pub fn localizing_matrix(s: &Tms, q: &Polynomial, k: u32) -> Result<Mat<f64>> {
    if s.degree() < 2 * k {
        return Err(Error::InvalidDegree(format!(
            "sequence degree {} below 2k = {}",
            s.degree(),
            2 * k
        )));
    }
    if q.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: q.dim(),
        });
    }
    let map = localizing_map(q, k)?;
    Ok(map.apply(s.values()))
}

/// `M_k(s) = (s_{β+γ})_{β,γ ∈ N^n_k}`.
pub fn moment_matrix(s: &Tms, k: u32) -> Result<Mat<f64>> {
    localizing_matrix(s, &Polynomial::constant(s.dim(), 1.0), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::SetK;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    /// Symbolic layout: each cell lists (coefficient, moment exponent) pairs.
    fn symbolic(q: &Polynomial, k: u32) -> Vec<Vec<Vec<(f64, MultiIndex)>>> {
        let map = localizing_map(q, k).unwrap();
        let vars = basis(q.dim(), 2 * k);
        let mut cells = vec![vec![Vec::new(); map.size]; map.size];
        for e in &map.entries {
            cells[e.row][e.col].push((e.coef, vars.get(e.var).clone()));
            if e.row != e.col {
                cells[e.col][e.row].push((e.coef, vars.get(e.var).clone()));
            }
        }
        cells
    }

    #[test]
    fn moment_matrix_layout_n2_k2() {
        let one = Polynomial::constant(2, 1.0);
        let cells = symbolic(&one, 2);
        let labels = [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]];
        assert_eq!(cells.len(), 6);
        for i in 0..6 {
            for j in 0..6 {
                let want = mi(&[labels[i][0] + labels[j][0], labels[i][1] + labels[j][1]]);
                assert_eq!(cells[i][j], vec![(1.0, want)]);
            }
        }
        assert_eq!(cells[3][3], vec![(1.0, mi(&[4, 0]))]);
    }

    #[test]
    fn localizing_layouts_n2_k2() {
        let k = SetK::new(2);
        let cells = symbolic(&k.g(1), 2);
        assert_eq!(cells[0][0], vec![(1.0, mi(&[1, 0]))]);
        assert_eq!(cells[1][2], vec![(1.0, mi(&[2, 1]))]);
        assert_eq!(cells[2][2], vec![(1.0, mi(&[1, 2]))]);
        let cells = symbolic(&k.g(2), 2);
        assert_eq!(cells[0][2], vec![(1.0, mi(&[0, 2]))]);
        assert_eq!(cells[2][2], vec![(1.0, mi(&[0, 3]))]);
        let cells = symbolic(&k.h(), 2);
        let mut top = cells[0][0].clone();
        top.sort_by(|a, b| a.1.cmp(&b.1));
        assert_eq!(
            top,
            vec![(-1.0, mi(&[0, 0])), (1.0, mi(&[2, 0])), (1.0, mi(&[0, 2]))]
        );
        let mut c = cells[1][2].clone();
        c.sort_by(|a, b| a.1.cmp(&b.1));
        assert_eq!(
            c,
            vec![(-1.0, mi(&[1, 1])), (1.0, mi(&[3, 1])), (1.0, mi(&[1, 3]))]
        );
    }

    #[test]
    fn constant_one_gives_moment_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vals: Vec<f64> = (0..basis(3, 4).len()).map(|_| rng.random()).collect();
        let s = Tms::new(3, 4, vals).unwrap();
        let m = moment_matrix(&s, 2).unwrap();
        let l = localizing_matrix(&s, &Polynomial::constant(3, 1.0), 2).unwrap();
        assert_eq!(m, l);
        assert_eq!(m.nrows(), 10);
        assert!(moment_matrix(&s, 3).is_err());
    }

    #[test]
    fn dirac_moments() {
        let s = tms_from_measure(&[vec![1.0, 0.0]], &[1.0], 2, 2);
        assert_eq!(s.values(), &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let u = vec![0.6, 0.8];
        let s = tms_from_measure(&[u.clone()], &[1.0], 2, 4);
        let m = moment_matrix(&s, 2).unwrap();
        let b = basis(2, 2);
        for i in 0..6 {
            for j in 0..6 {
                let want = b.get(i).eval(&u) * b.get(j).eval(&u);
                assert!((m[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn riesz_pairing() {
        let s = tms_from_measure(&[vec![0.3, 0.9, 0.2]], &[2.0], 3, 3);
        let p = Polynomial::from_terms(3, &[(mi(&[1, 1, 0]), 2.0), (mi(&[0, 0, 3]), -1.0)]).unwrap();
        let want = 2.0 * p.eval(&[0.3, 0.9, 0.2]);
        assert!((s.riesz(&p).unwrap() - want).abs() < 1e-14);
        assert_eq!(s.riesz(&Polynomial::zero(3)).unwrap(), 0.0);
        let too_high = Polynomial::from_terms(3, &[(mi(&[4, 0, 0]), 1.0)]).unwrap();
        assert!(s.riesz(&too_high).is_err());
    }

    #[test]
    fn restrict_and_extend() {
        let s = tms_from_measure(&[vec![0.5, 0.5]], &[1.0], 2, 3);
        assert_eq!(s.restrict(3).unwrap(), s);
        let r = s.restrict(1).unwrap();
        assert_eq!(r.values(), &s.values()[..3]);
        let e = r.extend(3).unwrap();
        assert_eq!(e.restrict(1).unwrap(), r);
        assert!(e.values()[3..].iter().all(|&v| v == 0.0));
        assert!(s.restrict(4).is_err());
        assert!(s.extend(2).is_err());
    }

    fn random_atoms_in_k(rng: &mut ChaCha8Rng, n: usize, r: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let atoms = (0..r)
            .map(|_| {
                let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / norm).collect()
            })
            .collect();
        let weights = (0..r).map(|_| 0.5 + rng.random::<f64>()).collect();
        (atoms, weights)
    }

    fn min_eig(m: &Mat<f64>) -> f64 {
        m.self_adjoint_eigenvalues(faer::Side::Lower)
            .unwrap()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    fn norm_inf(m: &Mat<f64>) -> f64 {
        let mut x: f64 = 0.0;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                x = x.max(m[(i, j)].abs());
            }
        }
        x
    }

    #[test]
    fn measures_in_k_satisfy_necessary_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            let set = SetK::new(n);
            for k in 1..=3u32 {
                let (atoms, w) = random_atoms_in_k(&mut rng, n, 3);
                let s = tms_from_measure(&atoms, &w, n, 2 * k);
                let lh = localizing_matrix(&s, &set.h(), k).unwrap();
                assert!(norm_inf(&lh) <= 1e-12);
                for j in 0..=n {
                    let l = localizing_matrix(&s, &set.g(j), k).unwrap();
                    assert!(min_eig(&l) >= -1e-10 * (1.0 + norm_inf(&l)));
                }
            }
        }
    }

    #[test]
    fn moment_rank_bounded_by_atoms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=3 {
            for r in 1..=3 {
                let (atoms, w) = random_atoms_in_k(&mut rng, n, r);
                let s = tms_from_measure(&atoms, &w, n, 4);
                let m = moment_matrix(&s, 2).unwrap();
                let sv = m.singular_values().unwrap();
                let rank = sv.iter().filter(|&&x| x >= 1e-9).count();
                assert_eq!(rank, r);
            }
        }
    }

    #[test]
    fn quadratic_form_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 3;
        let k = 3u32;
        let vals: Vec<f64> = (0..basis(n, 2 * k).len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let s = Tms::new(n, 2 * k, vals).unwrap();
        let set = SetK::new(n);
        let qs = [set.g(0), set.g(2), set.h()];
        for q in &qs {
            let l = localizing_matrix(&s, q, k).unwrap();
            let order = localizing_order(q, k).unwrap();
            let pb = basis(n, order);
            for _ in 0..50 {
                let c: Vec<f64> = (0..pb.len()).map(|_| rng.random::<f64>() - 0.5).collect();
                let p = Polynomial::new(n, order, c.clone()).unwrap();
                let lhs = s.riesz(&q.mul(&p.mul(&p))).unwrap();
                let mut rhs = 0.0;
                for i in 0..pb.len() {
                    for j in 0..pb.len() {
                        rhs += c[i] * l[(i, j)] * c[j];
                    }
                }
                assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
            }
        }
    }
}
