//! Assembly of the k-th moment relaxation of the E-truncated K-moment problem.
//!
//! Variables are the moments `z_α`, `|α| ≤ 2k`. The program is
//!
//! ```text
//!   minimize   ⟨F, z⟩
//!   subject to z|_E = a / σ
//!              L_h(z) = 0                (one row per distinct entry)
//!              L_{g_j}(z) ⪰ 0            j = 0..n, g_0 = 1, g_j = x_j
//! ```
//!
//! with `σ = max |a_α|`. Since `L_h(z) = 0` forces `M_k(z)·vec(h·x^β) = 0`
//! for `|β| ≤ k − 2` (and the analogue for the localizing blocks), every
//! block is handed to the solver together with a basis of the orthogonal
//! complement of those vectors.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::orthogonal_complement;
use crate::moment::{localizing_map, Polynomial, Tms};
use crate::multiindex::{basis, count_upto, exact_degree_basis, MultiIndexBasis};
use crate::sdp::{ConicProgram, LmiBlock};
use crate::tensor::SetK;

/// Smallest even integer greater than `m`.
pub fn default_degree(m: u32) -> u32 {
    if m % 2 == 0 {
        m + 2
    } else {
        m + 1
    }
}

/// Expands `[x]ᵀ Jᵀ J [x]` over `N^n_d`, where `[x]` is the monomial vector of `N^n_{d/2}`.
pub fn sos_objective_from_factor(n: usize, d: u32, j: &Mat<f64>) -> Result<Polynomial> {
    if d % 2 != 0 {
        return Err(Error::InvalidDegree(format!("objective degree {d} must be even")));
    }
    let half = basis(n, d / 2);
    let s = half.len();
    if j.ncols() != s {
        return Err(Error::DimensionMismatch { expected: s, found: j.ncols() });
    }
    let gram = j.transpose() * j;
    let full = basis(n, d);
    let mut coeffs = vec![0.0; full.len()];
    for (p, bp) in half.iter().enumerate() {
        for (q, bq) in half.iter().enumerate() {
            let pos = full.position_of(&bp.add(bq))?;
            coeffs[pos] += gram[(p, q)];
        }
    }
    Polynomial::new(n, d, coeffs)
}

/// `F = [x]ᵀ Jᵀ J [x]` with `J` square and standard normal, drawn from `seed`.
pub fn generic_sos_objective(n: usize, d: u32, seed: u64) -> Result<Polynomial> {
    if d % 2 != 0 {
        return Err(Error::InvalidDegree(format!("objective degree {d} must be even")));
    }
    let s = count_upto(n, (d / 2) as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut j = Mat::<f64>::zeros(s, s);
    for r in 0..s {
        for c in 0..s {
            j[(r, c)] = StandardNormal.sample(&mut rng);
        }
    }
    sos_objective_from_factor(n, d, &j)
}

/// Parameters of one relaxation level.
#[derive(Debug, Clone)]
pub struct RelaxationSpec {
    pub n: usize,
    pub m: u32,
    pub d: u32,
    pub k: u32,
    pub objective: Polynomial,
    pub seed: u64,
    /// Hand the solver the range bases implied by `L_h(z) = 0`.
    pub face_reduction: bool,
}

impl RelaxationSpec {
    /// Spec with the generic SOS objective drawn from `seed`; `d` defaults to
    /// the smallest even integer above `m`.
    pub fn generic(n: usize, m: u32, d: Option<u32>, k: u32, seed: u64) -> Result<Self> {
        let d = d.unwrap_or_else(|| default_degree(m));
        Self::check(n, m, d, k)?;
        let objective = generic_sos_objective(n, d, seed)?;
        Ok(Self { n, m, d, k, objective, seed, face_reduction: true })
    }

    pub fn with_objective(n: usize, m: u32, d: u32, k: u32, objective: Polynomial) -> Result<Self> {
        Self::check(n, m, d, k)?;
        if objective.dim() != n || objective.degree() > d {
            return Err(Error::InvalidDegree(format!(
                "objective of degree {} in {} variables for d = {d}, n = {n}",
                objective.degree(),
                objective.dim()
            )));
        }
        Ok(Self { n, m, d, k, objective, seed: 0, face_reduction: true })
    }

    /// Same objective and seed at another level.
    pub fn at_level(&self, k: u32) -> Result<Self> {
        Self::check(self.n, self.m, self.d, k)?;
        Ok(Self { k, ..self.clone() })
    }

    fn check(n: usize, m: u32, d: u32, k: u32) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidDegree("dimension must be positive".into()));
        }
        if m == 0 {
            return Err(Error::InvalidDegree("tensor order must be positive".into()));
        }
        if d % 2 != 0 || d <= m {
            return Err(Error::InvalidDegree(format!("d = {d} must be even and greater than m = {m}")));
        }
        if 2 * k < d.max(m) {
            return Err(Error::InvalidDegree(format!("level k = {k} needs 2k >= max(d, m) = {}", d.max(m))));
        }
        Ok(())
    }
}

/// Assembled program together with what is needed to read its solution.
#[derive(Debug, Clone)]
pub struct Relaxation {
    pub program: ConicProgram,
    /// Index of the variables, `N^n_{2k}`.
    pub basis: MultiIndexBasis,
    pub k: u32,
    /// The rescaling `σ`; the program constrains `z|_E = a/σ`.
    pub scale: f64,
    pub e_rows: usize,
    pub h_rows: usize,
}

impl Relaxation {
    /// Wraps a solution vector as a TMS of degree `2k`.
    pub fn moments(&self, z: &[f64]) -> Result<Tms> {
        Tms::new(self.basis.dim(), 2 * self.k, z.to_vec())
    }
}

/// Coefficient vectors over `N^n_size` of `h·x^β` for `|β| ≤ deg`.
fn ideal_vectors(n: usize, size: u32, deg: i64) -> Result<Mat<f64>> {
    let target = basis(n, size);
    if deg < 0 {
        return Ok(Mat::zeros(target.len(), 0));
    }
    let h = SetK::new(n).h();
    let shifts = basis(n, deg as u32);
    let mut out = Mat::<f64>::zeros(target.len(), shifts.len());
    for (col, beta) in shifts.iter().enumerate() {
        for (alpha, c) in h.terms() {
            let pos = target.position_of(&alpha.add(beta))?;
            out[(pos, col)] += c;
        }
    }
    Ok(out)
}

/// Builds the relaxation for the identifying vector `a` (indexed by
/// `exact_degree_basis(n, m)`).
pub fn assemble(a: &[f64], spec: &RelaxationSpec) -> Result<Relaxation> {
    let n = spec.n;
    let k = spec.k;
    let e = exact_degree_basis(n, spec.m);
    if a.len() != e.len() {
        return Err(Error::DimensionMismatch { expected: e.len(), found: a.len() });
    }
    if let Some((i, &v)) = a.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { position: i, value: v });
    }
    let vars = basis(n, 2 * k);
    let amax = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if amax > 0.0 { amax } else { 1.0 };

    let mut objective = vec![0.0; vars.len()];
    for (alpha, c) in spec.objective.terms() {
        objective[vars.position_of(alpha)?] += c;
    }
    let mut prog = ConicProgram::new(vars.len(), objective);

    for (alpha, &val) in e.iter().zip(a) {
        prog.add_equality(vec![(vars.position_of(alpha)?, 1.0)], val / scale);
    }
    // the distinct entries of L_h(z): L_z(h·x^δ) for |δ| ≤ 2k − 2
    let h = SetK::new(n).h();
    let shifts = basis(n, 2 * k - 2);
    for delta in shifts.iter() {
        let terms = h
            .terms()
            .map(|(alpha, c)| Ok((vars.position_of(&alpha.add(delta))?, c)))
            .collect::<Result<Vec<_>>>()?;
        prog.add_equality(terms, 0.0);
    }

    let set = SetK::new(n);
    for j in 0..=n {
        let g = set.g(j);
        let map = localizing_map(&g, k)?;
        let mut block = LmiBlock::new(map.size, map.entries);
        if spec.face_reduction {
            // block index is N_size; h·x^β fits for |β| ≤ size − 2
            let size = if j == 0 { k } else { k - 1 };
            let null = ideal_vectors(n, size, size as i64 - 2)?;
            if null.ncols() > 0 {
                block.range_basis = Some(orthogonal_complement(null.as_ref(), 1e-10));
            }
        }
        prog.add_block(block);
    }

    Ok(Relaxation {
        program: prog,
        basis: vars,
        k,
        scale,
        e_rows: e.len(),
        h_rows: shifts.len(),
    })
}

/// Index of the identifying vector, for callers holding only `n, m`.
pub fn e_index(n: usize, m: u32) -> MultiIndexBasis {
    exact_degree_basis(n, m)
}
