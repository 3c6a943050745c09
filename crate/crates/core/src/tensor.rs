//! Symmetric tensors stored by their identifying vector.
//!
//! An order-`m`, dimension-`n` symmetric tensor is determined by its entries
//! with sorted indices `i_1 ≤ ⋯ ≤ i_m`. Each such entry is keyed by the
//! exponent `α = e_{i_1} + ⋯ + e_{i_m}` and stored in the graded-lex order of
//! [`exact_degree_basis`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment::Polynomial;
use crate::multiindex::{basis, exact_degree_basis, MultiIndex, MultiIndexBasis};

/// Tolerance for treating duplicate entries as equal and entries as nonnegative.
pub const ENTRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricTensor {
    order: usize,
    index: MultiIndexBasis,
    values: Vec<f64>,
}

impl SymmetricTensor {
    pub fn zeros(order: usize, dim: usize) -> Self {
        assert!(order >= 1 && dim >= 1, "order and dimension must be positive");
        let index = exact_degree_basis(dim, order as u32);
        let values = vec![0.0; index.len()];
        SymmetricTensor {
            order,
            index,
            values,
        }
    }

    /// Builds a tensor from its identifying vector, in the order of
    /// `exact_degree_basis(dim, order)`.
    pub fn from_identifying_vector(order: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        let mut t = Self::zeros(order, dim);
        if values.len() != t.values.len() {
            return Err(Error::DimensionMismatch {
                expected: t.values.len(),
                found: values.len(),
            });
        }
        if let Some((position, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { position, value });
        }
        t.values = values;
        Ok(t)
    }

    /// Builds a tensor from `(one-based tuple, value)` pairs. Entries that
    /// are permutations of one another must agree to within [`ENTRY_TOL`];
    /// unspecified entries are zero.
    pub fn from_entries(order: usize, dim: usize, entries: &[(Vec<usize>, f64)]) -> Result<Self> {
        let mut t = Self::zeros(order, dim);
        let mut seen = vec![false; t.values.len()];
        for (tuple, value) in entries {
            if tuple.len() != order {
                return Err(Error::WrongTupleLength {
                    tuple: tuple.clone(),
                    order,
                    found: tuple.len(),
                });
            }
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    position: 0,
                    value: *value,
                });
            }
            let alpha = MultiIndex::from_tuple(tuple, dim)?;
            let pos = t.index.position_of(&alpha)?;
            if seen[pos] {
                let existing = t.values[pos];
                if (existing - value).abs() > ENTRY_TOL {
                    return Err(Error::ConflictingEntry {
                        tuple: tuple.clone(),
                        existing,
                        value: *value,
                    });
                }
            } else {
                seen[pos] = true;
                t.values[pos] = *value;
            }
        }
        Ok(t)
    }

    /// `Σ_k (v_k)^{⊗m}`.
    pub fn from_rank_one_sum(order: usize, dim: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        let mut t = Self::zeros(order, dim);
        for v in vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            t.add_rank_one(1.0, v);
        }
        Ok(t)
    }

    fn add_rank_one(&mut self, weight: f64, v: &[f64]) {
        for (val, alpha) in self.values.iter_mut().zip(self.index.iter()) {
            *val += weight * alpha.eval(v);
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    /// The index set `E`.
    pub fn index(&self) -> &MultiIndexBasis {
        &self.index
    }

    pub fn identifying_vector(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, alpha: &MultiIndex) -> Result<f64> {
        Ok(self.values[self.index.position_of(alpha)?])
    }

    /// Entry `A_{i_1..i_m}` for a one-based tuple.
    pub fn entry(&self, tuple: &[usize]) -> Result<f64> {
        if tuple.len() != self.order {
            return Err(Error::WrongTupleLength {
                tuple: tuple.to_vec(),
                order: self.order,
                found: tuple.len(),
            });
        }
        self.get(&MultiIndex::from_tuple(tuple, self.dim())?)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest entry and its exponent class.
    pub fn min_entry(&self) -> (MultiIndex, f64) {
        let (pos, &v) = self
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("identifying vector is never empty");
        (self.index.get(pos).clone(), v)
    }

    pub fn entrywise_nonnegative(&self) -> bool {
        self.min_entry().1 >= -ENTRY_TOL
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut t = self.clone();
        t.values.iter_mut().for_each(|v| *v *= factor);
        t
    }

    /// The full all-tuples inner product, folded onto `E` with multinomial weights.
    pub fn inner_product(&self, other: &SymmetricTensor) -> Result<f64> {
        if self.order != other.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                found: other.order,
            });
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .index
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(alpha, (a, b))| alpha.permutation_count() as f64 * a * b)
            .sum())
    }

    /// `max_α |A_α − B_α|`.
    pub fn max_abs_diff(&self, other: &SymmetricTensor) -> Result<f64> {
        if self.values.len() != other.values.len() || self.order != other.order {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// One term `ρ·u^{⊗m}` of a nonnegative decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedAtom {
    pub weight: f64,
    pub atom: Vec<f64>,
}

/// `A = Σ ρ_i (u_i)^{⊗m}` with `ρ_i > 0` and unit nonnegative `u_i`.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Decomposition {
    pub terms: Vec<WeightedAtom>,
}

impl Decomposition {
    pub fn new(terms: Vec<WeightedAtom>) -> Self {
        Decomposition { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.weight).collect()
    }

    pub fn atoms(&self) -> Vec<Vec<f64>> {
        self.terms.iter().map(|t| t.atom.clone()).collect()
    }

    /// Checks positivity of weights and membership of every atom in `K`.
    /// Returns the worst violation found.
    pub fn k_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for t in &self.terms {
            if !(t.weight > 0.0) {
                worst = worst.max(t.weight.abs().max(1.0));
            }
            let norm2: f64 = t.atom.iter().map(|x| x * x).sum();
            worst = worst.max((norm2 - 1.0).abs());
            for &x in &t.atom {
                worst = worst.max(-x);
            }
        }
        worst
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.terms.iter().all(|t| t.weight > 0.0) && self.k_violation() <= tol
    }

    /// `Σ ρ_i (u_i)^{⊗m}`.
    pub fn reconstruct(&self, order: usize, dim: usize) -> Result<SymmetricTensor> {
        let mut t = SymmetricTensor::zeros(order, dim);
        for term in &self.terms {
            if term.atom.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: term.atom.len(),
                });
            }
            t.add_rank_one(term.weight, &term.atom);
        }
        Ok(t)
    }

    /// Rescaled vectors `v_i = ρ_i^{1/m} u_i`, so that `A = Σ v_i^{⊗m}`.
    pub fn to_rank_one_vectors(&self, order: usize) -> Vec<Vec<f64>> {
        self.terms
            .iter()
            .map(|t| {
                let s = t.weight.powf(1.0 / order as f64);
                t.atom.iter().map(|x| s * x).collect()
            })
            .collect()
    }

    /// Splits nonnegative vectors into weight and unit atom:
    /// `ρ = ‖v‖^m`, `u = v/‖v‖`. Zero vectors are dropped.
    pub fn from_rank_one_vectors(order: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        let mut terms = Vec::with_capacity(vectors.len());
        for (index, v) in vectors.iter().enumerate() {
            if let Some(&value) = v.iter().find(|&&x| x < -ENTRY_TOL) {
                return Err(Error::NegativeEntry { index, value });
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            terms.push(WeightedAtom {
                weight: norm.powi(order as i32),
                atom: v.iter().map(|x| x.max(0.0) / norm).collect(),
            });
        }
        Ok(Decomposition { terms })
    }
}

/// `max_α |A_α − reconstruct(dec)_α|`.
pub fn residual(tensor: &SymmetricTensor, dec: &Decomposition) -> Result<f64> {
    let rec = dec.reconstruct(tensor.order(), tensor.dim())?;
    tensor.max_abs_diff(&rec)
}

/// The semialgebraic set `K = {x : xᵀx = 1, x ≥ 0}` as `h(x) = 0`, `g_j(x) ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SetK {
    pub dim: usize,
}

impl SetK {
    pub fn new(dim: usize) -> Self {
        SetK { dim }
    }

    /// `h(x) = xᵀx − 1`.
    pub fn h(&self) -> Polynomial {
        let b = basis(self.dim, 2);
        let mut coeffs = vec![0.0; b.len()];
        coeffs[0] = -1.0;
        for i in 0..self.dim {
            let mut e = MultiIndex::zero(self.dim).exponents().to_vec();
            e[i] = 2;
            coeffs[b.position_of_exponents(&e).unwrap()] = 1.0;
        }
        Polynomial::new(self.dim, 2, coeffs).unwrap()
    }

    /// `g_0 = 1`, `g_j = x_j` for `j = 1..=n`.
    pub fn g(&self, j: usize) -> Polynomial {
        assert!(j <= self.dim, "g index out of range");
        if j == 0 {
            return Polynomial::constant(self.dim, 1.0);
        }
        let b = basis(self.dim, 1);
        let mut coeffs = vec![0.0; b.len()];
        coeffs[j] = 1.0;
        Polynomial::new(self.dim, 1, coeffs).unwrap()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        x.len() == self.dim && (norm2 - 1.0).abs() <= tol && x.iter().all(|&v| v >= -tol)
    }
}
