//! Exponent vectors and graded-lexicographic monomial bases.
//!
//! Monomials `x^α` are ordered first by total degree and then
//! lexicographically with larger leading exponents first, so for two
//! variables the degree-two block reads `x1², x1·x2, x2²`. Positions are
//! computed by combinatorial ranking, which makes [`MultiIndexBasis::position_of`]
//! allocation free.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Binomial coefficient `C(n, k)`; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Number of exponent vectors in `N^n` with total degree exactly `d`.
pub fn count_exact(n: usize, d: usize) -> usize {
    if n == 0 {
        return usize::from(d == 0);
    }
    binomial(n + d - 1, d)
}

/// Number of exponent vectors in `N^n` with total degree at most `d`.
pub fn count_upto(n: usize, d: usize) -> usize {
    binomial(n + d, d)
}

/// An exponent vector `α ∈ N^n`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// The unit exponent `e_i` (zero-based `i`).
    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// Componentwise sum. Panics if the dimensions differ.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        assert_eq!(self.dim(), other.dim(), "multi-index dimension mismatch");
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `x^α` evaluated at `point`.
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }

    /// Number of index tuples `(i_1..i_m)` sharing this exponent class:
    /// the multinomial `m! / (α_1! ⋯ α_n!)`.
    pub fn permutation_count(&self) -> u64 {
        let mut rest = self.degree() as usize;
        let mut acc: u64 = 1;
        for &a in &self.0 {
            acc *= binomial(rest, a as usize) as u64;
            rest -= a as usize;
        }
        acc
    }

    /// Exponent vector `e_{i_1} + ⋯ + e_{i_m}` of a one-based index tuple.
    pub fn from_tuple(tuple: &[usize], n: usize) -> Result<MultiIndex> {
        let mut e = vec![0u32; n];
        for &i in tuple {
            if i == 0 || i > n {
                return Err(Error::IndexOutOfRange { index: i, dim: n });
            }
            e[i - 1] += 1;
        }
        Ok(MultiIndex(e))
    }

    /// The sorted one-based tuple of this exponent class, e.g. `(2,1,0)` ↦ `[1,1,2]`.
    pub fn to_tuple(&self) -> Vec<usize> {
        let mut t = Vec::with_capacity(self.degree() as usize);
        for (i, &a) in self.0.iter().enumerate() {
            t.extend(std::iter::repeat(i + 1).take(a as usize));
        }
        t
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Convenience alias for [`MultiIndex::from_tuple`].
pub fn tuple_to_index(tuple: &[usize], n: usize) -> Result<MultiIndex> {
    MultiIndex::from_tuple(tuple, n)
}

/// Ordered list of all exponents with degree in `min_degree..=max_degree`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiIndexBasis {
    n: usize,
    min_degree: u32,
    max_degree: u32,
    items: Vec<MultiIndex>,
}

impl MultiIndexBasis {
    fn with_range(n: usize, min_degree: u32, max_degree: u32) -> Self {
        assert!(n >= 1, "basis dimension must be positive");
        let mut items = Vec::new();
        let mut buf = vec![0u32; n];
        for d in min_degree..=max_degree {
            push_compositions(&mut buf, 0, d, &mut items);
        }
        MultiIndexBasis {
            n,
            min_degree,
            max_degree,
            items,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn min_degree(&self) -> u32 {
        self.min_degree
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[MultiIndex] {
        &self.items
    }

    pub fn get(&self, pos: usize) -> &MultiIndex {
        &self.items[pos]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.items.iter()
    }

    /// Zero-based position of `alpha`, the exact inverse of [`Self::get`].
    pub fn position_of(&self, alpha: &MultiIndex) -> Result<usize> {
        self.position_of_exponents(alpha.exponents())
    }

    pub fn position_of_exponents(&self, exps: &[u32]) -> Result<usize> {
        if exps.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: exps.len(),
            });
        }
        let deg: u32 = exps.iter().sum();
        if deg < self.min_degree || deg > self.max_degree {
            return Err(Error::DegreeOutOfRange {
                degree: deg,
                min: self.min_degree,
                max: self.max_degree,
            });
        }
        let offset = count_upto_minus(self.n, deg as usize) - count_upto_minus(self.n, self.min_degree as usize);
        Ok(offset + rank_within_degree(exps))
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        self.position_of(alpha).is_ok()
    }
}

/// Number of exponents of degree strictly below `d`.
fn count_upto_minus(n: usize, d: usize) -> usize {
    if d == 0 {
        0
    } else {
        count_upto(n, d - 1)
    }
}

/// Rank of `exps` among all exponents of the same degree, in basis order.
fn rank_within_degree(exps: &[u32]) -> usize {
    let n = exps.len();
    let mut rem: usize = exps.iter().map(|&e| e as usize).sum();
    let mut rank = 0;
    for (i, &e) in exps.iter().enumerate().take(n.saturating_sub(1)) {
        let parts = n - i - 1;
        // every larger leading exponent v comes first
        for v in (e as usize + 1)..=rem {
            rank += count_exact(parts, rem - v);
        }
        rem -= e as usize;
    }
    rank
}

fn push_compositions(buf: &mut [u32], i: usize, rem: u32, out: &mut Vec<MultiIndex>) {
    let n = buf.len();
    if i == n - 1 {
        buf[i] = rem;
        out.push(MultiIndex(buf.to_vec()));
        return;
    }
    for v in (0..=rem).rev() {
        buf[i] = v;
        push_compositions(buf, i + 1, rem - v, out);
    }
    buf[i] = 0;
}

/// All `α ∈ N^n` with `|α| ≤ d` in graded-lexicographic order.
pub fn basis(n: usize, d: u32) -> MultiIndexBasis {
    MultiIndexBasis::with_range(n, 0, d)
}

/// All `α ∈ N^n` with `|α| = m`, the index set of an order-`m` symmetric tensor.
pub fn exact_degree_basis(n: usize, m: u32) -> MultiIndexBasis {
    MultiIndexBasis::with_range(n, m, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn two_variable_degree_two_layout() {
        let b = basis(2, 2);
        let want = [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]];
        assert_eq!(b.len(), 6);
        for (got, w) in b.iter().zip(want.iter()) {
            assert_eq!(got.exponents(), w);
        }
        assert_eq!(b.position_of(&mi(&[1, 1])).unwrap(), 4);
    }

    #[test]
    fn small_bases() {
        let b = basis(1, 0);
        assert_eq!(b.len(), 1);
        assert_eq!(b.get(0).exponents(), &[0]);

        let b = basis(3, 2);
        assert_eq!(b.len(), 10);
        assert_eq!(b.get(0).exponents(), &[0, 0, 0]);
        assert_eq!(b.get(1).exponents(), &[1, 0, 0]);
        assert_eq!(b.get(2).exponents(), &[0, 1, 0]);
        assert_eq!(b.get(3).exponents(), &[0, 0, 1]);
    }

    #[test]
    fn exact_degree_sizes() {
        assert_eq!(exact_degree_basis(3, 3).len(), 10);
        let e = exact_degree_basis(2, 1);
        assert_eq!(e.items(), &[mi(&[1, 0]), mi(&[0, 1])]);
        // stars and bars by brute force
        let mut count = 0;
        for a in 0..=5u32 {
            for b in 0..=5 - a {
                for c in 0..=5 - a - b {
                    let _ = 5 - a - b - c;
                    count += 1;
                }
            }
        }
        assert_eq!(count, 56);
        assert_eq!(exact_degree_basis(4, 5).len(), count);
    }

    #[test]
    fn tuples_map_to_exponents() {
        assert_eq!(tuple_to_index(&[1, 1, 1], 3).unwrap(), mi(&[3, 0, 0]));
        let a = tuple_to_index(&[2, 2, 3], 10).unwrap();
        assert_eq!(a.exponents(), &[0, 2, 1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(
            tuple_to_index(&[3, 1, 2], 3).unwrap(),
            tuple_to_index(&[1, 2, 3], 3).unwrap()
        );
        assert!(matches!(
            tuple_to_index(&[1, 4], 3),
            Err(Error::IndexOutOfRange { index: 4, dim: 3 })
        ));
        assert!(tuple_to_index(&[0], 3).is_err());
    }

    #[test]
    fn add_and_position_errors() {
        assert_eq!(mi(&[1, 0]).add(&mi(&[0, 1])), mi(&[1, 1]));
        let b = basis(2, 2);
        assert!(matches!(
            b.position_of(&mi(&[2, 1])),
            Err(Error::DegreeOutOfRange { degree: 3, .. })
        ));
    }

    #[test]
    fn permutation_counts() {
        assert_eq!(mi(&[3, 0, 0]).permutation_count(), 1);
        assert_eq!(mi(&[1, 1, 1]).permutation_count(), 6);
        // enumerate all 3-tuples over {1,2,3}
        let target = mi(&[2, 1, 0]);
        let mut count = 0;
        for i in 1..=3 {
            for j in 1..=3 {
                for k in 1..=3 {
                    if tuple_to_index(&[i, j, k], 3).unwrap() == target {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 3);
        assert_eq!(target.permutation_count(), 3);
    }

    #[test]
    fn sizes_match_binomials() {
        for n in 1..=6 {
            for d in 0..=6u32 {
                assert_eq!(basis(n, d).len(), binomial(n + d as usize, d as usize));
                if d >= 1 {
                    assert_eq!(
                        exact_degree_basis(n, d).len(),
                        binomial(n + d as usize - 1, d as usize)
                    );
                }
            }
        }
    }

    #[test]
    fn basis_strictly_increasing_and_positions_invert() {
        for n in 1..=4 {
            for d in 0..=5 {
                let b = basis(n, d);
                for w in b.items().windows(2) {
                    assert!(w[0] < w[1], "{:?} !< {:?}", w[0], w[1]);
                }
                for (i, a) in b.iter().enumerate() {
                    assert_eq!(b.position_of(a).unwrap(), i);
                }
            }
            let e = exact_degree_basis(n, 4);
            for (i, a) in e.iter().enumerate() {
                assert_eq!(e.position_of(a).unwrap(), i);
            }
        }
    }

    #[test]
    fn add_then_position_exhaustive() {
        for n in 1..=3 {
            let d = 4;
            let b = basis(n, d);
            for a in b.iter() {
                for c in b.iter() {
                    if a.degree() + c.degree() <= d {
                        let s = a.add(c);
                        let p = b.position_of(&s).unwrap();
                        assert_eq!(b.get(p), &s);
                    }
                }
            }
        }
    }

    #[test]
    fn permutation_counts_partition_all_tuples() {
        for n in 1..=4usize {
            for m in 1..=4u32 {
                let total: u64 = exact_degree_basis(n, m)
                    .iter()
                    .map(|a| a.permutation_count())
                    .sum();
                assert_eq!(total, (n as u64).pow(m));
            }
        }
    }

    fn permutations(v: &[usize]) -> Vec<Vec<usize>> {
        if v.len() <= 1 {
            return vec![v.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..v.len() {
            let mut rest = v.to_vec();
            let head = rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, head);
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn tuple_map_is_permutation_invariant() {
        let n = 3;
        for m in 1..=4usize {
            let mut t = vec![1usize; m];
            loop {
                let base = tuple_to_index(&t, n).unwrap();
                assert_eq!(base.degree() as usize, m);
                for p in permutations(&t) {
                    assert_eq!(tuple_to_index(&p, n).unwrap(), base);
                }
                // odometer over {1..n}^m
                let mut i = 0;
                while i < m && t[i] == n {
                    t[i] = 1;
                    i += 1;
                }
                if i == m {
                    break;
                }
                t[i] += 1;
            }
        }
    }

    proptest! {
        #[test]
        fn order_is_strict_total(
            a in proptest::collection::vec(0u32..4, 3),
            b in proptest::collection::vec(0u32..4, 3),
            c in proptest::collection::vec(0u32..4, 3),
        ) {
            let (a, b, c) = (mi(&a), mi(&b), mi(&c));
            prop_assert!(a.cmp(&a) == Ordering::Equal);
            let lt = |x: &MultiIndex, y: &MultiIndex| x.cmp(y) == Ordering::Less;
            // trichotomy
            let k = [lt(&a, &b), a == b, lt(&b, &a)].iter().filter(|&&x| x).count();
            prop_assert_eq!(k, 1);
            if lt(&a, &b) && lt(&b, &c) {
                prop_assert!(lt(&a, &c));
            }
        }

        #[test]
        fn tuple_roundtrip(t in proptest::collection::vec(1usize..=5, 1..6)) {
            let a = tuple_to_index(&t, 5).unwrap();
            let mut sorted = t.clone();
            sorted.sort();
            prop_assert_eq!(a.to_tuple(), sorted);
        }
    }
}
