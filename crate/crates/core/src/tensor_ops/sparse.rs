use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use super::{ep_violation, vech_index, vech_width, QuadOpCompact};
use crate::error::{Error, Result};

/// Row-compressed compact quadratic operator for full-order models, where a
/// dense `n × n(n+1)/2` matrix would be mostly zeros.
///
/// Each stored entry is `(j, k, f_ijk)` with `j >= k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseQuadOp {
    dim: usize,
    row_ptr: Vec<usize>,
    pairs: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl SparseQuadOp {
    /// Builds from `(i, j, k, value)` terms meaning `value · x_j x_k` in row `i`.
    /// Terms on the same monomial are summed; the order of `j`, `k` is free.
    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (usize, usize, usize, f64)>) -> Result<Self> {
        let mut rows: Vec<BTreeMap<(usize, usize), f64>> = vec![BTreeMap::new(); dim];
        for (i, j, k, v) in terms {
            if i >= dim || j >= dim || k >= dim {
                return Err(Error::DimensionMismatch(format!(
                    "term ({i}, {j}, {k}) outside dimension {dim}"
                )));
            }
            *rows[i].entry((j.max(k), j.min(k))).or_insert(0.0) += v;
        }
        let mut op = Self { dim, row_ptr: vec![0], pairs: Vec::new(), values: Vec::new() };
        for row in rows {
            for (pair, v) in row {
                if v != 0.0 {
                    op.pairs.push(pair);
                    op.values.push(v);
                }
            }
            op.row_ptr.push(op.pairs.len());
        }
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.pairs[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let (j, k) = self.pairs[idx];
                acc += self.values[idx] * x[j] * x[k];
            }
            *o = acc;
        }
    }

    pub fn to_compact(&self) -> QuadOpCompact {
        let n = self.dim;
        let mut f = DMatrix::zeros(n, vech_width(n));
        for i in 0..n {
            for ((j, k), v) in self.row(i) {
                f[(i, vech_index(n, j, k))] = v;
            }
        }
        QuadOpCompact::new(f).expect("shape is n × n(n+1)/2 by construction")
    }

    /// Same quantity as [`ep_violation`] on the dense form, summed only over
    /// triples that can be nonzero.
    pub fn ep_violation(&self) -> f64 {
        let mut h: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for i in 0..self.dim {
            for ((j, k), v) in self.row(i) {
                if j == k {
                    h.insert((i, j, k), v);
                } else {
                    h.insert((i, j, k), 0.5 * v);
                    h.insert((i, k, j), 0.5 * v);
                }
            }
        }
        // h_abc enters the residual of triples (a,b,c), (b,a,c) and (c,b,a).
        let mut triples = BTreeSet::new();
        for &(a, b, c) in h.keys() {
            triples.insert((a, b, c));
            triples.insert((b, a, c));
            triples.insert((c, b, a));
        }
        let get = |t: (usize, usize, usize)| h.get(&t).copied().unwrap_or(0.0);
        triples
            .into_iter()
            .map(|(i, j, k)| (get((i, j, k)) + get((j, i, k)) + get((k, j, i))).abs())
            .sum()
    }
}

/// Quadratic term of a [`crate::pde::QuadraticModel`].
#[derive(Debug, Clone, PartialEq)]
pub enum QuadTerm {
    Dense(QuadOpCompact),
    Sparse(SparseQuadOp),
}

impl QuadTerm {
    pub fn dim(&self) -> usize {
        match self {
            QuadTerm::Dense(f) => f.dim(),
            QuadTerm::Sparse(f) => f.dim(),
        }
    }

    pub fn apply_into(&self, x: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
        match self {
            QuadTerm::Dense(f) => {
                scratch.resize(vech_width(x.len()), 0.0);
                super::vech_square_into(x, scratch);
                let e = f.entries();
                out.iter_mut().for_each(|o| *o = 0.0);
                for (c, &s) in scratch.iter().enumerate() {
                    if s != 0.0 {
                        for (o, &fv) in out.iter_mut().zip(e.column(c).iter()) {
                            *o += fv * s;
                        }
                    }
                }
            }
            QuadTerm::Sparse(f) => f.apply_into(x, out),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.apply_into(x.as_slice(), &mut Vec::new(), out.as_mut_slice());
        out
    }

    pub fn to_compact(&self) -> QuadOpCompact {
        match self {
            QuadTerm::Dense(f) => f.clone(),
            QuadTerm::Sparse(f) => f.to_compact(),
        }
    }

    pub fn ep_violation(&self) -> f64 {
        match self {
            QuadTerm::Dense(f) => ep_violation(f),
            QuadTerm::Sparse(f) => f.ep_violation(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, terms: usize, seed: u64) -> SparseQuadOp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SparseQuadOp::from_terms(
            n,
            (0..terms).map(|_| {
                (
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                    rng.random_range(-1.0..1.0),
                )
            }),
        )
        .unwrap()
    }

    #[test]
    fn sparse_and_dense_agree() {
        let s = random_sparse(7, 40, 1);
        let d = s.to_compact();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DVector::from_fn(7, |_, _| rng.random_range(-1.0..1.0));
        let a = QuadTerm::Sparse(s.clone()).apply(&x);
        let b = QuadTerm::Dense(d.clone()).apply(&x);
        assert!((&a - &b).amax() <= 1e-14);
        assert!((s.ep_violation() - ep_violation(&d)).abs() <= 1e-12 * ep_violation(&d));
    }

    #[test]
    fn terms_merge_regardless_of_order() {
        let s = SparseQuadOp::from_terms(3, [(0, 1, 2, 1.0), (0, 2, 1, 2.0)]).unwrap();
        assert_eq!(s.nnz(), 1);
        assert_eq!(s.to_compact().f(0, 2, 1), 3.0);
        assert!(SparseQuadOp::from_terms(3, [(3, 0, 0, 1.0)]).is_err());
    }
}
