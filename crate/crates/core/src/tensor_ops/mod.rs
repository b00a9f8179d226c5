//! Quadratic operators in Kronecker (`H`, n × n²) and compact half-vectorized
//! (`F`, n × n(n+1)/2) form.
//!
//! Index conventions are written 1-based in the docs and stored 0-based. The
//! shift lives in [`kron_index`] and [`vech_index`] only:
//!
//! - `h_ijk` sits at column `n(k−1) + j` of `H` and multiplies `x_j x_k`;
//! - `f_ijk` (j ≥ k) sits at column `(n − k/2)(k−1) + j` of `F`.
//!
//! `f_ijk = h_ijk + h_ikj` off the diagonal and `f_ijj = h_ijj`, so `f_ijk` is
//! simply the coefficient of the monomial `x_j x_k` in row `i`.

mod constraints;
mod sparse;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use constraints::{build_constraint_matrix, extract_submodel, ConstraintSystem};
pub use sparse::{QuadTerm, SparseQuadOp};

/// Width of the half-vectorized square of a length-`n` vector.
#[inline]
pub fn vech_width(n: usize) -> usize {
    n * (n + 1) / 2
}

/// 0-based column of `x_j x_k` (`j >= k`, both 0-based) in the Kronecker square.
#[inline]
pub fn kron_index(n: usize, j: usize, k: usize) -> usize {
    k * n + j
}

/// 0-based column of `x_j x_k` (`j >= k`, both 0-based) in the half-vectorized
/// square. Equals `(n − k/2)(k−1) + j − 1` in 1-based indices.
#[inline]
pub fn vech_index(n: usize, j: usize, k: usize) -> usize {
    debug_assert!(k <= j && j < n);
    k * (2 * n - k - 1) / 2 + j
}

/// Inverse of [`vech_index`]: the `(j, k)` pair (j >= k) stored at `col`.
pub fn vech_pair(n: usize, col: usize) -> (usize, usize) {
    let mut start = 0;
    for k in 0..n {
        let len = n - k;
        if col < start + len {
            return (k + col - start, k);
        }
        start += len;
    }
    panic!("column {col} out of range for n = {n}");
}

/// `x ⊗ x`.
pub fn kron_square(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let mut out = DVector::zeros(n * n);
    for k in 0..n {
        for j in 0..n {
            out[kron_index(n, j, k)] = x[j] * x[k];
        }
    }
    out
}

/// `vech(x xᵀ)`, the lower triangle of `x xᵀ` stacked column by column.
pub fn vech_square(x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(vech_width(x.len()));
    vech_square_into(x.as_slice(), out.as_mut_slice());
    out
}

pub fn vech_square_into(x: &[f64], out: &mut [f64]) {
    let n = x.len();
    debug_assert_eq!(out.len(), vech_width(n));
    let mut col = 0;
    for k in 0..n {
        let xk = x[k];
        for &xj in &x[k..] {
            out[col] = xj * xk;
            col += 1;
        }
    }
}

/// Quadratic operator in Kronecker form, `n × n²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadOpFull {
    entries: DMatrix<f64>,
}

impl QuadOpFull {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "Kronecker-form operator must be n × n², got {} × {}",
                n,
                entries.ncols()
            )));
        }
        Ok(Self { entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self { entries: DMatrix::zeros(n, n * n) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `h_ijk` with 0-based indices.
    #[inline]
    pub fn h(&self, i: usize, j: usize, k: usize) -> f64 {
        self.entries[(i, kron_index(self.dim(), j, k))]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| {
            (0..n).all(|j| (0..j).all(|k| (self.h(i, j, k) - self.h(i, k, j)).abs() <= tol))
        })
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.dim(), x.len())?;
        Ok(&self.entries * kron_square(x))
    }
}

/// Quadratic operator in compact form, `n × n(n+1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadOpCompact {
    entries: DMatrix<f64>,
}

impl QuadOpCompact {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != vech_width(n) {
            return Err(Error::DimensionMismatch(format!(
                "compact operator must be n × n(n+1)/2, got {} × {}",
                n,
                entries.ncols()
            )));
        }
        Ok(Self { entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self { entries: DMatrix::zeros(n, vech_width(n)) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    /// `f_ijk` with 0-based indices, `j >= k`.
    #[inline]
    pub fn f(&self, i: usize, j: usize, k: usize) -> f64 {
        self.entries[(i, vech_index(self.dim(), j, k))]
    }

    /// `F · vech(x xᵀ)`.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.dim(), x.len())?;
        Ok(&self.entries * vech_square(x))
    }

    /// Row-major vectorization, the column layout of [`ConstraintSystem`].
    pub fn to_row_major(&self) -> DVector<f64> {
        let (n, w) = self.entries.shape();
        DVector::from_fn(n * w, |idx, _| self.entries[(idx / w, idx % w)])
    }

    pub fn from_row_major(n: usize, v: &DVector<f64>) -> Result<Self> {
        let w = vech_width(n);
        if v.len() != n * w {
            return Err(Error::DimensionMismatch(format!(
                "row-major vector of length {} does not match n = {n}",
                v.len()
            )));
        }
        Ok(Self { entries: DMatrix::from_fn(n, w, |i, c| v[i * w + c]) })
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {expected} applied to vector of length {got}"
        )));
    }
    Ok(())
}

/// Kronecker form to compact form: `f_ijk = h_ijk + h_ikj` (j > k), `f_ijj = h_ijj`.
pub fn h_to_f(h: &QuadOpFull) -> QuadOpCompact {
    let n = h.dim();
    let mut f = DMatrix::zeros(n, vech_width(n));
    for i in 0..n {
        for k in 0..n {
            for j in k..n {
                let v = if j == k { h.h(i, j, k) } else { h.h(i, j, k) + h.h(i, k, j) };
                f[(i, vech_index(n, j, k))] = v;
            }
        }
    }
    QuadOpCompact { entries: f }
}

/// Compact form to the symmetric Kronecker form: off-diagonal mass is split
/// equally between `h_ijk` and `h_ikj`.
pub fn f_to_h(f: &QuadOpCompact) -> QuadOpFull {
    let n = f.dim();
    let mut h = DMatrix::zeros(n, n * n);
    for i in 0..n {
        for k in 0..n {
            for j in k..n {
                let v = f.f(i, j, k);
                if j == k {
                    h[(i, kron_index(n, j, k))] = v;
                } else {
                    h[(i, kron_index(n, j, k))] = 0.5 * v;
                    h[(i, kron_index(n, k, j))] = 0.5 * v;
                }
            }
        }
    }
    QuadOpFull { entries: h }
}

pub fn eval_quadratic(f: &QuadOpCompact, x: &DVector<f64>) -> Result<DVector<f64>> {
    f.apply(x)
}

/// Sum of constraint residuals `Σ_{i,j,k} |h_ijk + h_jik + h_kji|` over the
/// symmetric Kronecker form of `f`.
pub fn ep_violation(f: &QuadOpCompact) -> f64 {
    let h = f_to_h(f);
    let n = h.dim();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                total += (h.h(i, j, k) + h.h(j, i, k) + h.h(k, j, i)).abs();
            }
        }
    }
    total
}

/// Samples random states and checks `|xᵀ F x^[2]| <= tol ‖x‖³` for each.
/// The sample stream is fixed, so the answer is deterministic.
pub fn is_energy_preserving(f: &QuadOpCompact, samples: usize, tol: f64) -> bool {
    let n = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e9e9);
    (0..samples.max(1)).all(|_| {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let rate = x.dot(&(f.entries() * vech_square(&x)));
        rate.abs() <= tol * x.norm().powi(3)
    })
}
