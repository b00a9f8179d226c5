use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{vech_index, vech_width, QuadOpCompact};
use crate::error::{Error, Result};

/// Energy-preservation equalities on the entries of a compact operator `F̂`.
///
/// One row per index triple `i >= j >= k`:
///
/// ```text
/// δ_jk f_ijk + δ_ik f_jik + δ_ij f_kij = 0,   δ_ab = 1 if a = b else 1/2
/// ```
///
/// where `f_abc` means the entry for the unordered pair `{b, c}`. Coinciding
/// terms are summed; the `i = j = k` row (which would read `3 f_iii`) is
/// stored as `f_iii` so every coefficient is 1 or 1/2.
///
/// Columns index the row-major vectorization of `F̂`: entry `(i, c)` lives at
/// column `i · r(r+1)/2 + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    dim: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    triples: Vec<(usize, usize, usize)>,
}

pub fn build_constraint_matrix(r: usize) -> Result<ConstraintSystem> {
    if r == 0 {
        return Err(Error::InvalidArgument("constraint system needs r >= 1".into()));
    }
    let w = vech_width(r);
    let pair_col = |row: usize, a: usize, b: usize| row * w + vech_index(r, a.max(b), a.min(b));
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.5 };

    let mut sys = ConstraintSystem {
        dim: r,
        ncols: r * w,
        row_ptr: vec![0],
        col_idx: Vec::new(),
        values: Vec::new(),
        triples: Vec::new(),
    };
    for i in 0..r {
        for j in 0..=i {
            for k in 0..=j {
                let mut row = BTreeMap::new();
                *row.entry(pair_col(i, j, k)).or_insert(0.0) += delta(j, k);
                *row.entry(pair_col(j, i, k)).or_insert(0.0) += delta(i, k);
                *row.entry(pair_col(k, i, j)).or_insert(0.0) += delta(i, j);
                if i == k {
                    row.values_mut().for_each(|v| *v = 1.0);
                }
                for (c, v) in row {
                    sys.col_idx.push(c);
                    sys.values.push(v);
                }
                sys.row_ptr.push(sys.col_idx.len());
                sys.triples.push((i, j, k));
            }
        }
    }
    Ok(sys)
}

impl ConstraintSystem {
    /// A system with no rows, for running the constrained solver unconstrained.
    pub fn empty(r: usize) -> Self {
        Self {
            dim: r,
            ncols: r * vech_width(r),
            row_ptr: vec![0],
            col_idx: Vec::new(),
            values: Vec::new(),
            triples: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nrows(&self) -> usize {
        self.triples.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// The `(i, j, k)` triple (0-based, `i >= j >= k`) behind each row.
    pub fn triples(&self) -> &[(usize, usize, usize)] {
        &self.triples
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols);
        for row in 0..self.nrows() {
            for (c, v) in self.row(row) {
                m[(row, c)] = v;
            }
        }
        m
    }

    /// `C · vec(F̂)`.
    pub fn apply(&self, f: &QuadOpCompact) -> Result<DVector<f64>> {
        if f.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "constraint system for r = {} applied to operator of dimension {}",
                self.dim,
                f.dim()
            )));
        }
        let v = f.to_row_major();
        Ok(DVector::from_fn(self.nrows(), |row, _| self.row(row).map(|(c, a)| a * v[c]).sum()))
    }

    pub fn residual_inf(&self, f: &QuadOpCompact) -> Result<f64> {
        Ok(self.apply(f)?.amax())
    }

    /// Orthogonal projection of `vec(F̂)` onto the null space of `C`: the
    /// nearest energy-preserving operator in the Frobenius norm of `vec(F̂)`.
    pub fn project(&self, f: &QuadOpCompact) -> Result<QuadOpCompact> {
        if self.nrows() == 0 {
            return Ok(f.clone());
        }
        let c = self.to_dense();
        let residual = self.apply(f)?;
        let gram = &c * c.transpose();
        let chol = gram.cholesky().ok_or_else(|| {
            Error::SingularSystem("constraint Gram matrix is not positive definite".into())
        })?;
        let correction = c.transpose() * chol.solve(&residual);
        QuadOpCompact::from_row_major(self.dim, &(f.to_row_major() - correction))
    }
}

/// Leading `r' × r'` block of `Â` and the entries of `F̂` with all indices `<= r'`.
pub fn extract_submodel(
    a_hat: &DMatrix<f64>,
    f_hat: &QuadOpCompact,
    r_sub: usize,
) -> Result<(DMatrix<f64>, QuadOpCompact)> {
    let r = f_hat.dim();
    if a_hat.shape() != (r, r) {
        return Err(Error::DimensionMismatch(format!(
            "linear operator is {}×{}, quadratic operator has dimension {r}",
            a_hat.nrows(),
            a_hat.ncols()
        )));
    }
    if r_sub == 0 || r_sub > r {
        return Err(Error::InvalidArgument(format!(
            "submodel dimension {r_sub} outside 1..={r}"
        )));
    }
    let a = a_hat.view((0, 0), (r_sub, r_sub)).into_owned();
    let mut f = DMatrix::zeros(r_sub, vech_width(r_sub));
    for i in 0..r_sub {
        for k in 0..r_sub {
            for j in k..r_sub {
                f[(i, vech_index(r_sub, j, k))] = f_hat.f(i, j, k);
            }
        }
    }
    Ok((a, QuadOpCompact::new(f)?))
}
