//! Proper orthogonal decomposition of concatenated snapshot sets.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::pde::SnapshotSet;

/// Leading left singular vectors of the snapshot matrix plus the full
/// singular-value spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    pub basis: DMatrix<f64>,
    pub singular_values: DVector<f64>,
}

impl PodBasis {
    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn r_max(&self) -> usize {
        self.basis.ncols()
    }

    /// First `r` basis vectors, `V_r`.
    pub fn leading(&self, r: usize) -> Result<DMatrix<f64>> {
        if r == 0 || r > self.r_max() {
            return Err(Error::InvalidArgument(format!(
                "basis size {r} outside 1..={}",
                self.r_max()
            )));
        }
        Ok(self.basis.columns(0, r).into_owned())
    }
}

/// Reduced states `X̂ = V_rᵀ X` and derivatives `V_rᵀ Ẋ`, concatenated over
/// trajectories in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedData {
    pub states: DMatrix<f64>,
    pub derivatives: DMatrix<f64>,
}

impl ReducedData {
    pub fn r(&self) -> usize {
        self.states.nrows()
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }
}

fn concat<'a>(blocks: impl Iterator<Item = &'a DMatrix<f64>>, n: usize, total: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, total);
    let mut col = 0;
    for b in blocks {
        out.columns_mut(col, b.ncols()).copy_from(b);
        col += b.ncols();
    }
    out
}

fn check_sets(snapshots: &[SnapshotSet]) -> Result<(usize, usize)> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::InvalidArgument("no snapshot sets given".into()))?;
    let n = first.n();
    if let Some(bad) = snapshots.iter().find(|s| s.n() != n) {
        return Err(Error::DimensionMismatch(format!(
            "snapshot sets have state dimensions {n} and {}",
            bad.n()
        )));
    }
    Ok((n, snapshots.iter().map(SnapshotSet::len).sum()))
}

pub fn compute_pod(snapshots: &[SnapshotSet], r_max: usize) -> Result<PodBasis> {
    let (n, total) = check_sets(snapshots)?;
    pod_of_matrix(&concat(snapshots.iter().map(|s| &s.states), n, total), r_max)
}

/// POD of an explicit snapshot matrix (columns are snapshots). No centering.
pub fn pod_of_matrix(x: &DMatrix<f64>, r_max: usize) -> Result<PodBasis> {
    if r_max == 0 || r_max > x.ncols() || r_max > x.nrows() {
        return Err(Error::InvalidArgument(format!(
            "r_max = {r_max} must lie in 1..=min(n, K) = {}",
            x.nrows().min(x.ncols())
        )));
    }
    let svd = SVD::new(x.clone(), true, false);
    let u = svd.u.as_ref().expect("left singular vectors were requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = DVector::from_iterator(order.len(), order.iter().map(|&i| svd.singular_values[i]));

    let rank = sigma.iter().filter(|&&s| s > 1e-12 * sigma[0]).count();
    if r_max > rank {
        return Err(Error::RankDeficient { requested: r_max, rank });
    }

    let mut basis = DMatrix::zeros(x.nrows(), r_max);
    for (dst, &src) in order.iter().take(r_max).enumerate() {
        let mut col = u.column(src).into_owned();
        // Largest-magnitude entry positive; first index wins ties.
        let pivot = col.iter().enumerate().fold(0, |best, (i, v)| {
            if v.abs() > col[best].abs() {
                i
            } else {
                best
            }
        });
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        basis.set_column(dst, &col);
    }
    Ok(PodBasis { basis, singular_values: sigma })
}

fn check_spectrum(sigma: &DVector<f64>, r: usize) -> Result<f64> {
    if r > sigma.len() {
        return Err(Error::InvalidArgument(format!(
            "r = {r} exceeds the {} available singular values",
            sigma.len()
        )));
    }
    let total = sigma.norm_squared();
    if total == 0.0 {
        return Err(Error::ZeroNorm("all singular values are zero".into()));
    }
    Ok(total)
}

/// Fraction of snapshot energy in the truncated modes, `Σ_{i>r} σ_i² / Σ σ_i²`.
pub fn energy_lost(sigma: &DVector<f64>, r: usize) -> Result<f64> {
    let total = check_spectrum(sigma, r)?;
    Ok(sigma.rows_range(r..).norm_squared() / total)
}

/// Fraction of snapshot energy captured by the first `r` modes.
pub fn energy_retained(sigma: &DVector<f64>, r: usize) -> Result<f64> {
    let total = check_spectrum(sigma, r)?;
    Ok(sigma.rows_range(..r).norm_squared() / total)
}

pub fn project(basis: &PodBasis, snapshots: &[SnapshotSet], r: usize) -> Result<ReducedData> {
    let (n, total) = check_sets(snapshots)?;
    if n != basis.n() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows, snapshots have dimension {n}",
            basis.n()
        )));
    }
    let vt = basis.leading(r)?.transpose();
    let states = concat(snapshots.iter().map(|s| &s.states), n, total);
    let derivatives = concat(snapshots.iter().map(|s| &s.derivatives), n, total);
    Ok(ReducedData { states: &vt * states, derivatives: &vt * derivatives })
}
