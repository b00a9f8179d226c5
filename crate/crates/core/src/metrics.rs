//! Relative state error and autocorrelation statistics.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A full-order trajectory `X_j` next to a reduced trajectory `X̄_j` and the
/// basis `V_r` used to lift it back.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryPair<'a> {
    full: &'a DMatrix<f64>,
    reduced_states: &'a DMatrix<f64>,
    basis: &'a DMatrix<f64>,
}

impl<'a> TrajectoryPair<'a> {
    pub fn new(
        full: &'a DMatrix<f64>,
        reduced_states: &'a DMatrix<f64>,
        basis: &'a DMatrix<f64>,
    ) -> Result<Self> {
        if full.ncols() != reduced_states.ncols()
            || basis.nrows() != full.nrows()
            || basis.ncols() != reduced_states.nrows()
        {
            return Err(Error::DimensionMismatch(format!(
                "full {:?}, reduced {:?}, basis {:?}",
                full.shape(),
                reduced_states.shape(),
                basis.shape()
            )));
        }
        Ok(Self { full, reduced_states, basis })
    }

    pub fn reconstruction(&self) -> DMatrix<f64> {
        self.basis * self.reduced_states
    }

    /// `‖X − V_r X̄‖²_F / ‖X‖²_F`.
    pub fn relative_error(&self) -> Result<f64> {
        let denom = self.full.norm_squared();
        if denom == 0.0 {
            return Err(Error::ZeroNorm("full trajectory is identically zero".into()));
        }
        Ok((self.full - self.reconstruction()).norm_squared() / denom)
    }
}

/// Mean of the per-trajectory relative errors.
pub fn relative_state_error(pairs: &[TrajectoryPair<'_>]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no trajectories given".into()));
    }
    let mut sum = 0.0;
    for p in pairs {
        sum += p.relative_error()?;
    }
    Ok(sum / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Full,
    Reduced,
}

/// Normalized autocorrelation `ρ(k) = c_k / c_0` for lags `0..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrSeries {
    pub rho: Vec<f64>,
    pub source: Source,
    /// Constant grid points left out of a field average.
    pub excluded_rows: usize,
}

impl AutocorrSeries {
    pub fn k_max(&self) -> usize {
        self.rho.len() - 1
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }
}

fn check_lags(len: usize, k_max: usize) -> Result<()> {
    if len <= k_max {
        return Err(Error::InvalidArgument(format!(
            "series of length {len} is too short for k_max = {k_max}"
        )));
    }
    Ok(())
}

fn autocorr_values(x: &[f64], k_max: usize) -> Result<Vec<f64>> {
    let t = x.len();
    let mean = x.iter().sum::<f64>() / t as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c = |k: usize| dev[..t - k].iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / t as f64;
    let c0 = c(0);
    let level = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * level;
    if !(c0 > floor * floor) {
        return Err(Error::ConstantSeries);
    }
    Ok((0..=k_max).map(|k| if k == 0 { 1.0 } else { c(k) / c0 }).collect())
}

/// Biased estimator `c_k = (1/T) Σ_{t<T−k} (x_t − x̄)(x_{t+k} − x̄)`.
pub fn sample_autocorrelation(series: &[f64], k_max: usize) -> Result<AutocorrSeries> {
    check_lags(series.len(), k_max)?;
    Ok(AutocorrSeries { rho: autocorr_values(series, k_max)?, source: Source::Full, excluded_rows: 0 })
}

/// Per-grid-point autocorrelation of a state history (rows are grid points,
/// columns are time samples), averaged over the non-constant rows.
pub fn field_autocorrelation(states: &DMatrix<f64>, k_max: usize) -> Result<AutocorrSeries> {
    check_lags(states.ncols(), k_max)?;
    let rows: Vec<Option<Vec<f64>>> = (0..states.nrows())
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = states.row(i).iter().copied().collect();
            match autocorr_values(&row, k_max) {
                Ok(v) => Ok(Some(v)),
                Err(Error::ConstantSeries) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let used = rows.iter().flatten().count();
    if used == 0 {
        return Err(Error::ConstantSeries);
    }
    let mut rho = vec![0.0; k_max + 1];
    for v in rows.iter().flatten() {
        for (acc, x) in rho.iter_mut().zip(v) {
            *acc += x;
        }
    }
    rho.iter_mut().for_each(|v| *v /= used as f64);
    rho[0] = 1.0;
    Ok(AutocorrSeries { rho, source: Source::Full, excluded_rows: states.nrows() - used })
}

/// `(1/J) Σ_j ‖ρ_j − ρ̄_j‖² / ‖ρ_j‖²` over paired full and reduced series.
pub fn nace(full: &[AutocorrSeries], reduced: &[AutocorrSeries]) -> Result<f64> {
    if full.is_empty() || full.len() != reduced.len() {
        return Err(Error::InvalidArgument(format!(
            "need matching nonempty lists, got {} full and {} reduced series",
            full.len(),
            reduced.len()
        )));
    }
    let mut sum = 0.0;
    for (f, r) in full.iter().zip(reduced) {
        if f.rho.len() != r.rho.len() {
            return Err(Error::DimensionMismatch(format!(
                "k_max {} vs {}",
                f.k_max(),
                r.k_max()
            )));
        }
        let denom: f64 = f.rho.iter().map(|v| v * v).sum();
        if denom == 0.0 {
            return Err(Error::ZeroNorm("full autocorrelation is zero".into()));
        }
        let num: f64 = f.rho.iter().zip(&r.rho).map(|(a, b)| (a - b) * (a - b)).sum();
        sum += num / denom;
    }
    Ok(sum / full.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn exact_projection_has_zero_error() {
        let v = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let red = random(2, 5, 1);
        let full = &v * &red;
        let pair = TrajectoryPair::new(&full, &red, &v).unwrap();
        assert_eq!(relative_state_error(&[pair]).unwrap(), 0.0);
        let zero = DMatrix::zeros(2, 5);
        let pair = TrajectoryPair::new(&full, &zero, &v).unwrap();
        assert_eq!(relative_state_error(&[pair, pair]).unwrap(), 1.0);
    }

    #[test]
    fn state_error_validation() {
        let v = DMatrix::identity(3, 2);
        let red = random(2, 5, 2);
        assert!(TrajectoryPair::new(&random(3, 4, 3), &red, &v).is_err());
        let zero_full = DMatrix::zeros(3, 5);
        let pair = TrajectoryPair::new(&zero_full, &red, &v).unwrap();
        assert!(matches!(relative_state_error(&[pair]), Err(Error::ZeroNorm(_))));
        assert!(relative_state_error(&[]).is_err());
    }

    #[test]
    fn state_error_is_rotation_invariant() {
        let full = random(4, 6, 4);
        let red = random(2, 6, 5);
        let v = crate::pod::pod_of_matrix(&random(4, 4, 6), 2).unwrap().basis;
        let q = random(4, 4, 7).qr().q();
        let (qf, qv) = (&q * &full, &q * &v);
        let a = relative_state_error(&[TrajectoryPair::new(&full, &red, &v).unwrap()]).unwrap();
        let b = relative_state_error(&[TrajectoryPair::new(&qf, &red, &qv).unwrap()]).unwrap();
        assert!((a - b).abs() <= 1e-13 * a);
    }

    /// Closed form of the biased estimator on `cos(a t)`, `t < T`, with `T` a
    /// multiple of the period (zero mean):
    /// `T c_k = (T−k)/2 cos(ak) + sin(a(T−k)) cos(a(T−1)) / (2 sin a)`.
    fn sinusoid_rho(p: usize, t: usize, k: usize) -> f64 {
        let a = 2.0 * PI / p as f64;
        let c = |k: usize| {
            let n = (t - k) as f64;
            0.5 * n * (a * k as f64).cos() + (a * n).sin() * (a * (t as f64 - 1.0)).cos() / (2.0 * a.sin())
        };
        c(k) / c(0)
    }

    #[test]
    fn sinusoid_autocorrelation() {
        for (p, t) in [(50usize, 20_000usize), (20, 1000), (7, 7 * 300)] {
            let x: Vec<f64> = (0..t).map(|i| (2.0 * PI * i as f64 / p as f64).cos()).collect();
            let s = sample_autocorrelation(&x, p).unwrap();
            assert_eq!(s.rho[0], 1.0);
            assert_eq!(s.k_max(), p);
            let a = 2.0 * PI / p as f64;
            for (k, rho) in s.rho.iter().enumerate() {
                assert!((rho - sinusoid_rho(p, t, k)).abs() <= 2.0 / t as f64 + 1e-6, "k = {k}");
                let bound = (k as f64 + 1.0 / a.sin()) / t as f64 + 1e-6;
                assert!((rho - (a * k as f64).cos()).abs() <= bound);
            }
        }
    }

    #[test]
    fn alternating_series() {
        let x: Vec<f64> = (0..1001).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let s = sample_autocorrelation(&x, 3).unwrap();
        assert!((s.rho[1] + 1.0).abs() < 2e-3);
        assert!((s.rho[2] - 1.0).abs() < 3e-3);
    }

    #[test]
    fn estimator_matches_direct_formula() {
        let x = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let s = sample_autocorrelation(&x, 2).unwrap();
        // mean 3, deviations -2 0 -1 2 1, c0 = 10/5, c1 = (0+0-2+2)/5, c2 = (2+0-1)/5
        assert_eq!(s.rho, vec![1.0, 0.0, 0.1]);
    }

    #[test]
    fn constant_and_short_series() {
        assert!(matches!(sample_autocorrelation(&[2.5; 10], 3), Err(Error::ConstantSeries)));
        assert!(matches!(sample_autocorrelation(&[0.0; 10], 3), Err(Error::ConstantSeries)));
        assert!(sample_autocorrelation(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(sample_autocorrelation(&[1.0, 2.0], 0).unwrap().rho == vec![1.0]);
    }

    #[test]
    fn bounded_by_one() {
        let x = random(1, 500, 8);
        let s = sample_autocorrelation(x.as_slice(), 499).unwrap();
        assert!(s.rho.iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn field_average() {
        let t = 400;
        let row = |phase: f64| DVector::from_fn(t, |i, _| (0.2 * i as f64 + phase).sin());
        let mut states = DMatrix::zeros(3, t);
        for i in 0..3 {
            states.set_row(i, &row(0.0).transpose());
        }
        let single = sample_autocorrelation(row(0.0).as_slice(), 30).unwrap();
        let field = field_autocorrelation(&states, 30).unwrap();
        for (a, b) in field.rho.iter().zip(&single.rho) {
            assert!((a - b).abs() <= 1e-14);
        }

        let two = random(2, 300, 9);
        let ra = sample_autocorrelation(two.row(0).transpose().as_slice(), 20).unwrap();
        let rb = sample_autocorrelation(two.row(1).transpose().as_slice(), 20).unwrap();
        let f = field_autocorrelation(&two, 20).unwrap();
        for k in 0..=20 {
            assert!((f.rho[k] - 0.5 * (ra.rho[k] + rb.rho[k])).abs() <= 1e-15);
        }
    }

    #[test]
    fn field_excludes_constant_rows_and_is_shift_invariant() {
        let mut states = random(5, 200, 10);
        states.row_mut(2).fill(1.5);
        let f = field_autocorrelation(&states, 10).unwrap();
        assert_eq!(f.excluded_rows, 1);
        let mut shifted = states.clone();
        for i in 0..5 {
            shifted.set_row((i + 2) % 5, &states.row(i));
        }
        let g = field_autocorrelation(&shifted, 10).unwrap();
        for (a, b) in f.rho.iter().zip(&g.rho) {
            assert!((a - b).abs() <= 1e-14);
        }
        assert!(field_autocorrelation(&DMatrix::from_element(3, 20, 1.0), 5).is_err());
    }

    #[test]
    fn nace_examples() {
        let full = sample_autocorrelation(random(1, 300, 11).as_slice(), 40).unwrap();
        assert_eq!(nace(&[full.clone()], &[full.clone()]).unwrap(), 0.0);
        let delta = AutocorrSeries { rho: vec![1.0, 0.0, 0.0], source: Source::Full, excluded_rows: 0 };
        let zero = AutocorrSeries { rho: vec![0.0; 3], source: Source::Reduced, excluded_rows: 0 };
        assert_eq!(nace(&[delta.clone()], &[zero.clone()]).unwrap(), 1.0);
        assert!(nace(&[delta.clone()], &[]).is_err());
        let short = AutocorrSeries { rho: vec![1.0], ..delta.clone() };
        assert!(nace(&[delta], &[short]).is_err());
        assert!(nace(&[zero.clone()], &[zero]).is_err());
    }
}
