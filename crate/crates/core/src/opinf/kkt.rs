//! Energy-preserving operator inference as an equality-constrained least
//! squares problem.
//!
//! Every row `õ_i` of the scaled operator matrix sees the same triangular
//! factor `R` of the data, so the KKT system
//!
//! ```text
//! 2 RᵀR õ_i + C_iᵀ λ = 2 Rᵀ c_i      (i = 1..r)
//! Σ_i C_i õ_i        = 0
//! ```
//!
//! is reduced to the multipliers alone: with `E_i = R⁻ᵀ C_iᵀ` the Schur
//! complement is `S = Σ_i E_iᵀ E_i` and `λ = 2 S⁻¹ Σ_i C_i R⁻¹ c_i`. The
//! block-diagonal Hessian is never formed. A singular `R` falls back to a
//! dense LU of the whole saddle matrix. When `R` is so badly conditioned that
//! the Schur solve misses the constraint set, small problems are re-solved on
//! the null space of the constraints and large ones are projected onto it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LsqSystem, Method, ReducedModel, ScaledLsq};
use crate::error::{Error, Result};
use crate::tensor_ops::{vech_width, ConstraintSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KktBackend {
    /// Schur complement on the multipliers (dense saddle LU if `R` is singular).
    #[default]
    Direct,
    /// Minimize over an orthonormal basis of `null(C)`. Dense and slow; meant
    /// for cross-checking small instances.
    NullSpace,
}

pub fn ep_opinf(sys: &LsqSystem, constraints: &ConstraintSystem, ridge: f64) -> Result<ReducedModel> {
    ep_opinf_with(sys, constraints, ridge, KktBackend::Direct)
}

pub fn ep_opinf_with(
    sys: &LsqSystem,
    constraints: &ConstraintSystem,
    ridge: f64,
    backend: KktBackend,
) -> Result<ReducedModel> {
    if constraints.dim() != sys.r() {
        return Err(Error::DimensionMismatch(format!(
            "constraints are for r = {}, data for r = {}",
            constraints.dim(),
            sys.r()
        )));
    }
    let prob = ScaledLsq::new(sys, ridge)?;
    let blocks = ScaledConstraints::new(constraints, &prob.scale, sys.r());

    let (o, lambda, path) = if constraints.nrows() == 0 {
        (prob.unconstrained(sys, ridge)?, Vec::new(), SolvePath::Unconstrained)
    } else {
        match backend {
            KktBackend::Direct if prob.rank_deficient => {
                let (o, l) = dense_saddle(&prob, &blocks)?;
                (o, l, SolvePath::DenseSaddle)
            }
            KktBackend::Direct => {
                let small = blocks.p * blocks.rows.len() <= NULL_SPACE_LIMIT;
                match SchurSolver::new(&prob, &blocks).map(|s| s.solve()) {
                    Ok((o, l)) if feasible(&prob, &blocks, &o) => (o, l, SolvePath::Schur),
                    _ if small => {
                        let (o, l) = null_space(&prob, &blocks)?;
                        (o, l, SolvePath::NullSpace)
                    }
                    Ok((o, l)) => (o, l, SolvePath::SchurProjected),
                    Err(e) => return Err(e),
                }
            }
            KktBackend::NullSpace => {
                let (o, l) = null_space(&prob, &blocks)?;
                (o, l, SolvePath::NullSpace)
            }
        }
    };

    let mut model = prob.unscale(&o, Method::EpOpInf)?;
    if path == SolvePath::SchurProjected {
        model = ReducedModel::new(model.a_hat, constraints.project(&model.f_hat)?, Method::EpOpInf)?;
    }
    model.diagnostics.residual_norm = sys.objective(&model, 0.0).sqrt();
    model.diagnostics.condition = prob.condition;
    model.diagnostics.ridge = ridge;
    model.diagnostics.multipliers = Some(lambda);
    model.diagnostics.solver = path.name().to_string();
    Ok(model)
}

/// Largest number of unknowns for which the dense null-space fallback runs.
const NULL_SPACE_LIMIT: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SolvePath {
    Unconstrained,
    Schur,
    DenseSaddle,
    NullSpace,
    /// Schur solution that lost feasibility, projected onto the constraint set.
    SchurProjected,
}

impl SolvePath {
    fn name(self) -> &'static str {
        match self {
            SolvePath::Unconstrained => "unconstrained",
            SolvePath::Schur => "schur",
            SolvePath::DenseSaddle => "dense-saddle",
            SolvePath::NullSpace => "null-space",
            SolvePath::SchurProjected => "schur-projected",
        }
    }
}

/// `‖C vec(F̂)‖_∞` small against the largest quadratic entry.
fn feasible(prob: &ScaledLsq, blocks: &ScaledConstraints, o: &DMatrix<f64>) -> bool {
    let r = blocks.rows.len();
    let f_max = (r..blocks.p)
        .flat_map(|q| o.row(q).iter().map(move |v| (v / prob.scale[q]).abs()).collect::<Vec<_>>())
        .fold(0.0f64, f64::max);
    let residual = blocks.apply(o).amax();
    residual <= 1e-11 * f_max.max(f64::MIN_POSITIVE)
}

/// Constraint rows expressed in the scaled unknowns, grouped by the row of
/// `Õ` they touch.
struct ScaledConstraints {
    m: usize,
    p: usize,
    /// Per block: global constraint indices touching it.
    rows: Vec<Vec<usize>>,
    /// Per block: `C_iᵀ` restricted to `rows[i]`, `p × rows[i].len()`.
    ct: Vec<DMatrix<f64>>,
}

impl ScaledConstraints {
    fn new(c: &ConstraintSystem, scale: &DVector<f64>, r: usize) -> Self {
        let w = vech_width(r);
        let p = r + w;
        let mut entries: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); r];
        for row in 0..c.nrows() {
            for (col, v) in c.row(row) {
                let (block, q) = (col / w, r + col % w);
                entries[block].push((row, q, v / scale[q]));
            }
        }
        let mut rows = Vec::with_capacity(r);
        let mut ct = Vec::with_capacity(r);
        for list in entries {
            let mut ids: Vec<usize> = list.iter().map(|e| e.0).collect();
            ids.sort_unstable();
            ids.dedup();
            let mut m = DMatrix::zeros(p, ids.len());
            for (row, q, v) in list {
                let local = ids.binary_search(&row).expect("row was collected");
                m[(q, local)] += v;
            }
            rows.push(ids);
            ct.push(m);
        }
        Self { m: c.nrows(), p, rows, ct }
    }

    /// `Σ_i C_i o_i` for a `p × r` matrix of scaled rows.
    fn apply(&self, o: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (i, (ids, ct)) in self.rows.iter().zip(&self.ct).enumerate() {
            let local = ct.tr_mul(&o.column(i));
            for (&g, v) in ids.iter().zip(local.iter()) {
                out[g] += v;
            }
        }
        out
    }

    /// Block `i` of `Cᵀ λ`.
    fn transpose_block(&self, i: usize, lambda: &DVector<f64>) -> DVector<f64> {
        let local = DVector::from_iterator(self.rows[i].len(), self.rows[i].iter().map(|&g| lambda[g]));
        &self.ct[i] * local
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let r = self.rows.len();
        let mut c = DMatrix::zeros(self.m, r * self.p);
        for i in 0..r {
            for (local, &g) in self.rows[i].iter().enumerate() {
                for q in 0..self.p {
                    c[(g, i * self.p + q)] = self.ct[i][(q, local)];
                }
            }
        }
        c
    }
}

enum SchurFactor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurFactor {
    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            SchurFactor::Cholesky(ch) => ch.solve(b),
            SchurFactor::Lu(lu) => lu.solve(b).unwrap_or_else(|| DVector::from_element(b.len(), f64::NAN)),
        }
    }
}

struct SchurSolver<'a> {
    prob: &'a ScaledLsq,
    blocks: &'a ScaledConstraints,
    e: Vec<DMatrix<f64>>,
    s: SchurFactor,
}

impl<'a> SchurSolver<'a> {
    fn new(prob: &'a ScaledLsq, blocks: &'a ScaledConstraints) -> Result<Self> {
        let singular = || Error::SingularKkt("triangular data factor is singular".into());
        let mut e = Vec::with_capacity(blocks.ct.len());
        let mut s = DMatrix::zeros(blocks.m, blocks.m);
        for (ids, ct) in blocks.rows.iter().zip(&blocks.ct) {
            let ei = prob.r_factor.tr_solve_upper_triangular(ct).ok_or_else(singular)?;
            let local = ei.tr_mul(&ei);
            for (a, &ga) in ids.iter().enumerate() {
                for (b, &gb) in ids.iter().enumerate() {
                    s[(ga, gb)] += local[(a, b)];
                }
            }
            e.push(ei);
        }
        let factor = match s.clone().cholesky() {
            Some(ch) => SchurFactor::Cholesky(ch),
            None => {
                let lu = s.lu();
                let d = lu.u().diagonal();
                let (max, min) = (d.amax(), d.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())));
                if !(min > blocks.m as f64 * f64::EPSILON * max) {
                    return Err(Error::SingularKkt(
                        "constraint Schur complement is singular".into(),
                    ));
                }
                SchurFactor::Lu(lu)
            }
        };
        Ok(Self { prob, blocks, e, s: factor })
    }

    /// Solves the saddle system for right-hand side `(g, h)` given
    /// `y = (2RᵀR)⁻¹ g` blockwise.
    fn solve_from(&self, y: DMatrix<f64>, h: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let lambda = self.s.solve(&(self.blocks.apply(&y) - h)) * 2.0;
        let mut o = y;
        for (i, (ids, ei)) in self.blocks.rows.iter().zip(&self.e).enumerate() {
            let local = DVector::from_iterator(ids.len(), ids.iter().map(|&g| lambda[g]));
            let corr = self
                .prob
                .r_factor
                .solve_upper_triangular(&(ei * local))
                .expect("factor was checked nonsingular");
            o.column_mut(i).axpy(-0.5, &corr, 1.0);
        }
        (o, lambda)
    }

    fn solve(&self) -> (DMatrix<f64>, Vec<f64>) {
        let rf = &self.prob.r_factor;
        let c = &self.prob.qt_rhs;
        let y = rf.solve_upper_triangular(c).expect("factor was checked nonsingular");
        let (mut o, mut lambda) = self.solve_from(y, &DVector::zeros(self.blocks.m));

        for _ in 0..2 {
            let mut g = rf.tr_mul(&(c - rf * &o)) * 2.0;
            for i in 0..o.ncols() {
                let ct_l = self.blocks.transpose_block(i, &lambda);
                g.column_mut(i).axpy(-1.0, &ct_l, 1.0);
            }
            let h = -self.blocks.apply(&o);
            let y = rf
                .solve_upper_triangular(&rf.tr_solve_upper_triangular(&g).expect("nonsingular"))
                .expect("nonsingular")
                * 0.5;
            let (d_o, d_l) = self.solve_from(y, &h);
            o += d_o;
            lambda += d_l;
        }
        (o, lambda.iter().copied().collect())
    }
}

/// Stacked `p·r` vector of scaled rows, block `i` at `i·p`.
fn stack(o: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(o.as_slice())
}

fn unstack(v: &DVector<f64>, p: usize, r: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(p, r, &v.as_slice()[..p * r])
}

/// Full saddle matrix `[2 blkdiag(RᵀR), Cᵀ; C, 0]` and LU.
fn dense_saddle(prob: &ScaledLsq, blocks: &ScaledConstraints) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (p, r, m) = (blocks.p, blocks.rows.len(), blocks.m);
    let n = p * r;
    let g = prob.r_factor.tr_mul(&prob.r_factor) * 2.0;
    let c = blocks.to_dense();
    let mut k = DMatrix::zeros(n + m, n + m);
    for i in 0..r {
        k.view_mut((i * p, i * p), (p, p)).copy_from(&g);
    }
    k.view_mut((n, 0), (m, n)).copy_from(&c);
    k.view_mut((0, n), (n, m)).copy_from(&c.transpose());

    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&stack(&(prob.r_factor.tr_mul(&prob.qt_rhs) * 2.0)));

    let lu = k.clone().lu();
    let d = lu.u().diagonal();
    let (max, min) = (d.amax(), d.iter().fold(f64::INFINITY, |a, v| a.min(v.abs())));
    let singular = || {
        Error::SingularKkt(
            "KKT matrix is singular (rank-deficient data)".into(),
        )
    };
    if !(min > (n + m) as f64 * f64::EPSILON * max) {
        return Err(singular());
    }
    let mut x = lu.solve(&rhs).ok_or_else(singular)?;
    for _ in 0..2 {
        let res = &rhs - &k * &x;
        x += lu.solve(&res).ok_or_else(singular)?;
    }
    if !((&k * &x - &rhs).amax() <= 1e-8 * rhs.amax().max(f64::MIN_POSITIVE)) {
        return Err(singular());
    }
    Ok((unstack(&x, p, r), x.rows(n, m).iter().copied().collect()))
}

/// `õ = S Z t` with `Z` an orthonormal basis of the null space of the
/// unscaled constraint matrix and `S` the column scaling, `t` the min-norm
/// least-squares solution of `blkdiag(R) S Z t ≈ c`. Working with the unscaled
/// constraints keeps the fit feasible however uneven the scaling is.
/// Multipliers are recovered from stationarity.
fn null_space(prob: &ScaledLsq, blocks: &ScaledConstraints) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (p, r) = (blocks.p, blocks.rows.len());
    let n = p * r;
    let c_scaled = blocks.to_dense();
    let mut c = c_scaled.clone();
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col *= prob.scale[j % p];
    }
    let eig = (c.tr_mul(&c)).symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let null: Vec<usize> = (0..n).filter(|&j| eig.eigenvalues[j] <= 1e-10 * top).collect();
    if null.len() != n - blocks.m {
        return Err(Error::SingularKkt(format!(
            "constraint matrix has null space of dimension {}, expected {}",
            null.len(),
            n - blocks.m
        )));
    }
    let mut z = eig.eigenvectors.select_columns(&null);
    for (j, mut row) in z.row_iter_mut().enumerate() {
        row *= prob.scale[j % p];
    }

    let mut bz = DMatrix::zeros(n, z.ncols());
    for i in 0..r {
        let zi = z.rows(i * p, p);
        bz.rows_mut(i * p, p).copy_from(&(&prob.r_factor * zi));
    }
    let target = stack(&prob.qt_rhs);
    let svd = bz.svd(true, true);
    let tol = n as f64 * f64::EPSILON * svd.singular_values.max();
    let t = svd.solve(&target, tol).map_err(|e| Error::SingularKkt(e.to_string()))?;
    let o = unstack(&(&z * t), p, r);

    let g = stack(&(prob.r_factor.tr_mul(&(&prob.qt_rhs - &prob.r_factor * &o)) * 2.0));
    let ct = c_scaled.transpose().svd(true, true);
    let tol = n as f64 * f64::EPSILON * ct.singular_values.max();
    let lambda = ct.solve(&g, tol).map_err(|e| Error::SingularKkt(e.to_string()))?;
    Ok((o, lambda.iter().copied().collect()))
}

/// Post-solve optimality check of a constrained fit, in original coordinates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `‖2Dᵀ(DÕᵀ − R) + 2 ridge Õᵀ + Cᵀλ‖_∞`.
    pub stationarity: f64,
    /// `‖DᵀR‖_∞`, the natural size of the gradient terms.
    pub scale: f64,
    /// `‖C vec(F̂)‖_∞`.
    pub primal_feasibility: f64,
    pub multiplier_inf_norm: f64,
    pub multiplier_two_norm: f64,
    /// Whether `λ` came from the fit (`false`: least-squares estimate).
    pub stored_multipliers: bool,
}

pub fn kkt_diagnostics(
    model: &ReducedModel,
    sys: &LsqSystem,
    constraints: &ConstraintSystem,
) -> Result<KktReport> {
    let r = sys.r();
    if model.r() != r || constraints.dim() != r {
        return Err(Error::DimensionMismatch(format!(
            "model r = {}, data r = {r}, constraints r = {}",
            model.r(),
            constraints.dim()
        )));
    }
    let ridge = model.diagnostics.ridge;
    let ot = model.operator_matrix().transpose();
    let d = &sys.data;
    let mut grad = d.tr_mul(&(d * &ot - &sys.rhs)) * 2.0 + &ot * (2.0 * ridge);

    let w = vech_width(r);
    let m = constraints.nrows();
    let stored = model.diagnostics.multipliers.as_ref().filter(|l| l.len() == m);
    let lambda = match stored {
        Some(l) => DVector::from_column_slice(l),
        None if m == 0 => DVector::zeros(0),
        None => {
            // Best λ for the given point: min ‖grad_F + Cᵀλ‖.
            let c = constraints.to_dense();
            let gf = DVector::from_iterator(
                r * w,
                (0..r).flat_map(|i| (0..w).map(move |cc| (i, cc))).map(|(i, cc)| grad[(r + cc, i)]),
            );
            let svd = c.transpose().svd(true, true);
            let tol = (r * w) as f64 * f64::EPSILON * svd.singular_values.max();
            -svd.solve(&gf, tol).map_err(|e| Error::SingularKkt(e.to_string()))?
        }
    };
    for row in 0..m {
        for (col, v) in constraints.row(row) {
            grad[(r + col % w, col / w)] += v * lambda[row];
        }
    }
    Ok(KktReport {
        stationarity: grad.amax(),
        scale: d.tr_mul(&sys.rhs).amax(),
        primal_feasibility: constraints.residual_inf(&model.f_hat)?,
        multiplier_inf_norm: lambda.amax(),
        multiplier_two_norm: lambda.norm(),
        stored_multipliers: stored.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opinf::{assemble_lsq, standard_opinf};
    use crate::pod::ReducedData;
    use crate::tensor_ops::{build_constraint_matrix, QuadOpCompact};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn model(r: usize, ep: bool, rng: &mut ChaCha8Rng) -> ReducedModel {
        let mut f = QuadOpCompact::new(random(r, vech_width(r), rng)).unwrap();
        if ep {
            f = build_constraint_matrix(r).unwrap().project(&f).unwrap();
        }
        ReducedModel::new(random(r, r, rng) * 0.5, f, Method::Intrusive).unwrap()
    }

    fn data(m: &ReducedModel, k: usize, rng: &mut ChaCha8Rng) -> LsqSystem {
        let states = random(m.r(), k, rng) * 2.0;
        let q = m.to_model();
        let mut d = DMatrix::zeros(m.r(), k);
        for (t, c) in states.column_iter().enumerate() {
            d.set_column(t, &q.rhs(&c.into_owned()));
        }
        assemble_lsq(&ReducedData { states, derivatives: d }).unwrap()
    }

    /// Solves the full KKT system in original coordinates with a dense LU.
    fn oracle(sys: &LsqSystem, c: &ConstraintSystem, ridge: f64) -> DMatrix<f64> {
        let (r, p, w) = (sys.r(), sys.width(), vech_width(sys.r()));
        let n = r * p;
        let m = c.nrows();
        let mut k = DMatrix::zeros(n + m, n + m);
        let mut rhs = DVector::zeros(n + m);
        let g = sys.data.tr_mul(&sys.data) * 2.0 + DMatrix::identity(p, p) * (2.0 * ridge);
        let b = sys.data.tr_mul(&sys.rhs) * 2.0;
        for i in 0..r {
            k.view_mut((i * p, i * p), (p, p)).copy_from(&g);
            rhs.rows_mut(i * p, p).copy_from(&b.column(i));
        }
        for row in 0..m {
            for (col, v) in c.row(row) {
                let idx = (col / w) * p + r + col % w;
                k[(n + row, idx)] = v;
                k[(idx, n + row)] = v;
            }
        }
        let x = k.lu().solve(&rhs).unwrap();
        DMatrix::from_column_slice(p, r, &x.as_slice()[..n]).transpose()
    }

    #[test]
    fn ep_data_agrees_with_standard_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for r in [2, 3, 5] {
            let truth = model(r, true, &mut rng);
            let sys = data(&truth, 300, &mut rng);
            let c = build_constraint_matrix(r).unwrap();
            let ep = ep_opinf(&sys, &c, 0.0).unwrap();
            let st = standard_opinf(&sys, 0.0).unwrap();
            assert!((ep.operator_matrix() - st.operator_matrix()).amax() <= 1e-6);
            assert!(ep.ep_violation() <= 1e-10 && st.ep_violation() <= 1e-10);
            let rep = kkt_diagnostics(&ep, &sys, &c).unwrap();
            assert!(rep.multiplier_inf_norm <= 1e-6 * rep.scale, "{rep:?}");
            assert!(rep.stationarity <= 1e-8 * rep.scale);
        }
    }

    #[test]
    fn non_ep_data_costs_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for r in [2, 4, 6] {
            let truth = model(r, false, &mut rng);
            let sys = data(&truth, 200, &mut rng);
            let c = build_constraint_matrix(r).unwrap();
            let ep = ep_opinf(&sys, &c, 0.0).unwrap();
            let st = standard_opinf(&sys, 0.0).unwrap();
            assert!(ep.diagnostics.residual_norm > st.diagnostics.residual_norm);
            assert!(ep.ep_violation() <= 1e-10, "{:e}", ep.ep_violation());
            assert!(c.residual_inf(&ep.f_hat).unwrap() <= 1e-10);
            assert!(sys.objective(&ep, 0.0) >= sys.objective(&st, 0.0));
            let rep = kkt_diagnostics(&ep, &sys, &c).unwrap();
            assert!(rep.stationarity <= 1e-8 * rep.scale, "{rep:?}");
            assert!(rep.multiplier_inf_norm > 1e-3);
        }
    }

    #[test]
    fn matches_dense_kkt_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (r, ridge) in [(2, 0.0), (3, 0.0), (3, 0.5), (4, 1e-3)] {
            let truth = model(r, false, &mut rng);
            let sys = data(&truth, 60, &mut rng);
            let c = build_constraint_matrix(r).unwrap();
            let ep = ep_opinf(&sys, &c, ridge).unwrap();
            let o = oracle(&sys, &c, ridge);
            assert!((ep.operator_matrix() - &o).amax() <= 1e-8 * o.amax(), "r = {r}");
        }
    }

    #[test]
    fn null_space_backend_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for r in [1, 2, 3, 4] {
            let truth = model(r, false, &mut rng);
            let sys = data(&truth, 50, &mut rng);
            let c = build_constraint_matrix(r).unwrap();
            let a = ep_opinf_with(&sys, &c, 0.0, KktBackend::Direct).unwrap();
            let b = ep_opinf_with(&sys, &c, 0.0, KktBackend::NullSpace).unwrap();
            let scale = a.operator_matrix().amax();
            assert!((a.operator_matrix() - b.operator_matrix()).amax() <= 1e-9 * scale);
            let (la, lb) = (a.diagnostics.multipliers.unwrap(), b.diagnostics.multipliers.unwrap());
            let lmax = la.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(la.iter().zip(&lb).all(|(x, y)| (x - y).abs() <= 1e-6 * lmax.max(1.0)));
        }
    }

    #[test]
    fn scalar_case_forces_zero_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let states = random(1, 30, &mut rng);
        let derivs = random(1, 30, &mut rng);
        let sys = assemble_lsq(&ReducedData { states: states.clone(), derivatives: derivs.clone() }).unwrap();
        let c = build_constraint_matrix(1).unwrap();
        let m = ep_opinf(&sys, &c, 0.0).unwrap();
        assert!(m.f_hat.f(0, 0, 0).abs() <= 1e-14);
        let a = states.dot(&derivs) / states.norm_squared();
        assert!((m.a_hat[(0, 0)] - a).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn empty_constraints_reproduce_standard_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for (k, ridge) in [(100, 0.0), (8, 0.0), (40, 0.3)] {
            let truth = model(3, false, &mut rng);
            let sys = data(&truth, k, &mut rng);
            let ep = ep_opinf(&sys, &ConstraintSystem::empty(3), ridge).unwrap();
            let st = standard_opinf(&sys, ridge).unwrap();
            assert_eq!(ep.operator_matrix(), st.operator_matrix());
        }
    }

    #[test]
    fn rank_deficient_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let truth = model(3, false, &mut rng);
        let sys = data(&truth, 6, &mut rng);
        let c = build_constraint_matrix(3).unwrap();
        // 6 samples, 9 unknowns per row: only ridge makes it well posed.
        match ep_opinf(&sys, &c, 0.0) {
            Ok(m) => assert!(c.residual_inf(&m.f_hat).unwrap() <= 1e-10),
            Err(e) => assert!(matches!(e, Error::SingularKkt(_))),
        }
        let m = ep_opinf(&sys, &c, 1e-2).unwrap();
        assert!(m.ep_violation() <= 1e-10);
        let o = oracle(&sys, &c, 1e-2);
        assert!((m.operator_matrix() - &o).amax() <= 1e-8 * o.amax());
    }

    #[test]
    fn nearly_collinear_states_stay_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for delta in [1e-4, 1e-6, 1e-8] {
            let mut states = random(4, 120, &mut rng);
            for t in 0..120 {
                states[(3, t)] = states[(0, t)] + states[(1, t)] + delta * rng.random_range(-1.0..1.0);
            }
            let derivatives = random(4, 120, &mut rng);
            let sys = assemble_lsq(&ReducedData { states, derivatives }).unwrap();
            let c = build_constraint_matrix(4).unwrap();
            let m = match ep_opinf(&sys, &c, 0.0) {
                Ok(m) => m,
                // At this level the data are numerically rank deficient in
                // unconstrained directions; the KKT matrix is singular.
                Err(Error::SingularKkt(_)) if delta < 1e-7 => continue,
                Err(e) => panic!("delta {delta}: {e}"),
            };
            let scale = m.f_hat.entries().amax().max(1.0);
            assert!(c.residual_inf(&m.f_hat).unwrap() <= 1e-11 * scale, "delta {delta}: {}", m.diagnostics.solver);
            let reference = ep_opinf_with(&sys, &c, 0.0, KktBackend::NullSpace).unwrap();
            let (a, b) = (sys.objective(&m, 0.0), sys.objective(&reference, 0.0));
            assert!(a <= b * (1.0 + 1e-6) + 1e-12, "delta {delta}: {a:e} vs {b:e}");
        }
    }

    #[test]
    fn zero_data_with_ridge() {
        let sys = assemble_lsq(&ReducedData { states: DMatrix::zeros(3, 10), derivatives: DMatrix::zeros(3, 10) })
            .unwrap();
        let c = build_constraint_matrix(3).unwrap();
        let m = ep_opinf(&sys, &c, 1.0).unwrap();
        assert_eq!(m.operator_matrix().amax(), 0.0);
        let rep = kkt_diagnostics(&m, &sys, &c).unwrap();
        assert_eq!((rep.stationarity, rep.primal_feasibility, rep.multiplier_inf_norm), (0.0, 0.0, 0.0));
    }

    #[test]
    fn dimension_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let sys = data(&model(3, false, &mut rng), 40, &mut rng);
        assert!(ep_opinf(&sys, &build_constraint_matrix(2).unwrap(), 0.0).is_err());
        assert!(ep_opinf(&sys, &build_constraint_matrix(3).unwrap(), -1.0).is_err());
    }
}
