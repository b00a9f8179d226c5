//! Reduced operators from projected data.
//!
//! Three routes to `(Â, F̂)`:
//! - [`intrusive_reduce`]: Galerkin projection of known full operators;
//! - [`standard_opinf`]: unconstrained least squares, one problem per row;
//! - [`ep_opinf`]: the same fit coupled across rows by the energy-preservation
//!   equalities of [`ConstraintSystem`], solved as a KKT saddle system.
//!
//! Both least-squares routes work in column-scaled coordinates: every column of
//! the data matrix `D` is normalized to unit 2-norm, the problem is compressed
//! by a thin QR of `D S⁻¹`, and the solution is scaled back at the end.

mod kkt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::QuadraticModel;
use crate::pod::{PodBasis, ReducedData};
use crate::tensor_ops::{
    build_constraint_matrix, ep_violation, extract_submodel, vech_index, vech_square_into,
    vech_width, QuadOpCompact, QuadTerm,
};

pub use kkt::{ep_opinf, ep_opinf_with, kkt_diagnostics, KktBackend, KktReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "intrusive")]
    Intrusive,
    #[serde(rename = "opinf")]
    OpInf,
    #[serde(rename = "ep-opinf")]
    EpOpInf,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Intrusive, Method::OpInf, Method::EpOpInf];

    pub fn name(self) -> &'static str {
        match self {
            Method::Intrusive => "intrusive",
            Method::OpInf => "opinf",
            Method::EpOpInf => "ep-opinf",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `min ‖D Õᵀ − R‖²_F` with rows `[x̂ᵀ, vech(x̂ x̂ᵀ)ᵀ]` in `D` and `x̂̇ᵀ` in `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsqSystem {
    pub data: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
    r: usize,
}

impl LsqSystem {
    pub fn new(data: DMatrix<f64>, rhs: DMatrix<f64>) -> Result<Self> {
        let r = rhs.ncols();
        if data.ncols() != r + vech_width(r) || data.nrows() != rhs.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "data matrix {:?} does not fit right-hand side {:?}",
                data.shape(),
                rhs.shape()
            )));
        }
        Ok(Self { data, rhs, r })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn samples(&self) -> usize {
        self.data.nrows()
    }

    /// Unknowns per row of `Õ`.
    pub fn width(&self) -> usize {
        self.r + vech_width(self.r)
    }

    /// `‖D Õᵀ − R‖²_F + ridge ‖Õ‖²_F` for a given model.
    pub fn objective(&self, model: &ReducedModel, ridge: f64) -> f64 {
        let o = model.operator_matrix();
        (&self.data * o.transpose() - &self.rhs).norm_squared() + ridge * o.norm_squared()
    }
}

pub fn assemble_lsq(data: &ReducedData) -> Result<LsqSystem> {
    let (r, k) = data.states.shape();
    if data.derivatives.shape() != (r, k) {
        return Err(Error::DimensionMismatch("reduced states and derivatives differ in shape".into()));
    }
    let w = vech_width(r);
    let mut d = DMatrix::zeros(k, r + w);
    let mut sq = vec![0.0; w];
    for t in 0..k {
        let x = data.states.column(t);
        vech_square_into(x.as_slice(), &mut sq);
        for j in 0..r {
            d[(t, j)] = x[j];
        }
        for (c, &v) in sq.iter().enumerate() {
            d[(t, r + c)] = v;
        }
    }
    LsqSystem::new(d, data.derivatives.transpose())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// `‖D Õᵀ − R‖_F`; zero for intrusive models.
    pub residual_norm: f64,
    /// `‖C vec(F̂)‖_∞` against the full constraint set.
    pub constraint_residual: f64,
    /// 2-norm condition number of the column-scaled data matrix.
    pub condition: f64,
    pub ridge: f64,
    /// KKT multipliers of the energy-preservation constraints, if solved for.
    pub multipliers: Option<Vec<f64>>,
    /// Which constrained solver produced the fit (empty for unconstrained methods).
    pub solver: String,
}

/// `dx̂/dt = Â x̂ + F̂ x̂^[2]` together with how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub a_hat: DMatrix<f64>,
    pub f_hat: QuadOpCompact,
    pub method: Method,
    pub diagnostics: FitDiagnostics,
}

impl ReducedModel {
    pub fn new(a_hat: DMatrix<f64>, f_hat: QuadOpCompact, method: Method) -> Result<Self> {
        let r = f_hat.dim();
        if a_hat.shape() != (r, r) {
            return Err(Error::DimensionMismatch(format!(
                "Â is {:?} but F̂ has dimension {r}",
                a_hat.shape()
            )));
        }
        let mut m = Self { a_hat, f_hat, method, diagnostics: FitDiagnostics::default() };
        m.diagnostics.constraint_residual = m.constraint_residual();
        Ok(m)
    }

    pub fn r(&self) -> usize {
        self.a_hat.nrows()
    }

    /// `Õ = [Â, F̂]`, `r × (r + r(r+1)/2)`.
    pub fn operator_matrix(&self) -> DMatrix<f64> {
        let r = self.r();
        let mut o = DMatrix::zeros(r, r + vech_width(r));
        o.columns_mut(0, r).copy_from(&self.a_hat);
        o.columns_mut(r, vech_width(r)).copy_from(self.f_hat.entries());
        o
    }

    pub fn from_operator_matrix(o: &DMatrix<f64>, method: Method) -> Result<Self> {
        let r = o.nrows();
        if r == 0 || o.ncols() != r + vech_width(r) {
            return Err(Error::DimensionMismatch(format!(
                "operator matrix {:?} is not r × (r + r(r+1)/2)",
                o.shape()
            )));
        }
        let a = o.columns(0, r).into_owned();
        let f = QuadOpCompact::new(o.columns(r, vech_width(r)).into_owned())?;
        Self::new(a, f, method)
    }

    pub fn to_model(&self) -> QuadraticModel {
        QuadraticModel::new(self.a_hat.clone(), QuadTerm::Dense(self.f_hat.clone()))
            .expect("shapes validated at construction")
    }

    pub fn ep_violation(&self) -> f64 {
        ep_violation(&self.f_hat)
    }

    fn constraint_residual(&self) -> f64 {
        build_constraint_matrix(self.r())
            .and_then(|c| c.residual_inf(&self.f_hat))
            .unwrap_or(f64::NAN)
    }

    /// Leading `r'`-dimensional submodel. Fit diagnostics other than the
    /// constraint residual are not carried over.
    pub fn submodel(&self, r_sub: usize) -> Result<Self> {
        let (a, f) = extract_submodel(&self.a_hat, &self.f_hat, r_sub)?;
        let mut m = Self::new(a, f, self.method)?;
        m.diagnostics.ridge = self.diagnostics.ridge;
        Ok(m)
    }
}

/// `Â = V_rᵀ A V_r` and the compact form of `V_rᵀ H (V_r ⊗ V_r)`, computed
/// from the polarized quadratic term `H(u⊗v) + H(v⊗u)` of basis-vector pairs
/// so the `n × n²` operator is never formed.
pub fn intrusive_reduce(model: &QuadraticModel, basis: &PodBasis, r: usize) -> Result<ReducedModel> {
    if basis.n() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows, model has dimension {}",
            basis.n(),
            model.dim()
        )));
    }
    let v = basis.leading(r)?;
    let a_hat = v.transpose() * model.linear() * &v;
    let compact;
    let f_full = match model.quadratic() {
        QuadTerm::Dense(f) => f,
        QuadTerm::Sparse(s) => {
            compact = s;
            return finish_intrusive(a_hat, &v, |u, w, out| polarized_sparse(compact, u, w, out));
        }
    };
    finish_intrusive(a_hat, &v, |u, w, out| polarized_dense(f_full, u, w, out))
}

fn finish_intrusive(
    a_hat: DMatrix<f64>,
    v: &DMatrix<f64>,
    polarized: impl Fn(&[f64], &[f64], &mut [f64]),
) -> Result<ReducedModel> {
    let (n, r) = v.shape();
    let mut f = DMatrix::zeros(r, vech_width(r));
    let mut buf = vec![0.0; n];
    for k in 0..r {
        for j in k..r {
            polarized(v.column(j).as_slice(), v.column(k).as_slice(), &mut buf);
            // j == k gives 2 H(v⊗v); the compact entry is H(v⊗v).
            let s = if j == k { 0.5 } else { 1.0 };
            let proj = v.transpose() * DVector::from_column_slice(&buf);
            for i in 0..r {
                f[(i, vech_index(r, j, k))] = s * proj[i];
            }
        }
    }
    ReducedModel::new(a_hat, QuadOpCompact::new(f)?, Method::Intrusive)
}

/// `Σ_{j>=k} f_ijk (u_j w_k + u_k w_j)`, i.e. `H(u⊗w) + H(w⊗u)`.
fn polarized_sparse(f: &crate::tensor_ops::SparseQuadOp, u: &[f64], w: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = f.row(i).map(|((j, k), v)| v * (u[j] * w[k] + u[k] * w[j])).sum();
    }
}

fn polarized_dense(f: &QuadOpCompact, u: &[f64], w: &[f64], out: &mut [f64]) {
    let n = f.dim();
    out.iter_mut().for_each(|o| *o = 0.0);
    for k in 0..n {
        for j in k..n {
            let m = u[j] * w[k] + u[k] * w[j];
            if m != 0.0 {
                let col = f.entries().column(vech_index(n, j, k));
                for (o, &c) in out.iter_mut().zip(col.iter()) {
                    *o += c * m;
                }
            }
        }
    }
}

/// Column-scaled, QR-compressed form of an `LsqSystem` (plus ridge rows).
pub(crate) struct ScaledLsq {
    /// Column norms of `D` (1 for zero columns).
    pub scale: DVector<f64>,
    /// Upper-triangular `p × p` factor of `[D S⁻¹; √ridge S⁻¹]`.
    pub r_factor: DMatrix<f64>,
    /// Leading `p` rows of `Qᵀ [R; 0]`.
    pub qt_rhs: DMatrix<f64>,
    pub condition: f64,
    pub rank_deficient: bool,
}

impl ScaledLsq {
    pub fn new(sys: &LsqSystem, ridge: f64) -> Result<Self> {
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {ridge}")));
        }
        let aug = Self::augmented(sys, ridge);
        let p = sys.width();
        let scale = Self::column_scale(sys);
        let (rows, r) = (aug.nrows(), sys.r());
        let mut rhs = DMatrix::zeros(rows, r);
        rhs.rows_mut(0, sys.samples()).copy_from(&sys.rhs);

        let qr = aug.qr();
        let r_factor = qr.r().rows(0, p).upper_triangle();
        qr.q_tr_mul(&mut rhs);
        let qt_rhs = rhs.rows(0, p).into_owned();

        let sv = r_factor.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let tol = rows.max(p) as f64 * f64::EPSILON * smax;
        let rank_deficient = !(smin > tol);
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        Ok(Self { scale, r_factor, qt_rhs, condition, rank_deficient })
    }

    fn column_scale(sys: &LsqSystem) -> DVector<f64> {
        DVector::from_iterator(
            sys.width(),
            sys.data.column_iter().map(|c| {
                let nrm = c.norm();
                if nrm > 0.0 {
                    nrm
                } else {
                    1.0
                }
            }),
        )
    }

    /// `[D S⁻¹; √ridge S⁻¹]`, padded with zero rows up to at least `p` rows.
    pub fn augmented(sys: &LsqSystem, ridge: f64) -> DMatrix<f64> {
        let p = sys.width();
        let scale = Self::column_scale(sys);
        let k = sys.samples();
        let extra = if ridge > 0.0 { p } else { 0 };
        let rows = (k + extra).max(p);
        let mut aug = DMatrix::zeros(rows, p);
        for c in 0..p {
            for t in 0..k {
                aug[(t, c)] = sys.data[(t, c)] / scale[c];
            }
            if ridge > 0.0 {
                aug[(k + c, c)] = ridge.sqrt() / scale[c];
            }
        }
        aug
    }

    /// Unconstrained solution in scaled coordinates, `p × r`.
    pub fn unconstrained(&self, sys: &LsqSystem, ridge: f64) -> Result<DMatrix<f64>> {
        if !self.rank_deficient {
            return self.r_factor.solve_upper_triangular(&self.qt_rhs).ok_or_else(|| {
                Error::SingularSystem("triangular factor of the data matrix is singular".into())
            });
        }
        // Minimum-norm solution through the SVD of the scaled system.
        let aug = Self::augmented(sys, ridge);
        let mut rhs = DMatrix::zeros(aug.nrows(), sys.r());
        rhs.rows_mut(0, sys.samples()).copy_from(&sys.rhs);
        let dims = aug.nrows().max(aug.ncols()) as f64;
        let svd = aug.svd(true, true);
        let tol = dims * f64::EPSILON * svd.singular_values.max();
        svd.solve(&rhs, tol).map_err(|e| Error::SingularSystem(e.to_string()))
    }

    /// Scaled `p × r` solution back to a model in original coordinates.
    pub fn unscale(&self, scaled: &DMatrix<f64>, method: Method) -> Result<ReducedModel> {
        let mut ot = scaled.clone();
        for (c, mut row) in ot.row_iter_mut().enumerate() {
            row /= self.scale[c];
        }
        ReducedModel::from_operator_matrix(&ot.transpose(), method)
    }
}

/// Unconstrained operator inference. Rank-deficient systems with `ridge = 0`
/// get the minimum-norm solution (in column-scaled coordinates).
pub fn standard_opinf(sys: &LsqSystem, ridge: f64) -> Result<ReducedModel> {
    let prob = ScaledLsq::new(sys, ridge)?;
    let o = prob.unconstrained(sys, ridge)?;
    let mut model = prob.unscale(&o, Method::OpInf)?;
    model.diagnostics.residual_norm = sys.objective(&model, 0.0).sqrt();
    model.diagnostics.condition = prob.condition;
    model.diagnostics.ridge = ridge;
    Ok(model)
}
