use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linsolve::{Factorization, SparseRows};
use super::QuadraticModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `(I − Δt A) x⁺ = x + Δt q(x)`.
    SemiImplicitEuler,
    /// Crank–Nicolson on `A`, second-order Adams–Bashforth on the quadratic term.
    Cnab2,
}

/// Fixed-step integrator for one model; factors its implicit matrix once.
pub struct Integrator<'a> {
    model: &'a QuadraticModel,
    scheme: Scheme,
    dt: f64,
    solver: Factorization,
    explicit: Option<SparseRows>,
    q: Vec<f64>,
    q_prev: Option<Vec<f64>>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(model: &'a QuadraticModel, scheme: Scheme, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let n = model.dim();
        let id = DMatrix::<f64>::identity(n, n);
        let (implicit, explicit) = match scheme {
            Scheme::SemiImplicitEuler => (&id - model.linear() * dt, None),
            Scheme::Cnab2 => {
                let half = model.linear() * (0.5 * dt);
                (&id - &half, Some(SparseRows::from_dense(&(&id + &half))))
            }
        };
        Ok(Self {
            model,
            scheme,
            dt,
            solver: Factorization::new(implicit)?,
            explicit,
            q: vec![0.0; n],
            q_prev: None,
            rhs: vec![0.0; n],
            scratch: Vec::new(),
        })
    }

    /// Sets the previous quadratic evaluation used by the Adams–Bashforth
    /// extrapolation. Without it the first step uses `q(x)` itself.
    pub fn set_previous_quadratic(&mut self, q_prev: &[f64]) {
        self.q_prev = Some(q_prev.to_vec());
    }

    /// Quadratic term at the state passed to the last [`Integrator::step`].
    pub fn last_quadratic(&self) -> &[f64] {
        &self.q
    }

    pub fn step(&mut self, x: &mut [f64]) {
        let dt = self.dt;
        self.model.quadratic().apply_into(x, &mut self.scratch, &mut self.q);
        match self.scheme {
            Scheme::SemiImplicitEuler => {
                for ((r, &xi), &qi) in self.rhs.iter_mut().zip(x.iter()).zip(&self.q) {
                    *r = xi + dt * qi;
                }
            }
            Scheme::Cnab2 => {
                let explicit = self.explicit.as_ref().expect("CN/AB2 keeps I + Δt/2 A");
                explicit.mul_into(x, &mut self.rhs);
                let q_prev = self.q_prev.get_or_insert_with(|| self.q.clone());
                for ((r, &qi), qp) in self.rhs.iter_mut().zip(&self.q).zip(q_prev.iter_mut()) {
                    *r += dt * (1.5 * qi - 0.5 * *qp);
                    *qp = qi;
                }
            }
        }
        self.solver.solve_in_place(&mut self.rhs);
        x.copy_from_slice(&self.rhs);
    }
}

pub fn step_semi_implicit_euler(model: &QuadraticModel, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    let mut it = Integrator::new(model, Scheme::SemiImplicitEuler, dt)?;
    let mut out = x.clone();
    it.step(out.as_mut_slice());
    Ok(out)
}

/// One CN/AB2 step. Returns the new state and `q(x)` for the next call.
pub fn step_cnab2(
    model: &QuadraticModel,
    x: &DVector<f64>,
    q_prev: &DVector<f64>,
    dt: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let mut it = Integrator::new(model, Scheme::Cnab2, dt)?;
    it.set_previous_quadratic(q_prev.as_slice());
    let mut out = x.clone();
    it.step(out.as_mut_slice());
    let q = DVector::from_column_slice(it.last_quadratic());
    Ok((out, q))
}

/// Paired state and time-derivative snapshots from one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub states: DMatrix<f64>,
    pub derivatives: DMatrix<f64>,
    pub times: Vec<f64>,
    pub dt: f64,
    pub stride: usize,
    pub ic_params: BTreeMap<String, f64>,
}

impl SnapshotSet {
    pub fn new(
        states: DMatrix<f64>,
        derivatives: DMatrix<f64>,
        times: Vec<f64>,
        dt: f64,
        stride: usize,
        ic_params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        if states.shape() != derivatives.shape() {
            return Err(Error::DimensionMismatch(format!(
                "states are {:?} but derivatives are {:?}",
                states.shape(),
                derivatives.shape()
            )));
        }
        if times.len() != states.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} sample times for {} snapshots",
                times.len(),
                states.ncols()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
        }
        Ok(Self { states, derivatives, times, dt, stride, ic_params })
    }

    pub fn n(&self) -> usize {
        self.states.nrows()
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }

    /// Replaces the derivatives by finite differences of the stored states.
    pub fn with_finite_difference_derivatives(mut self) -> Result<Self> {
        self.derivatives = finite_difference_derivatives(&self.states, self.dt * self.stride as f64)?;
        Ok(self)
    }
}

fn step_count(dt: f64, final_time: f64) -> Result<usize> {
    if !(final_time > 0.0 && final_time.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be positive, got {final_time}")));
    }
    let steps = (final_time / dt).round();
    if (steps * dt - final_time).abs() > 1e-9 * final_time {
        return Err(Error::InvalidArgument(format!(
            "final time {final_time} is not a whole number of steps of {dt}"
        )));
    }
    Ok(steps as usize)
}

/// Integrates and stores every `stride`-th state, starting with `x0`.
pub fn simulate_states(
    model: &QuadraticModel,
    x0: &DVector<f64>,
    dt: f64,
    final_time: f64,
    stride: usize,
    scheme: Scheme,
) -> Result<DMatrix<f64>> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    if x0.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state of length {} for a model of dimension {}",
            x0.len(),
            model.dim()
        )));
    }
    let steps = step_count(dt, final_time)?;
    let stored = steps / stride + 1;
    let mut out = DMatrix::zeros(model.dim(), stored);
    out.set_column(0, x0);
    let mut it = Integrator::new(model, scheme, dt)?;
    let mut x = x0.as_slice().to_vec();
    for step in 1..=steps {
        it.step(&mut x);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        if step % stride == 0 {
            out.column_mut(step / stride).copy_from_slice(&x);
        }
    }
    Ok(out)
}

/// Integrates and records exact right-hand-side derivatives at stored states.
pub fn simulate(
    model: &QuadraticModel,
    x0: &DVector<f64>,
    dt: f64,
    final_time: f64,
    stride: usize,
    scheme: Scheme,
) -> Result<SnapshotSet> {
    let states = simulate_states(model, x0, dt, final_time, stride, scheme)?;
    let mut derivatives = DMatrix::zeros(states.nrows(), states.ncols());
    for (c, col) in states.column_iter().enumerate() {
        derivatives.set_column(c, &model.rhs(&col.into_owned()));
    }
    let times = (0..states.ncols()).map(|c| (c * stride) as f64 * dt).collect();
    SnapshotSet::new(states, derivatives, times, dt, stride, BTreeMap::new())
}

/// Second-order finite differences along the columns: central inside, one-sided
/// three-point at both ends.
pub fn finite_difference_derivatives(states: &DMatrix<f64>, spacing: f64) -> Result<DMatrix<f64>> {
    let k = states.ncols();
    if k < 3 {
        return Err(Error::InvalidArgument(format!("finite differences need >= 3 snapshots, got {k}")));
    }
    let mut d = DMatrix::zeros(states.nrows(), k);
    let c = |j: usize| states.column(j);
    d.set_column(0, &((c(0) * -3.0 + c(1) * 4.0 - c(2)) / (2.0 * spacing)));
    for j in 1..k - 1 {
        d.set_column(j, &((c(j + 1) - c(j - 1)) / (2.0 * spacing)));
    }
    d.set_column(k - 1, &((c(k - 1) * 3.0 - c(k - 2) * 4.0 + c(k - 3)) / (2.0 * spacing)));
    Ok(d)
}
