//! Full-order models on periodic 1D grids and their time integrators.

mod integrate;
mod linsolve;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor_ops::{QuadOpCompact, QuadTerm, SparseQuadOp};

pub use integrate::{
    finite_difference_derivatives, simulate, simulate_states, step_cnab2,
    step_semi_implicit_euler, Integrator, Scheme, SnapshotSet,
};

/// Uniform periodic grid on `[0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n: usize,
    length: f64,
}

impl Grid1D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidArgument(format!("grid needs n >= 4, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(format!("domain length must be positive, got {length}")));
        }
        Ok(Self { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }
}

/// `dx/dt = A x + F x^[2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    a: DMatrix<f64>,
    f: QuadTerm,
}

impl QuadraticModel {
    pub fn new(a: DMatrix<f64>, f: QuadTerm) -> Result<Self> {
        let n = f.dim();
        if a.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "linear operator is {}×{}, quadratic operator has dimension {n}",
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(Self { a, f })
    }

    pub fn dense(a: DMatrix<f64>, f: QuadOpCompact) -> Result<Self> {
        Self::new(a, QuadTerm::Dense(f))
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn quadratic(&self) -> &QuadTerm {
        &self.f
    }

    pub fn quadratic_term(&self, x: &DVector<f64>) -> DVector<f64> {
        self.f.apply(x)
    }

    pub fn rhs(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + self.f.apply(x)
    }
}

/// Skew-symmetric split form of `−x ∂x/∂ω` on a periodic grid:
///
/// ```text
/// N_i = −1/3 [ x_i (x_{i+1} − x_{i−1}) + (x_{i+1}² − x_{i−1}²) ] / (2Δω)
/// ```
///
/// `Σ_i x_i N_i` telescopes to zero, so the operator is energy-preserving.
fn convection(grid: &Grid1D) -> SparseQuadOp {
    let n = grid.n();
    let c = 1.0 / (6.0 * grid.spacing());
    let terms = (0..n).flat_map(|i| {
        let ip = (i + 1) % n;
        let im = (i + n - 1) % n;
        [(i, i, ip, -c), (i, i, im, c), (i, ip, ip, -c), (i, im, im, c)]
    });
    SparseQuadOp::from_terms(n, terms).expect("indices are within the grid")
}

fn circulant(n: usize, stencil: &[f64]) -> DMatrix<f64> {
    let half = stencil.len() / 2;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for (s, &c) in stencil.iter().enumerate() {
            m[(i, (i + n + s - half) % n)] += c;
        }
    }
    m
}

/// Viscous Burgers' equation `x_t = μ x_ωω − x x_ω`.
pub fn assemble_burgers(grid: &Grid1D, mu: f64) -> Result<QuadraticModel> {
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("viscosity must be positive, got {mu}")));
    }
    let dw = grid.spacing();
    let a = circulant(grid.n(), &[1.0, -2.0, 1.0]) * (mu / (dw * dw));
    QuadraticModel::new(a, QuadTerm::Sparse(convection(grid)))
}

/// Kuramoto–Sivashinsky equation `x_t = −x_ωω − μ x_ωωωω − x x_ω`.
pub fn assemble_kse(grid: &Grid1D, mu: f64) -> Result<QuadraticModel> {
    if grid.n() < 6 {
        return Err(Error::InvalidArgument(format!("KSE stencil needs n >= 6, got {}", grid.n())));
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("fourth-order coefficient must be positive, got {mu}")));
    }
    let dw = grid.spacing();
    let d2 = circulant(grid.n(), &[1.0, -2.0, 1.0]) / (dw * dw);
    let d4 = circulant(grid.n(), &[1.0, -4.0, 6.0, -4.0, 1.0]) / dw.powi(4);
    let a = -(d2 + d4 * mu);
    QuadraticModel::new(a, QuadTerm::Sparse(convection(grid)))
}

/// `A sin(2π f ω + φ)` sampled on the grid.
pub fn burgers_ic(grid: &Grid1D, amplitude: f64, frequency: u32, phase: f64) -> Result<DVector<f64>> {
    if frequency < 1 {
        return Err(Error::InvalidArgument("frequency must be >= 1".into()));
    }
    Ok(DVector::from_fn(grid.n(), |i, _| {
        amplitude * (2.0 * PI * frequency as f64 * grid.point(i) + phase).sin()
    }))
}

/// `a cos(2πω/L) + b cos(4πω/L)` sampled on the grid.
pub fn kse_ic(grid: &Grid1D, a: f64, b: f64) -> DVector<f64> {
    let l = grid.length();
    DVector::from_fn(grid.n(), |i, _| {
        let w = grid.point(i);
        a * (2.0 * PI * w / l).cos() + b * (4.0 * PI * w / l).cos()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_ops::ep_violation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(3, 1.0).is_err());
        assert!(Grid1D::new(8, 0.0).is_err());
        let g = Grid1D::new(128, 1.0).unwrap();
        assert_eq!(g.spacing(), 2f64.powi(-7));
        assert_eq!(g.spacing() * g.n() as f64, g.length());
    }

    #[test]
    fn burgers_linear_operator_stencil() {
        let g = Grid1D::new(4, 1.0).unwrap();
        let m = assemble_burgers(&g, 0.1).unwrap();
        let a = m.linear();
        for i in 0..4 {
            assert!((a[(i, i)] + 3.2).abs() < 1e-12);
            assert!((a[(i, (i + 1) % 4)] - 1.6).abs() < 1e-12);
            assert!((a[(i, (i + 3) % 4)] - 1.6).abs() < 1e-12);
            assert_eq!(a[(i, (i + 2) % 4)], 0.0);
        }
        let g = Grid1D::new(128, 1.0).unwrap();
        let m = assemble_burgers(&g, 0.1).unwrap();
        assert_eq!(m.dim(), 128);
        for row in m.linear().row_iter() {
            assert!(row.sum().abs() <= 1e-9);
        }
        assert!(assemble_burgers(&g, 0.0).is_err());
    }

    #[test]
    fn convection_is_energy_preserving() {
        let g = Grid1D::new(8, 1.0).unwrap();
        let m = assemble_burgers(&g, 0.1).unwrap();
        let dense = m.quadratic().to_compact();
        assert!(ep_violation(&dense) <= 1e-13);
        assert!(m.quadratic().ep_violation() <= 1e-13);
        for n in [64, 128, 256] {
            let g = Grid1D::new(n, 1.0).unwrap();
            assert!(assemble_burgers(&g, 0.1).unwrap().quadratic().ep_violation() <= 1e-12);
            let g = Grid1D::new(n, 22.0).unwrap();
            assert!(assemble_kse(&g, 1.0).unwrap().quadratic().ep_violation() <= 1e-12);
        }
    }

    #[test]
    fn burgers_momentum_is_conserved() {
        let g = Grid1D::new(64, 1.0).unwrap();
        let m = assemble_burgers(&g, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = DVector::from_fn(64, |_, _| rng.random_range(-1.0..1.0));
            assert!(m.rhs(&x).sum().abs() <= 1e-10);
            assert!(m.quadratic_term(&x).sum().abs() <= 1e-10);
        }
    }

    #[test]
    fn kse_constants_are_equilibria() {
        let g = Grid1D::new(32, 22.0).unwrap();
        let m = assemble_kse(&g, 1.0).unwrap();
        let x = DVector::from_element(32, 0.7);
        assert!((m.linear() * &x).amax() <= 1e-9);
        assert!(m.quadratic_term(&x).amax() <= 1e-12);
        assert!(assemble_kse(&Grid1D::new(5, 22.0).unwrap(), 1.0).is_err());
    }

    #[test]
    fn kse_fourier_eigencheck() {
        let (n, l, mu) = (64usize, 22.0, 1.0);
        let g = Grid1D::new(n, l).unwrap();
        let m = assemble_kse(&g, mu).unwrap();
        let dw = g.spacing();
        let theta = 2.0 * PI * dw / l;
        let lambda = (2.0 - 2.0 * theta.cos()) / dw.powi(2)
            - mu * (6.0 - 8.0 * theta.cos() + 2.0 * (2.0 * theta).cos()) / dw.powi(4);
        let x = DVector::from_fn(n, |i, _| (2.0 * PI * g.point(i) / l).sin());
        assert!((m.linear() * &x - &x * lambda).norm() <= 1e-10);
    }

    #[test]
    fn initial_conditions() {
        let g = Grid1D::new(16, 1.0).unwrap();
        assert_eq!(burgers_ic(&g, 0.0, 2, 0.3).unwrap(), DVector::zeros(16));
        let x = burgers_ic(&g, 0.8, 1, -0.125).unwrap();
        assert!((x[0] - (-0.099740)).abs() < 5e-7);
        assert!(burgers_ic(&g, 1.0, 0, 0.0).is_err());

        let g = Grid1D::new(16, 22.0).unwrap();
        assert_eq!(kse_ic(&g, 0.0, 0.0), DVector::zeros(16));
        assert_eq!(kse_ic(&g, 1.0, 0.0)[0], 1.0);
    }
}
