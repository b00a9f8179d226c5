//! Learning quadratic reduced-order models from trajectory data.
//!
//! Given snapshots of a system `dx/dt = A x + H (x ⊗ x)`, this crate builds a
//! POD basis, projects the data, and infers reduced operators `Â`, `F̂` by
//! least squares. The energy-preserving variant adds the linear equality
//! constraints under which `x̂ᵀ F̂ x̂^[2] = 0` for every reduced state, and
//! solves the resulting saddle-point system directly.
//!
//! Modules:
//! - [`tensor_ops`]: Kronecker / half-vectorized quadratic operators and the
//!   energy-preservation constraint system.
//! - [`pde`]: periodic Burgers' and Kuramoto–Sivashinsky assemblies plus the
//!   semi-implicit integrators.
//! - [`pod`]: snapshot SVD, energy spectrum, projection.
//! - [`opinf`]: intrusive Galerkin reduction, standard and energy-preserving
//!   operator inference.
//! - [`metrics`]: relative state error, autocorrelation statistics.
//! - [`harness`]: configs, matrix files, experiment pipelines.

pub mod error;
pub mod harness;
pub mod metrics;
pub mod opinf;
pub mod pde;
pub mod pod;
pub mod tensor_ops;

pub use error::{Error, Result};
pub use opinf::{
    assemble_lsq, ep_opinf, intrusive_reduce, kkt_diagnostics, standard_opinf, LsqSystem,
    Method, ReducedModel,
};
pub use pde::{
    assemble_burgers, assemble_kse, burgers_ic, kse_ic, simulate, Grid1D, QuadraticModel,
    Scheme, SnapshotSet,
};
pub use pod::{compute_pod, energy_lost, energy_retained, project, PodBasis, ReducedData};
pub use tensor_ops::{
    build_constraint_matrix, ep_violation, eval_quadratic, extract_submodel, f_to_h, h_to_f,
    is_energy_preserving, kron_square, vech_square, ConstraintSystem, QuadOpCompact,
    QuadOpFull,
};
