//! Numerical laboratory for nonlocal conservation laws of crowd dynamics.
//!
//! Eulerian finite-volume and Lagrangian particle solvers for panic-type, orderly and
//! multi-population crowds (optionally coupled to individual agents), together with exact
//! Wasserstein-1 distances, total-variation and stability bounds, and linearized sensitivity
//! of a threshold cost.

pub mod error;
pub mod fv_solver;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod lagrangian;
pub mod models;
pub mod sensitivity;
pub mod transport_metrics;

pub use error::{Error, Result};
pub use fv_solver::{DensityField, Scenario, Solver, SolverConfig, State, Trajectory};
pub use geometry::{DomainMask, Grid, Point, VectorField};
pub use kernels::{make_mollifier, Kernel, KernelProfile};
pub use lagrangian::ParticleEnsemble;
pub use models::{ModelKind, ModelSpec, Population, SpeedLaw};
