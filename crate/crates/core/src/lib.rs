//! Two-species cross-diffusion population models on an interval.
//!
//! The solver discretizes
//!
//! `d_t u_i - div J_i(u_1, u_2) = u_i (alpha_i - beta_i1 u_1 - beta_i2 u_2)`
//!
//! with no-flux boundary conditions, using lumped-mass P1 finite elements,
//! an entropy-regularized mobility and backward Euler in time. Three flux
//! families are available: BT `J_i = u_i (a_i1 grad u_1 + a_i2 grad u_2 + b_i q) + c_i grad u_i`,
//! SKT (`grad(u_i (a_i1 u_1 + a_i2 u_2))` in place of the BT cross term),
//! and BT plus `delta / 2` times SKT.
//!
//! An interacting-particle simulator provides the microscopic counterpart of
//! the model.

mod anderson;
pub mod diagnostics;
pub mod error;
pub mod flux_models;
pub mod mesh_fe;
pub mod particle_sim;
pub mod regularization;
pub mod time_stepper;

pub use error::{Error, Result};
pub use flux_models::{Coefficients, DriftField, FluxKind};
pub use mesh_fe::{Mesh1D, NodalField};
pub use regularization::RegParam;
pub use time_stepper::{SimulationState, SolverParams, Stepper};
