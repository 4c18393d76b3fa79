//! Numerical laboratory for the one-dimensional parabolic-elliptic Keller-Segel
//! system with logistic source,
//!
//! ```text
//! u_t = u_xx - chi (u v_x)_x + u (a - b u),    0 = v_xx - lambda v + mu u.
//! ```
//!
//! Modules, bottom-up: [`theory`] (constants and hypotheses), [`kernel`]
//! (the chemical field via the exponential Green's function), [`solver`]
//! (time integration), [`front`] (speeds and tail diagnostics), [`wave`]
//! (traveling-wave construction), and [`config`] / [`runner`] / [`output`] for the CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod front;
pub mod grid;
pub mod kernel;
pub mod output;
pub mod runner;
pub mod solver;
pub mod theory;
pub mod tridiag;
pub mod wave;

pub use error::{Error, Result};
pub use grid::{Grid, ScalarField};
pub use kernel::TailPolicy;
pub use solver::{InitialData, Scheme, SolverConfig, State, Trajectory};
pub use theory::{ModelParams, SpeedConstants};
