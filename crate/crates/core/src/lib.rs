//! Online control of linear dynamical systems from bandit feedback.
//!
//! The crate is organized bottom-up:
//!
//! * [`bco`]: bandit convex optimization with memory (delayed one-point
//!   gradient estimates, Minkowski-shrunk projections).
//! * [`lds`]: linear dynamics, disturbance generators and cost functions.
//! * [`policies`]: disturbance-action controllers: the bandit perturbation
//!   controller, the full-information GPC baseline and LQR, all behind the
//!   [`policies::Controller`] trait and selectable by name through
//!   [`policies::ControllerRegistry`].
//! * [`sysid`]: method-of-moments and least-squares identification, and the
//!   explore-then-commit wrapper.
//! * [`harness`]: seeded experiment grids, confidence intervals, the
//!   best-in-hindsight oracle and result export.

pub mod bco;
pub mod error;
pub mod harness;
pub mod lds;
pub mod policies;
pub mod rng;
pub mod sysid;

pub use error::{Error, Result};
