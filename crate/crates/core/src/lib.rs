//! Community detection in the sparse, unbalanced two-community stochastic
//! block model.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: the `(p, d, lambda)` parameterization, the affinity
//!   coefficients `a, b, c` and the broadcast transition matrix.
//! * [`graphs`]: SBM and labeled Galton-Watson samplers, revealed-label sets
//!   and radius-`r` balls.
//! * [`bp`]: exact belief propagation on trees, the threshold tests and a
//!   brute-force enumeration oracle.
//! * [`density_evolution`]: the large-degree Gaussian map `G`, its fixed
//!   points, the spinodal curve and the q-threshold.
//! * [`experiments`]: population dynamics and Monte Carlo estimators of the
//!   rescaled success probability.
//! * [`cli`]: the command-line front end.

pub mod bp;
pub mod cli;
pub mod density_evolution;
pub mod error;
pub mod experiments;
pub mod graphs;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
pub use model::{Community, ModelParams, TransitionMatrix};
