//! Renewal Hawkes processes: simulation, renewal-equation solvers and
//! Monte Carlo checks of their law of large numbers and central limit
//! theorem.
//!
//! A renewal Hawkes process has immigrants arriving as a renewal process
//! with interarrival law `F`, each of which starts a Poisson branching
//! cascade driven by an excitation kernel `h` with branching ratio
//! `alpha = ∫h < 1`. Its intensity is
//!
//! ```text
//! λ(t) = μ(t − T_I(t)) + Σ_{T_i < t} h(t − T_i)
//! ```
//!
//! where `μ` is the hazard of `F` and `T_I(t)` the last immigrant.
//!
//! Modules:
//! - [`model`]: interarrival laws and excitation kernels.
//! - [`simulate`]: cluster and thinning engines, path queries.
//! - [`renewal`]: grid solvers for `Φ`, `ψ` and `E[N(t)]`.
//! - [`limits`]: LLN slope, CLT variance, cluster-size moments.
//! - [`statsutil`]: random streams, KS distance, regression through the origin.
//! - [`experiments`]: the Monte Carlo harness.
//! - [`cli`]: the `rhp` command-line front end.

// `!(x >= 0.0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod limits;
pub mod model;
pub mod output;
pub mod renewal;
pub mod simulate;
pub mod statsutil;

pub use error::{Error, Result};
pub use limits::{limit_constants, LimitConstants};
pub use model::{ExcitationKernel, InterarrivalModel};
pub use simulate::{Engine, Origin, PointProcessPath};
pub use statsutil::RandomStream;
