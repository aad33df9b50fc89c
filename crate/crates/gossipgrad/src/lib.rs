//! Simulator and benchmark harness for decentralized stochastic gradient
//! methods over gossip networks.
//!
//! The crate is organized around five subsystems:
//!
//! * [`topology`] — communication graphs, doubly stochastic mixing matrices
//!   and their spectral gap.
//! * [`problems`] — stochastic objective families (quadratic, logistic) with
//!   per-agent data, exact oracles and constant estimators.
//! * [`algorithms`] — DSGD, centralized minibatch SGD, gradient tracking and
//!   exact diffusion, all driven by deterministic counter-based RNG streams.
//! * [`td`] — multi-agent TD(0) policy evaluation on a finite MDP.
//! * [`metrics`] — optimality gaps, consensus error, transient-time
//!   estimation, rate fits and CSV/JSON serialization.
//!
//! The [`harness`] module ties everything together behind experiment
//! configuration files; the `gossipgrad` binary is a thin front-end over it.
//! See the crate `examples/` directory for runnable entry points covering
//! each capability.

pub mod algorithms;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod problems;
pub mod rng;
pub mod td;
pub mod topology;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
