//! Engine for assigning prediction tasks to capacity-constrained agents with
//! unknown, context-dependent expertise.
//!
//! Tasks arrive one at a time, each carrying a context vector. Every agent has
//! an unknown conditional accuracy over contexts and a long-run target share
//! of the workload. The engine learns per-agent reward models online (Bayesian
//! logistic with a Laplace posterior, a bootstrap tree ensemble, or a plain
//! marginal mean), enforces the capacity targets through virtual queues, and
//! selects the agent maximizing the queue-penalized score
//! `mu_a(x) - eta * Q_a`.
//!
//! Besides the online loop, the crate provides exact hindsight oracles
//! (unconstrained argmax, two-agent gap sorting, and a general
//! transportation-problem solver over min-cost max-flow), mini-batch
//! assignment with integer count apportionment, synthetic log generators, and
//! the sweep/aggregation machinery used by the experiment harness.
//!
//! The crate is `no_std` (with `alloc`); all file formats, configuration, and
//! the CLI live in the companion `capbandit` crate. Every stochastic code
//! path takes an explicit seeded generator, and all transcendental math goes
//! through `libm`, so results are reproducible bit-for-bit across platforms.

#![no_std]
#![forbid(unsafe_code)]
// Indexed loops over parallel per-agent arrays (scores, queues, counts,
// capacities) read better here than zipped iterator chains.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod batch;
pub mod capacity;
pub mod domain;
pub mod error;
pub mod harness;
mod linalg;
mod math;
pub mod models;
pub mod policy;
pub mod synth;

pub use capacity::QueueBank;
pub use domain::{CapacityProfile, TaskLog, TaskRecord};
pub use error::Error;
pub use harness::{ExperimentConfig, RunResult, SweepTable};
pub use policy::PolicyKind;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
