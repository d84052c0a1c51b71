//! Error type shared across the engine.

use thiserror::Error;

/// Everything that can go wrong inside the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Constrained capacity targets do not sum to 1.
    #[error("constrained capacities sum to {sum}, expected 1 within 1e-9")]
    SumViolation { sum: f64 },
    /// A capacity target lies outside its admissible range.
    #[error("capacity for agent {agent} is {alpha}, outside its admissible range")]
    RangeViolation { agent: usize, alpha: f64 },
    /// Every agent was flagged unconstrained.
    #[error("at least one agent must be capacity-constrained")]
    NoConstrainedAgent,
    /// Vector or matrix dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A value that must be finite was not.
    #[error("non-finite value in {place}")]
    NonFinite { place: &'static str },
    /// Log construction rejected the records.
    #[error("invalid task log: {reason}")]
    InvalidLog { reason: &'static str },
    /// Cholesky factorization failed even after jitter retries.
    #[error("covariance is not positive definite after {retries} jitter retries")]
    CholeskyFailure { retries: usize },
    /// An agent index outside the bank.
    #[error("agent index {agent} out of range for {agents} agents")]
    InvalidAgent { agent: usize, agents: usize },
    /// Batch counts do not sum to the batch size.
    #[error("batch counts sum to {got}, expected {expected}")]
    CountMismatch { expected: u64, got: u64 },
    /// Capacity lies outside the full-disagreement window [p1, 1-p2].
    #[error("capacity {alpha} outside disagreement window [{lo}, {hi}]")]
    CapacityOutsideWindow { alpha: f64, lo: f64, hi: f64 },
    /// Requested per-agent counts cannot be met.
    #[error("infeasible counts: {reason}")]
    InfeasibleCounts { reason: &'static str },
    /// A score magnitude too large for exact integer cost scaling.
    #[error("score magnitude {score} exceeds the 1e3 scaling bound")]
    ScoreOverflow { score: f64 },
    /// A flow network that violates its construction invariants.
    #[error("malformed flow network: {reason}")]
    NetworkMalformed { reason: &'static str },
    /// A synthetic generator description that fails validation.
    #[error("invalid generator spec: {reason}")]
    InvalidSpec { reason: &'static str },
    /// A policy kind that cannot run in the requested mode.
    #[error("policy {policy} is not runnable here: {reason}")]
    UnsupportedPolicy {
        policy: &'static str,
        reason: &'static str,
    },
    /// The oracle policies need per-record true means, which this source lacks.
    #[error("true per-record means are unavailable for this log")]
    TrueMeansUnavailable,
}
