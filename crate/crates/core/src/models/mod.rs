//! Online per-agent contextual reward estimators.
//!
//! Three families, each with a greedy point prediction and (where it makes
//! sense) a Thompson-sampled prediction:
//!
//! * [`LogisticPosterior`] — Bayesian logistic regression maintained as a
//!   Gaussian (Laplace) posterior with streaming rank-one covariance updates.
//! * [`TreeEnsemble`] — a bootstrap ensemble of shallow regression trees,
//!   refit periodically from a buffer of observed pairs; Thompson sampling
//!   draws one tree uniformly.
//! * [`MarginalMean`] — a context-blind running mean, the learned
//!   non-contextual baseline.
//!
//! Models receive bandit feedback only: the harness updates exactly one
//! agent's model per round, with the reward of the chosen agent.

mod logistic;
mod marginal;
mod tree;

pub use logistic::LogisticPosterior;
pub use marginal::MarginalMean;
pub use tree::{RegressionTree, TreeEnsemble, TreeParams};

use rand::Rng;

use crate::math;
use crate::Result;

/// Numerically stable logistic function, `1 / (1 + e^-z)`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + math::exp(-z))
    } else {
        let e = math::exp(z);
        e / (1.0 + e)
    }
}

/// A reward model of any family, with a uniform scoring/update surface.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RewardModel {
    Logistic(LogisticPosterior),
    Tree(TreeEnsemble),
    Marginal(MarginalMean),
}

impl RewardModel {
    /// Point prediction of the expected reward at `x`, in [0, 1].
    pub fn predict_greedy(&self, x: &[f64]) -> Result<f64> {
        match self {
            RewardModel::Logistic(m) => m.predict_greedy(x),
            RewardModel::Tree(m) => Ok(m.predict_greedy(x)),
            RewardModel::Marginal(m) => Ok(m.predict()),
        }
    }

    /// Thompson-sampled prediction at `x`, in [0, 1].
    ///
    /// The marginal model has no posterior to sample; it returns its point
    /// estimate.
    pub fn sample_ts<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        match self {
            RewardModel::Logistic(m) => m.sample_ts(x, rng),
            RewardModel::Tree(m) => Ok(m.sample_ts(x, rng)),
            RewardModel::Marginal(m) => Ok(m.predict()),
        }
    }

    /// Absorb one observed (context, binary reward) pair.
    pub fn update(&mut self, x: &[f64], reward: f64) -> Result<()> {
        match self {
            RewardModel::Logistic(m) => m.update(x, reward),
            RewardModel::Tree(m) => {
                m.update(x, reward);
                Ok(())
            }
            RewardModel::Marginal(m) => {
                m.update(reward);
                Ok(())
            }
        }
    }

    /// Number of observations absorbed so far.
    pub fn observations(&self) -> u64 {
        match self {
            RewardModel::Logistic(m) => m.observations(),
            RewardModel::Tree(m) => m.observations(),
            RewardModel::Marginal(m) => m.observations(),
        }
    }
}
