//! Core value types: task logs with counterfactual rewards, capacity
//! profiles, and deterministic permutation of task sequences.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::Result;

/// One task: an observed context plus every agent's counterfactual binary
/// reward (1 = that agent would have answered correctly).
///
/// The full reward row exists so that hindsight oracles, the offline
/// benchmark, and regret can be evaluated; the online loop in
/// [`crate::harness`] reveals only the chosen agent's entry to the learner.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaskRecord {
    pub context: Vec<f64>,
    pub rewards: Vec<bool>,
}

impl TaskRecord {
    pub fn reward_of(&self, agent: usize) -> f64 {
        if self.rewards[agent] {
            1.0
        } else {
            0.0
        }
    }
}

/// An ordered replay log of tasks, uniform in feature dimension and agent
/// count. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaskLog {
    records: Vec<TaskRecord>,
    agent_names: Vec<String>,
    feature_dim: usize,
}

impl TaskLog {
    /// Validates dimensions, finiteness, and agent count. Any non-finite
    /// feature rejects the whole log; silent imputation would corrupt the
    /// learned expertise estimates downstream.
    pub fn new(records: Vec<TaskRecord>, agent_names: Vec<String>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidLog {
                reason: "log has no records",
            });
        }
        let agents = agent_names.len();
        if agents < 2 {
            return Err(Error::InvalidLog {
                reason: "need at least two agents",
            });
        }
        let feature_dim = records[0].context.len();
        if feature_dim == 0 {
            return Err(Error::InvalidLog {
                reason: "contexts must have dimension >= 1",
            });
        }
        for rec in &records {
            if rec.context.len() != feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: feature_dim,
                    got: rec.context.len(),
                });
            }
            if rec.rewards.len() != agents {
                return Err(Error::DimensionMismatch {
                    expected: agents,
                    got: rec.rewards.len(),
                });
            }
            if rec.context.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { place: "context" });
            }
        }
        Ok(Self {
            records,
            agent_names,
            feature_dim,
        })
    }

    pub fn records(&self) -> &[TaskRecord] {
        &self.records
    }

    pub fn agent_names(&self) -> &[String] {
        &self.agent_names
    }

    pub fn num_agents(&self) -> usize {
        self.agent_names.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Fraction of tasks each agent would have answered correctly.
    pub fn column_means(&self) -> Vec<f64> {
        let a = self.num_agents();
        let mut sums = alloc::vec![0.0; a];
        for rec in &self.records {
            for (s, &r) in sums.iter_mut().zip(&rec.rewards) {
                if r {
                    *s += 1.0;
                }
            }
        }
        let n = self.records.len() as f64;
        sums.iter_mut().for_each(|s| *s /= n);
        sums
    }

    /// Uniformly shuffled copy via seeded Fisher-Yates (ChaCha8 stream keyed
    /// by the 64-bit seed). Same seed, same order.
    pub fn permuted(&self, seed: u64) -> TaskLog {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records = self.records.clone();
        records.shuffle(&mut rng);
        TaskLog {
            records,
            agent_names: self.agent_names.clone(),
            feature_dim: self.feature_dim,
        }
    }
}

/// Per-agent long-run capacity targets. Constrained targets sum to 1;
/// unconstrained ("free") agents sit outside the budget with a zero target.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CapacityProfile {
    alphas: Vec<f64>,
    unconstrained: Vec<bool>,
}

impl CapacityProfile {
    /// Validates and returns the profile.
    ///
    /// Constrained alphas must lie in [0, 1] and sum to 1 within 1e-9;
    /// unconstrained agents must carry exactly 0 (any other value is a
    /// [`Error::RangeViolation`], since their admissible range is {0}).
    pub fn new(alphas: Vec<f64>, unconstrained: Vec<bool>) -> Result<Self> {
        if alphas.len() != unconstrained.len() {
            return Err(Error::DimensionMismatch {
                expected: alphas.len(),
                got: unconstrained.len(),
            });
        }
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite { place: "alphas" });
        }
        let mut sum = 0.0;
        let mut any_constrained = false;
        for (agent, (&alpha, &free)) in alphas.iter().zip(&unconstrained).enumerate() {
            if free {
                if alpha != 0.0 {
                    return Err(Error::RangeViolation { agent, alpha });
                }
            } else {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::RangeViolation { agent, alpha });
                }
                sum += alpha;
                any_constrained = true;
            }
        }
        if !any_constrained {
            return Err(Error::NoConstrainedAgent);
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::SumViolation { sum });
        }
        Ok(Self {
            alphas,
            unconstrained,
        })
    }

    /// Equal split over `agents` constrained agents.
    pub fn uniform(agents: usize) -> Result<Self> {
        Self::new(
            alloc::vec![1.0 / agents as f64; agents],
            alloc::vec![false; agents],
        )
    }

    /// Two constrained agents with targets `(alpha, 1 - alpha)`.
    pub fn two_agent(alpha: f64) -> Result<Self> {
        Self::new(alloc::vec![alpha, 1.0 - alpha], alloc::vec![false, false])
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha(&self, agent: usize) -> f64 {
        self.alphas[agent]
    }

    pub fn is_unconstrained(&self, agent: usize) -> bool {
        self.unconstrained[agent]
    }

    pub fn num_agents(&self) -> usize {
        self.alphas.len()
    }

    pub fn constrained_agents(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_agents()).filter(|&a| !self.unconstrained[a])
    }

    pub fn has_free_agents(&self) -> bool {
        self.unconstrained.iter().any(|&f| f)
    }
}

/// One executed round: the queue snapshot and scores are pre-decision.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRow {
    pub round: usize,
    pub agent: usize,
    pub reward: f64,
    pub queues: Vec<f64>,
    pub scores: Vec<f64>,
}

/// Full per-round record of a run, kept only when tracing is requested.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssignmentTrace {
    pub eta: f64,
    pub rows: Vec<TraceRow>,
}
