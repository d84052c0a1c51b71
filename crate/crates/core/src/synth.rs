//! Synthetic task-log generators with known per-agent reward functions.
//!
//! Contexts are drawn i.i.d. from a uniform box or an isotropic Gaussian;
//! each agent's true conditional accuracy is either logistic in the context
//! or piecewise constant over axis-aligned cells. Rewards are independent
//! Bernoulli draws per agent, and the true mean table is retained alongside
//! the log so oracle values and regret can be computed exactly.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{TaskLog, TaskRecord};
use crate::error::Error;
use crate::math;
use crate::models::sigmoid;
use crate::Result;

/// Context sampling law.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ContextLaw {
    /// Independent uniform draws from `[lo, hi]` per dimension.
    UniformBox { lo: f64, hi: f64 },
    /// Independent `N(mean, std^2)` draws per dimension.
    Gaussian { mean: f64, std: f64 },
}

/// An axis-aligned cell with a constant mean inside it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PiecewiseCell {
    /// Inclusive-exclusive `[lo, hi)` interval per dimension.
    pub bounds: Vec<(f64, f64)>,
    pub value: f64,
}

/// True conditional accuracy of one agent.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AgentMean {
    /// `sigmoid(theta . x + intercept)`.
    Logistic { theta: Vec<f64>, intercept: f64 },
    /// First matching cell wins; `default` elsewhere. All values in [0, 1].
    Piecewise {
        cells: Vec<PiecewiseCell>,
        default: f64,
    },
    /// Context-independent accuracy.
    Constant { value: f64 },
}

impl AgentMean {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            AgentMean::Logistic { theta, intercept } => {
                let mut z = *intercept;
                for (t, v) in theta.iter().zip(x) {
                    z += t * v;
                }
                sigmoid(z)
            }
            AgentMean::Piecewise { cells, default } => {
                for cell in cells {
                    let inside = cell
                        .bounds
                        .iter()
                        .zip(x)
                        .all(|(&(lo, hi), &v)| v >= lo && v < hi);
                    if inside {
                        return cell.value;
                    }
                }
                *default
            }
            AgentMean::Constant { value } => *value,
        }
    }
}

/// Full generator description.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthSpec {
    pub dim: usize,
    pub rounds: usize,
    pub law: ContextLaw,
    pub agents: Vec<AgentMean>,
}

impl SynthSpec {
    /// The complementary two-agent benchmark: `mu_1 = sigmoid(4x)`,
    /// `mu_2 = sigmoid(-4x)`, `x ~ U[-1, 1]`. Both marginals are 0.5 and the
    /// reward gap changes sign at 0, so contextual routing has maximal value.
    pub fn complementary(rounds: usize) -> Self {
        Self {
            dim: 1,
            rounds,
            law: ContextLaw::UniformBox { lo: -1.0, hi: 1.0 },
            agents: alloc::vec![
                AgentMean::Logistic {
                    theta: alloc::vec![4.0],
                    intercept: 0.0,
                },
                AgentMean::Logistic {
                    theta: alloc::vec![-4.0],
                    intercept: 0.0,
                },
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidSpec {
                reason: "dimension must be >= 1",
            });
        }
        if self.rounds == 0 {
            return Err(Error::InvalidSpec {
                reason: "rounds must be >= 1",
            });
        }
        if self.agents.len() < 2 {
            return Err(Error::InvalidSpec {
                reason: "need at least two agents",
            });
        }
        match self.law {
            ContextLaw::UniformBox { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidSpec {
                        reason: "uniform box needs finite lo < hi",
                    });
                }
            }
            ContextLaw::Gaussian { mean, std } => {
                if !(mean.is_finite() && std.is_finite() && std > 0.0) {
                    return Err(Error::InvalidSpec {
                        reason: "gaussian law needs finite mean and std > 0",
                    });
                }
            }
        }
        for agent in &self.agents {
            match agent {
                AgentMean::Logistic { theta, intercept } => {
                    if theta.len() != self.dim {
                        return Err(Error::InvalidSpec {
                            reason: "logistic theta length must equal dim",
                        });
                    }
                    if theta.iter().any(|t| !t.is_finite()) || !intercept.is_finite() {
                        return Err(Error::InvalidSpec {
                            reason: "logistic parameters must be finite",
                        });
                    }
                }
                AgentMean::Piecewise { cells, default } => {
                    if !(0.0..=1.0).contains(default) {
                        return Err(Error::InvalidSpec {
                            reason: "piecewise default outside [0, 1]",
                        });
                    }
                    for cell in cells {
                        if cell.bounds.len() != self.dim {
                            return Err(Error::InvalidSpec {
                                reason: "piecewise cell rank must equal dim",
                            });
                        }
                        if !(0.0..=1.0).contains(&cell.value) {
                            return Err(Error::InvalidSpec {
                                reason: "piecewise value outside [0, 1]",
                            });
                        }
                        if cell
                            .bounds
                            .iter()
                            .any(|&(lo, hi)| lo >= hi || !lo.is_finite() || !hi.is_finite())
                        {
                            return Err(Error::InvalidSpec {
                                reason: "piecewise cell needs lo < hi per dimension",
                            });
                        }
                    }
                }
                AgentMean::Constant { value } => {
                    if !(0.0..=1.0).contains(value) {
                        return Err(Error::InvalidSpec {
                            reason: "constant accuracy outside [0, 1]",
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// A generated log together with its true per-record mean table.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthLog {
    pub log: TaskLog,
    /// `mu[t][a]` is the true expected reward of agent `a` on record `t`.
    pub mu: Vec<Vec<f64>>,
}

/// Draws the log; the same seed reproduces it bit for bit.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthLog> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = spec.agents.len();
    let mut records = Vec::with_capacity(spec.rounds);
    let mut mu = Vec::with_capacity(spec.rounds);
    for _ in 0..spec.rounds {
        let context: Vec<f64> = (0..spec.dim)
            .map(|_| match spec.law {
                ContextLaw::UniformBox { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
                ContextLaw::Gaussian { mean, std } => mean + std * math::standard_normal(&mut rng),
            })
            .collect();
        let means: Vec<f64> = spec.agents.iter().map(|a| a.evaluate(&context)).collect();
        let rewards: Vec<bool> = means.iter().map(|&m| rng.random::<f64>() < m).collect();
        records.push(TaskRecord { context, rewards });
        mu.push(means);
    }
    let names: Vec<String> = (0..agents).map(|a| format!("agent{}", a + 1)).collect();
    Ok(SynthLog {
        log: TaskLog::new(records, names)?,
        mu,
    })
}
