//! Selection rules and hindsight-optimal assignment oracles.
//!
//! The online rule picks `argmax_a (score_a - eta * Q_a)`. The oracles work
//! on a full table of per-record expected rewards: the unconstrained oracle
//! takes the row argmax; the constrained oracle solves the exact
//! transportation problem under per-agent counts (via min-cost max-flow) and
//! reports approximate shadow prices from the dual potentials; the two-agent
//! case reduces to sorting records by the reward gap and has a closed-form
//! expression for the gain over random assignment when capacity covers the
//! disagreement regions.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::batch::{self, largest_remainder};
use crate::capacity::QueueBank;
use crate::domain::CapacityProfile;
use crate::error::Error;
use crate::Result;

/// The policy families runnable by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PolicyKind {
    /// Logistic posterior, MAP point scores.
    LogisticGreedy,
    /// Logistic posterior, Thompson-sampled scores.
    LogisticTs,
    /// Tree ensemble, ensemble-mean scores.
    TreeGreedy,
    /// Tree ensemble, single-tree Thompson scores.
    TreeTs,
    /// Assigns with fixed probabilities `alpha_a`, ignoring context.
    RandomNonContextual,
    /// Scores are learned marginal means inside the penalized argmax.
    LearnedNonContextual,
    /// Row argmax of true per-record means (no queue penalty).
    OracleUnconstrained,
    /// True per-record means inside the penalized argmax.
    OracleConstrained,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::LogisticGreedy,
        PolicyKind::LogisticTs,
        PolicyKind::TreeGreedy,
        PolicyKind::TreeTs,
        PolicyKind::RandomNonContextual,
        PolicyKind::LearnedNonContextual,
        PolicyKind::OracleUnconstrained,
        PolicyKind::OracleConstrained,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::LogisticGreedy => "logistic_greedy",
            PolicyKind::LogisticTs => "logistic_ts",
            PolicyKind::TreeGreedy => "tree_greedy",
            PolicyKind::TreeTs => "tree_ts",
            PolicyKind::RandomNonContextual => "random",
            PolicyKind::LearnedNonContextual => "learned_marginal",
            PolicyKind::OracleUnconstrained => "oracle_unconstrained",
            PolicyKind::OracleConstrained => "oracle_constrained",
        }
    }

    /// True for the four context-model policies.
    pub fn is_contextual(&self) -> bool {
        matches!(
            self,
            PolicyKind::LogisticGreedy
                | PolicyKind::LogisticTs
                | PolicyKind::TreeGreedy
                | PolicyKind::TreeTs
        )
    }

    /// True when scoring draws from a posterior rather than a point estimate.
    pub fn is_thompson(&self) -> bool {
        matches!(self, PolicyKind::LogisticTs | PolicyKind::TreeTs)
    }

    /// True for the policies that need the true per-record mean table.
    pub fn needs_true_means(&self) -> bool {
        matches!(
            self,
            PolicyKind::OracleUnconstrained | PolicyKind::OracleConstrained
        )
    }
}

impl core::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or(Error::UnsupportedPolicy {
                policy: "unknown",
                reason: "unrecognized policy name",
            })
    }
}

/// Queue-penalized argmax over all agents; ties break to the lowest index.
pub fn select(scores: &[f64], qb: &QueueBank) -> Result<usize> {
    select_among(scores, qb, |_| true)
}

/// Queue-penalized argmax restricted to agents passing `eligible`.
pub fn select_among<F: Fn(usize) -> bool>(
    scores: &[f64],
    qb: &QueueBank,
    eligible: F,
) -> Result<usize> {
    if scores.len() != qb.queues().len() {
        return Err(Error::DimensionMismatch {
            expected: qb.queues().len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite { place: "scores" });
    }
    let penalties = qb.penalties();
    let mut best: Option<(usize, f64)> = None;
    for a in 0..scores.len() {
        if !eligible(a) {
            continue;
        }
        let s = scores[a] - penalties[a];
        match best {
            Some((_, bs)) if s <= bs => {}
            _ => best = Some((a, s)),
        }
    }
    best.map(|(a, _)| a).ok_or(Error::InfeasibleCounts {
        reason: "no eligible agent to select",
    })
}

/// Categorical draw with probabilities `alpha_a` (unconstrained agents have
/// alpha 0 and are never drawn).
pub fn random_select<R: Rng + ?Sized>(profile: &CapacityProfile, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_constrained = 0;
    for a in 0..profile.num_agents() {
        if profile.is_unconstrained(a) {
            continue;
        }
        last_constrained = a;
        acc += profile.alpha(a);
        if u < acc {
            return a;
        }
    }
    last_constrained
}

/// Per-record argmax of the mean table; ties to the lowest index.
pub fn oracle_unconstrained(mu_table: &[Vec<f64>]) -> Vec<usize> {
    mu_table
        .iter()
        .map(|row| {
            let mut best = 0;
            for (a, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// Mean reward of an assignment under the mean table, summed in record
/// order so that different oracles producing the same assignment report
/// bitwise-identical values.
pub fn assignment_value(mu_table: &[Vec<f64>], assignment: &[usize]) -> f64 {
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(t, &a)| mu_table[t][a])
        .sum();
    total / assignment.len() as f64
}

/// Expected reward of random assignment with weights `alphas` on the table.
pub fn random_value(mu_table: &[Vec<f64>], alphas: &[f64]) -> f64 {
    let n = mu_table.len() as f64;
    let mut acc = 0.0;
    for row in mu_table {
        for (a, &mu) in row.iter().enumerate() {
            acc += alphas[a] * mu;
        }
    }
    acc / n
}

/// Two-agent constrained oracle over reward gaps `delta[t] = mu_1 - mu_2`.
///
/// Sends the `round(alpha * n)` records with the largest gaps (stable order
/// on ties) to agent 0 and the rest to agent 1. Returns the threshold
/// `tau` (the smallest selected gap; +inf when agent 0 receives nothing)
/// and the assignment.
pub fn oracle_constrained_two_agent(delta: &[f64], alpha: f64) -> Result<(f64, Vec<usize>)> {
    if delta.is_empty() {
        return Err(Error::InvalidLog {
            reason: "empty gap list",
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::RangeViolation { agent: 0, alpha });
    }
    let n = delta.len();
    let k = largest_remainder(&[alpha, 1.0 - alpha], n as u64)[0] as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| delta[b].total_cmp(&delta[a]).then(a.cmp(&b)));
    let mut assignment = vec![1usize; n];
    for &t in order.iter().take(k) {
        assignment[t] = 0;
    }
    let tau = if k == 0 {
        f64::INFINITY
    } else {
        delta[order[k - 1]]
    };
    Ok((tau, assignment))
}

/// Dual potentials reported by the general constrained oracle. Shadow prices
/// are unique only up to an additive constant; `threshold` is the two-agent
/// difference `lambda_0 - lambda_1` (0 when there are more agents).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShadowPrices {
    pub lambdas: Vec<f64>,
    pub threshold: f64,
}

/// Outcome of the general constrained oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedOracle {
    pub assignment: Vec<usize>,
    pub counts: Vec<u64>,
    pub value: f64,
    pub shadow_prices: ShadowPrices,
}

/// Exact constrained oracle for any number of agents.
///
/// Per-agent counts are `alpha_a * n` apportioned by largest remainder;
/// unconstrained agents instead get a capacity of `n` and compete on score.
/// The optimal assignment under those counts is solved as a transportation
/// problem; the reported shadow prices come from the dual potentials of the
/// final shortest-path tree and are diagnostics, not load-bearing outputs.
pub fn oracle_constrained_general(
    mu_table: &[Vec<f64>],
    profile: &CapacityProfile,
) -> Result<ConstrainedOracle> {
    if mu_table.is_empty() {
        return Err(Error::InvalidLog {
            reason: "empty mean table",
        });
    }
    let n = mu_table.len() as u64;
    let agents = profile.num_agents();
    if mu_table[0].len() != agents {
        return Err(Error::DimensionMismatch {
            expected: agents,
            got: mu_table[0].len(),
        });
    }
    let mut weights = vec![0.0; agents];
    for a in profile.constrained_agents() {
        weights[a] = profile.alpha(a);
    }
    let mut caps = largest_remainder(&weights, n);
    for a in 0..agents {
        if profile.is_unconstrained(a) {
            caps[a] = n;
        }
    }
    let (plan, lambdas) = batch::assign_with_caps_duals(mu_table, &caps)?;
    let threshold = if agents == 2 {
        lambdas[0] - lambdas[1]
    } else {
        0.0
    };
    let value = assignment_value(mu_table, &plan.assignment);
    Ok(ConstrainedOracle {
        assignment: plan.assignment,
        counts: plan.counts,
        value,
        shadow_prices: ShadowPrices { lambdas, threshold },
    })
}

/// Closed-form gain of the constrained oracle over random assignment when
/// capacity covers the disagreement regions (`p1 <= alpha <= 1 - p2` with
/// `p1 = frac(delta > 0)`, `p2 = frac(delta < 0)`), evaluated on the
/// empirical distribution:
///
/// `(1 - alpha) p1 E[delta | delta > 0] + alpha p2 E[-delta | delta < 0]`
pub fn disagreement_gain(delta: &[f64], alpha: f64) -> Result<f64> {
    if delta.is_empty() {
        return Err(Error::InvalidLog {
            reason: "empty gap list",
        });
    }
    let n = delta.len() as f64;
    let (mut n_pos, mut n_neg) = (0u64, 0u64);
    let (mut sum_pos, mut sum_neg) = (0.0, 0.0);
    for &d in delta {
        if d > 0.0 {
            n_pos += 1;
            sum_pos += d;
        } else if d < 0.0 {
            n_neg += 1;
            sum_neg += -d;
        }
    }
    let p1 = n_pos as f64 / n;
    let p2 = n_neg as f64 / n;
    if alpha < p1 || alpha > 1.0 - p2 {
        return Err(Error::CapacityOutsideWindow {
            alpha,
            lo: p1,
            hi: 1.0 - p2,
        });
    }
    let mean_pos = if n_pos > 0 {
        sum_pos / n_pos as f64
    } else {
        0.0
    };
    let mean_neg = if n_neg > 0 {
        sum_neg / n_neg as f64
    } else {
        0.0
    };
    Ok((1.0 - alpha) * p1 * mean_pos + alpha * p2 * mean_neg)
}
