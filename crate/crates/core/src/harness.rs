//! Experiment engine: the online assignment loop, mini-batch loop, offline
//! benchmark, capacity sweeps over permutation ensembles, and regret.
//!
//! A run replays a task log in order. Each round the policy scores every
//! agent (point estimate or posterior draw, depending on the policy kind),
//! picks the queue-penalized argmax, observes only the chosen agent's
//! reward, updates that agent's model, and steps the virtual queues. The
//! sweep repeats this over seeded permutations of the log for every
//! (policy, capacity profile) cell and aggregates mean and standard
//! deviation of the error rate.
//!
//! Seeding: run `k` of a sweep permutes the log with `base_seed + k` and
//! drives model randomness from an independent stream mixed out of the same
//! value, so identical configurations reproduce identical tables.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::batch::{apportion_counts, assign_batch_with_caps};
use crate::capacity::QueueBank;
use crate::domain::{AssignmentTrace, CapacityProfile, TaskLog, TraceRow};
use crate::error::Error;
use crate::linalg::{dot, Matrix};
use crate::math;
use crate::models::{
    sigmoid, LogisticPosterior, MarginalMean, RewardModel, TreeEnsemble, TreeParams,
};
use crate::policy::{self, PolicyKind};
use crate::synth::SynthLog;
use crate::Result;

// Salts keeping the derived seed streams (model rng, tree bootstraps,
// offline fits) disjoint from the permutation stream.
const SALT_RUN: u64 = 0x52;
const SALT_TREE: u64 = 0x54;
const SALT_OFFLINE: u64 = 0x4f;

/// Reward-model hyperparameters shared by every policy in an experiment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelHyperparams {
    /// Thompson exploration scale for the logistic posterior.
    pub kappa: f64,
    /// Gaussian prior precision for the logistic posterior.
    pub gamma_prior: f64,
    pub tree: TreeParams,
}

impl Default for ModelHyperparams {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            gamma_prior: 1.0,
            tree: TreeParams::default(),
        }
    }
}

/// Experiment-level knobs. `batch_size = 0` means fully online.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentConfig {
    pub policies: Vec<PolicyKind>,
    pub grid: Vec<CapacityProfile>,
    pub eta: f64,
    pub runs: usize,
    pub base_seed: u64,
    pub batch_size: usize,
    pub models: ModelHyperparams,
    /// Append a constant 1.0 feature before modeling.
    pub bias: bool,
    /// Standardize each raw feature to zero mean, unit variance over the
    /// whole log before modeling.
    pub standardize: bool,
    pub record_trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            policies: Vec::new(),
            grid: Vec::new(),
            eta: 0.5,
            runs: 100,
            base_seed: 0,
            batch_size: 0,
            models: ModelHyperparams::default(),
            bias: true,
            standardize: false,
            record_trace: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::NonFinite { place: "eta" });
        }
        if self.runs == 0 {
            return Err(Error::InvalidSpec {
                reason: "runs must be >= 1",
            });
        }
        if !(self.models.kappa.is_finite() && self.models.kappa >= 0.0) {
            return Err(Error::NonFinite { place: "kappa" });
        }
        if !(self.models.gamma_prior.is_finite() && self.models.gamma_prior > 0.0) {
            return Err(Error::NonFinite {
                place: "gamma_prior",
            });
        }
        let t = &self.models.tree;
        if t.n_trees == 0 || t.max_depth == 0 || t.min_leaf == 0 || t.refit_period == 0 {
            return Err(Error::InvalidSpec {
                reason: "tree hyperparameters must be positive",
            });
        }
        Ok(())
    }
}

/// A replayable task source: the log plus, for synthetic data, the true
/// per-record mean table kept aligned under permutation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplaySource {
    log: TaskLog,
    mu: Option<Vec<Vec<f64>>>,
}

impl ReplaySource {
    pub fn from_log(log: TaskLog) -> Self {
        Self { log, mu: None }
    }

    pub fn from_synth(synth: SynthLog) -> Self {
        Self {
            log: synth.log,
            mu: Some(synth.mu),
        }
    }

    pub fn log(&self) -> &TaskLog {
        &self.log
    }

    pub fn true_means(&self) -> Option<&[Vec<f64>]> {
        self.mu.as_deref()
    }

    pub fn len(&self) -> usize {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    /// Shuffles records (and the aligned mean table) with the same
    /// Fisher-Yates stream as [`TaskLog::permuted`].
    pub fn permuted(&self, seed: u64) -> ReplaySource {
        use rand::seq::SliceRandom;
        let mut indices: Vec<usize> = (0..self.log.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        indices.shuffle(&mut rng);
        let records = indices
            .iter()
            .map(|&i| self.log.records()[i].clone())
            .collect();
        let log = TaskLog::new(records, self.log.agent_names().to_vec())
            .expect("permutation preserves validity");
        let mu = self
            .mu
            .as_ref()
            .map(|mu| indices.iter().map(|&i| mu[i].clone()).collect());
        ReplaySource { log, mu }
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunResult {
    /// `1 - mean realized reward`.
    pub error_rate: f64,
    pub mean_reward: f64,
    /// Fraction of tasks each agent received; sums to 1.
    pub realized_fractions: Vec<f64>,
    pub final_queues: Vec<f64>,
    /// Total reward-model updates over the run (exactly one per round for
    /// model-backed policies; 0 for the random baseline and oracles).
    pub model_updates: u64,
    /// Final cumulative queue-penalized regret, present when the source
    /// carries true means.
    pub cumulative_regret: Option<f64>,
    pub trace: Option<AssignmentTrace>,
}

/// Cumulative regret series from a traced run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegretSeries {
    /// Shortfall of the queue-penalized reward `mu_a(x) - eta Q_a` against
    /// the per-round best agent under the realized queue state.
    pub modified: Vec<f64>,
    /// Shortfall of the plain reward against the constrained-oracle value of
    /// the replayed sample.
    pub plain: Vec<f64>,
}

struct RunState {
    models: Vec<Option<RewardModel>>,
    qb: QueueBank,
    rng: ChaCha8Rng,
    eligible: Vec<bool>,
}

impl RunState {
    fn new(
        kind: PolicyKind,
        profile: &CapacityProfile,
        cfg: &ExperimentConfig,
        feature_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let agents = profile.num_agents();
        let mut models: Vec<Option<RewardModel>> = Vec::with_capacity(agents);
        for a in 0..agents {
            let model = match kind {
                PolicyKind::LogisticGreedy | PolicyKind::LogisticTs => Some(RewardModel::Logistic(
                    LogisticPosterior::new(feature_dim, cfg.models.gamma_prior, cfg.models.kappa)?,
                )),
                PolicyKind::TreeGreedy | PolicyKind::TreeTs => {
                    Some(RewardModel::Tree(TreeEnsemble::new(
                        cfg.models.tree,
                        math::mix_seed(&[seed, a as u64, SALT_TREE]),
                    )))
                }
                PolicyKind::LearnedNonContextual => {
                    Some(RewardModel::Marginal(MarginalMean::new()))
                }
                PolicyKind::RandomNonContextual
                | PolicyKind::OracleUnconstrained
                | PolicyKind::OracleConstrained => None,
            };
            models.push(model);
        }
        // A constrained agent with a zero target is excluded from selection
        // outright; transient queue states would otherwise let it win rounds
        // it can never repay.
        let eligible = (0..agents)
            .map(|a| profile.is_unconstrained(a) || profile.alpha(a) > 0.0)
            .collect();
        Ok(Self {
            models,
            qb: QueueBank::new(profile.clone(), cfg.eta)?,
            rng: ChaCha8Rng::seed_from_u64(seed),
            eligible,
        })
    }

    fn scores_for(
        &mut self,
        kind: PolicyKind,
        x: &[f64],
        true_mu: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        let agents = self.models.len();
        let mut scores = vec![0.0; agents];
        match kind {
            PolicyKind::OracleUnconstrained | PolicyKind::OracleConstrained => {
                let mu = true_mu.ok_or(Error::TrueMeansUnavailable)?;
                scores.copy_from_slice(mu);
            }
            PolicyKind::RandomNonContextual => {
                for a in 0..agents {
                    scores[a] = self.qb.profile().alpha(a);
                }
            }
            _ => {
                for a in 0..agents {
                    let model = self.models[a].as_ref().expect("model-backed policy");
                    scores[a] = if kind.is_thompson() {
                        model.sample_ts(x, &mut self.rng)?
                    } else {
                        model.predict_greedy(x)?
                    };
                }
            }
        }
        Ok(scores)
    }
}

/// Context matrix after optional standardization and bias append.
fn preprocess(log: &TaskLog, bias: bool, standardize: bool) -> Vec<Vec<f64>> {
    let d = log.feature_dim();
    let n = log.len() as f64;
    let (mut means, mut stds) = (vec![0.0; d], vec![1.0; d]);
    if standardize {
        for rec in log.records() {
            for (m, v) in means.iter_mut().zip(&rec.context) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; d];
        for rec in log.records() {
            for ((v, m), &c) in vars.iter_mut().zip(&means).zip(&rec.context) {
                *v += (c - m) * (c - m);
            }
        }
        for (s, v) in stds.iter_mut().zip(&vars) {
            let sd = math::sqrt(v / n);
            *s = if sd > 0.0 { sd } else { 1.0 };
        }
    }
    log.records()
        .iter()
        .map(|rec| {
            let mut x: Vec<f64> = if standardize {
                rec.context
                    .iter()
                    .zip(means.iter().zip(&stds))
                    .map(|(&c, (m, s))| (c - m) / s)
                    .collect()
            } else {
                rec.context.clone()
            };
            if bias {
                x.push(1.0);
            }
            x
        })
        .collect()
}

/// A finished run together with its final learner and queue state (what a
/// checkpoint captures).
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub result: RunResult,
    pub models: Vec<Option<RewardModel>>,
    pub queues: QueueBank,
}

/// Replays the log online under one policy.
///
/// Per round: score every agent, select the queue-penalized argmax (ties to
/// the lowest index), reveal only the chosen agent's reward, update that
/// agent's model, and step the queues. Oracle kinds require the source to
/// carry true means; the unconstrained oracle ignores queue penalties.
pub fn run_online(
    source: &ReplaySource,
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    profile: &CapacityProfile,
    seed: u64,
) -> Result<RunResult> {
    run_online_stateful(source, cfg, kind, profile, seed).map(|a| a.result)
}

/// [`run_online`] that also hands back the final model and queue state.
pub fn run_online_stateful(
    source: &ReplaySource,
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    profile: &CapacityProfile,
    seed: u64,
) -> Result<RunArtifacts> {
    cfg.validate()?;
    check_shapes(source, profile, kind)?;
    let features = preprocess(source.log(), cfg.bias, cfg.standardize);
    let mut state = RunState::new(kind, profile, cfg, features[0].len(), seed)?;
    let rounds = source.len();
    let agents = profile.num_agents();

    let mut counts = vec![0u64; agents];
    let mut reward_sum = 0.0;
    let mut regret_sum = source.true_means().map(|_| 0.0);
    let mut trace = cfg.record_trace.then(|| AssignmentTrace {
        eta: cfg.eta,
        rows: Vec::with_capacity(rounds),
    });

    for (t, rec) in source.log().records().iter().enumerate() {
        let true_mu = source.true_means().map(|mu| mu[t].as_slice());
        let scores = state.scores_for(kind, &features[t], true_mu)?;
        let eligible = |a: usize| state.eligible[a];
        let choice = match kind {
            PolicyKind::RandomNonContextual => policy::random_select(profile, &mut state.rng),
            PolicyKind::OracleUnconstrained => argmax_eligible(&scores, &state.eligible)?,
            _ => policy::select_among(&scores, &state.qb, eligible)?,
        };
        let reward = rec.reward_of(choice);
        if let Some(trace) = trace.as_mut() {
            trace.rows.push(TraceRow {
                round: t,
                agent: choice,
                reward,
                queues: state.qb.queues().to_vec(),
                scores: scores.clone(),
            });
        }
        if let (Some(acc), Some(mu)) = (regret_sum.as_mut(), true_mu) {
            *acc += modified_regret_increment(mu, &state.qb, &state.eligible, choice);
        }
        counts[choice] += 1;
        reward_sum += reward;
        if let Some(model) = state.models[choice].as_mut() {
            model.update(&features[t], reward)?;
        }
        state.qb.step(choice)?;
    }

    Ok(finish_run(
        reward_sum, counts, state, rounds, regret_sum, trace,
    ))
}

/// Replays the log in batches of `batch_size`.
///
/// Per batch: score all pairs (Thompson kinds draw one posterior function
/// per agent for the whole batch), subtract queue penalties, apportion
/// integer counts from the backlog-adjusted targets, solve the exact
/// matching, reveal the chosen rewards, update models in task order, and
/// apply the batch queue update. Unconstrained agents enter the matching
/// with a capacity equal to the batch size instead of a hard count.
///
/// A batch size of 1 degenerates to [`run_online`]: with a single task the
/// count-first procedure has nothing to match, so the online rule is the
/// batch rule.
pub fn run_batched(
    source: &ReplaySource,
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    profile: &CapacityProfile,
    seed: u64,
    batch_size: usize,
) -> Result<RunResult> {
    run_batched_stateful(source, cfg, kind, profile, seed, batch_size).map(|a| a.result)
}

/// [`run_batched`] that also hands back the final model and queue state.
pub fn run_batched_stateful(
    source: &ReplaySource,
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    profile: &CapacityProfile,
    seed: u64,
    batch_size: usize,
) -> Result<RunArtifacts> {
    if batch_size == 0 {
        return Err(Error::InvalidSpec {
            reason: "batch size must be >= 1",
        });
    }
    if batch_size == 1 {
        return run_online_stateful(source, cfg, kind, profile, seed);
    }
    cfg.validate()?;
    check_shapes(source, profile, kind)?;
    if kind == PolicyKind::RandomNonContextual {
        // Random assignment has no batch semantics; run it online.
        return run_online_stateful(source, cfg, kind, profile, seed);
    }
    let features = preprocess(source.log(), cfg.bias, cfg.standardize);
    let mut state = RunState::new(kind, profile, cfg, features[0].len(), seed)?;
    let rounds = source.len();
    let agents = profile.num_agents();

    let mut counts = vec![0u64; agents];
    let mut reward_sum = 0.0;
    let mut regret_sum = source.true_means().map(|_| 0.0);
    let mut trace = cfg.record_trace.then(|| AssignmentTrace {
        eta: cfg.eta,
        rows: Vec::with_capacity(rounds),
    });

    let mut start = 0;
    while start < rounds {
        let end = (start + batch_size).min(rounds);
        let b = (end - start) as u64;
        let penalties = state.qb.penalties();
        let batch_features = &features[start..end];

        // Raw scores per agent across the batch. Thompson kinds sample one
        // posterior function per agent and evaluate it on every task.
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(agents);
        for a in 0..agents {
            let column = match kind {
                PolicyKind::OracleUnconstrained | PolicyKind::OracleConstrained => {
                    let mu = source.true_means().ok_or(Error::TrueMeansUnavailable)?;
                    (start..end).map(|t| mu[t][a]).collect()
                }
                _ => {
                    let model = state.models[a].as_ref().expect("model-backed policy");
                    if kind.is_thompson() {
                        batch_sample_column(model, batch_features, &mut state.rng)?
                    } else {
                        batch_features
                            .iter()
                            .map(|x| model.predict_greedy(x))
                            .collect::<Result<Vec<f64>>>()?
                    }
                }
            };
            columns.push(column);
        }

        let mut score_matrix = Vec::with_capacity(end - start);
        for offset in 0..(end - start) {
            let mut row = vec![0.0; agents];
            for a in 0..agents {
                let penalty = if kind == PolicyKind::OracleUnconstrained {
                    0.0
                } else {
                    penalties[a]
                };
                row[a] = columns[a][offset] - penalty;
            }
            score_matrix.push(row);
        }

        let apportioned = apportion_counts(profile, &state.qb, b);
        let mut caps = apportioned.clone();
        for a in 0..agents {
            if profile.is_unconstrained(a) {
                caps[a] = b;
            } else if !state.eligible[a] {
                caps[a] = 0;
            }
        }
        let plan = assign_batch_with_caps(&score_matrix, &caps)?;

        for (offset, &choice) in plan.assignment.iter().enumerate() {
            let t = start + offset;
            let reward = source.log().records()[t].reward_of(choice);
            if let Some(trace) = trace.as_mut() {
                // Raw model scores, as in the online trace; the queue
                // snapshot lets consumers rebuild the penalized values.
                let raw: Vec<f64> = (0..agents).map(|a| columns[a][offset]).collect();
                trace.rows.push(TraceRow {
                    round: t,
                    agent: choice,
                    reward,
                    queues: state.qb.queues().to_vec(),
                    scores: raw,
                });
            }
            if let (Some(acc), Some(mu)) = (regret_sum.as_mut(), source.true_means()) {
                *acc += modified_regret_increment(&mu[t], &state.qb, &state.eligible, choice);
            }
            counts[choice] += 1;
            reward_sum += reward;
            if let Some(model) = state.models[choice].as_mut() {
                model.update(&features[t], reward)?;
            }
        }
        state.qb.batch_step(&plan.counts, b)?;
        start = end;
    }

    Ok(finish_run(
        reward_sum, counts, state, rounds, regret_sum, trace,
    ))
}

/// One posterior function draw per agent, evaluated over the whole batch:
/// a sampled weight vector for the logistic model, a uniformly chosen tree
/// for the ensemble (uniform fresh draws per task before the first fit),
/// and the point estimate for the marginal model.
fn batch_sample_column<R: Rng + ?Sized>(
    model: &RewardModel,
    batch_features: &[Vec<f64>],
    rng: &mut R,
) -> Result<Vec<f64>> {
    match model {
        RewardModel::Logistic(post) => {
            let theta = post.sample_theta(rng)?;
            Ok(batch_features
                .iter()
                .map(|x| sigmoid(dot(&theta, x)))
                .collect())
        }
        RewardModel::Tree(ens) => match ens.sample_tree_index(rng) {
            Some(ix) => Ok(batch_features
                .iter()
                .map(|x| ens.predict_tree(ix, x))
                .collect()),
            None => Ok(batch_features.iter().map(|_| rng.random::<f64>()).collect()),
        },
        RewardModel::Marginal(m) => Ok(batch_features.iter().map(|_| m.predict()).collect()),
    }
}

fn argmax_eligible(scores: &[f64], eligible: &[bool]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (a, &s) in scores.iter().enumerate() {
        if !eligible[a] {
            continue;
        }
        if !s.is_finite() {
            return Err(Error::NonFinite { place: "scores" });
        }
        match best {
            Some((_, bs)) if s <= bs => {}
            _ => best = Some((a, s)),
        }
    }
    best.map(|(a, _)| a).ok_or(Error::InfeasibleCounts {
        reason: "no eligible agent to select",
    })
}

fn modified_regret_increment(mu: &[f64], qb: &QueueBank, eligible: &[bool], choice: usize) -> f64 {
    let penalties = qb.penalties();
    let mut best = f64::NEG_INFINITY;
    for a in 0..mu.len() {
        if !eligible[a] {
            continue;
        }
        best = best.max(mu[a] - penalties[a]);
    }
    best - (mu[choice] - penalties[choice])
}

fn check_shapes(source: &ReplaySource, profile: &CapacityProfile, kind: PolicyKind) -> Result<()> {
    if source.is_empty() {
        return Err(Error::InvalidLog {
            reason: "empty source",
        });
    }
    if profile.num_agents() != source.log().num_agents() {
        return Err(Error::DimensionMismatch {
            expected: source.log().num_agents(),
            got: profile.num_agents(),
        });
    }
    if kind.needs_true_means() && source.true_means().is_none() {
        return Err(Error::TrueMeansUnavailable);
    }
    Ok(())
}

fn finish_run(
    reward_sum: f64,
    counts: Vec<u64>,
    state: RunState,
    rounds: usize,
    regret_sum: Option<f64>,
    trace: Option<AssignmentTrace>,
) -> RunArtifacts {
    let n = rounds as f64;
    let mean_reward = reward_sum / n;
    let model_updates = state
        .models
        .iter()
        .filter_map(|m| m.as_ref().map(RewardModel::observations))
        .sum();
    let result = RunResult {
        error_rate: 1.0 - mean_reward,
        mean_reward,
        realized_fractions: counts.iter().map(|&c| c as f64 / n).collect(),
        final_queues: state.qb.queues().to_vec(),
        model_updates,
        cumulative_regret: regret_sum,
        trace,
    };
    RunArtifacts {
        result,
        models: state.models,
        queues: state.qb,
    }
}

/// Which model family the offline benchmark fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ModelFamily {
    Logistic,
    Tree,
}

impl ModelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Logistic => "logistic",
            ModelFamily::Tree => "tree",
        }
    }
}

/// Offline unconstrained benchmark: fit each agent's model on the full log
/// with full counterfactual rewards, re-assign every record to the argmax of
/// the fitted means, and return the error rate. An optimistic reference for
/// what offline-learned, capacity-free assignment could achieve.
pub fn run_offline_benchmark(
    source: &ReplaySource,
    family: ModelFamily,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<f64> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(Error::InvalidLog {
            reason: "empty source",
        });
    }
    let log = source.log();
    let features = preprocess(log, cfg.bias, cfg.standardize);
    let agents = log.num_agents();
    let mut predictions: Vec<Vec<f64>> = Vec::with_capacity(agents);
    for a in 0..agents {
        let targets: Vec<f64> = log.records().iter().map(|r| r.reward_of(a)).collect();
        let preds = match family {
            ModelFamily::Logistic => {
                let theta = logistic_map_fit(&features, &targets, cfg.models.gamma_prior);
                features.iter().map(|x| sigmoid(dot(&theta, x))).collect()
            }
            ModelFamily::Tree => {
                let ens = TreeEnsemble::fit_bulk(
                    cfg.models.tree,
                    math::mix_seed(&[seed, a as u64, SALT_OFFLINE]),
                    &features,
                    &targets,
                );
                features.iter().map(|x| ens.predict_greedy(x)).collect()
            }
        };
        predictions.push(preds);
    }
    let mut reward_sum = 0.0;
    for (t, rec) in log.records().iter().enumerate() {
        let mut best = 0;
        for a in 1..agents {
            if predictions[a][t] > predictions[best][t] {
                best = a;
            }
        }
        reward_sum += rec.reward_of(best);
    }
    Ok(1.0 - reward_sum / log.len() as f64)
}

/// Batch MAP fit of the logistic model by Newton iterations on the
/// penalized log-likelihood with prior precision `gamma`.
fn logistic_map_fit(features: &[Vec<f64>], targets: &[f64], gamma: f64) -> Vec<f64> {
    let d = features[0].len();
    let mut theta = vec![0.0; d];
    for _ in 0..50 {
        let mut grad = vec![0.0; d];
        for (g, t) in grad.iter_mut().zip(&theta) {
            *g = -gamma * t;
        }
        let mut hessian = Matrix::scaled_identity(d, gamma);
        for (x, &y) in features.iter().zip(targets) {
            let p = sigmoid(dot(&theta, x));
            let w = (p * (1.0 - p)).max(1e-10);
            for i in 0..d {
                grad[i] += (y - p) * x[i];
                for j in 0..=i {
                    let v = hessian.get(i, j) + w * x[i] * x[j];
                    hessian.set(i, j, v);
                    hessian.set(j, i, v);
                }
            }
        }
        let Some(step) = hessian.solve_spd(&grad) else {
            break;
        };
        let mut sq = 0.0;
        for (t, s) in theta.iter_mut().zip(&step) {
            *t += s;
            sq += s * s;
        }
        if sq < 1e-20 {
            break;
        }
    }
    theta
}

/// One cell of a sweep: a policy at a capacity profile, aggregated over
/// `runs` permuted executions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepCell {
    pub policy: PolicyKind,
    pub profile_index: usize,
    /// First agent's capacity target, the sweep axis in the two-agent case.
    pub alpha_head: f64,
    pub mean_error: f64,
    /// Sample standard deviation of the error across runs (0 for one run).
    pub std_error: f64,
    pub mean_fractions: Vec<f64>,
    pub runs: usize,
}

impl SweepCell {
    pub fn standard_error(&self) -> f64 {
        self.std_error / math::sqrt(self.runs as f64)
    }
}

/// Aggregated sweep output plus optional offline benchmark reference lines.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepTable {
    pub profiles: Vec<CapacityProfile>,
    pub cells: Vec<SweepCell>,
    pub offline: Vec<(ModelFamily, f64)>,
}

impl SweepTable {
    pub fn cell(&self, policy: PolicyKind, profile_index: usize) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.policy == policy && c.profile_index == profile_index)
    }
}

/// Enumerates the (policy, profile, run) executions of a sweep so callers
/// can parallelize; `run_sweep` executes them sequentially.
pub fn sweep_cells(cfg: &ExperimentConfig) -> Vec<(PolicyKind, usize)> {
    let mut cells = Vec::with_capacity(cfg.policies.len() * cfg.grid.len());
    for &kind in &cfg.policies {
        for p in 0..cfg.grid.len() {
            cells.push((kind, p));
        }
    }
    cells
}

/// Executes run `k` of a sweep cell: permute the log with `base_seed + k`,
/// derive an independent model-randomness stream from the same value, and
/// replay (online or batched per the config).
pub fn run_sweep_member(
    source: &ReplaySource,
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    profile: &CapacityProfile,
    k: usize,
) -> Result<RunResult> {
    let permuted = source.permuted(cfg.base_seed + k as u64);
    let run_seed = math::mix_seed(&[cfg.base_seed + k as u64, SALT_RUN]);
    if cfg.batch_size <= 1 {
        run_online(&permuted, cfg, kind, profile, run_seed)
    } else {
        run_batched(&permuted, cfg, kind, profile, run_seed, cfg.batch_size)
    }
}

/// Aggregates the `runs` results of one cell, in run order, into its sweep
/// row. Callers that execute members in parallel must still pass them here
/// ordered by `k` so tables reproduce byte for byte.
pub fn aggregate_cell(
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    profile_index: usize,
    results: &[RunResult],
) -> SweepCell {
    let profile = &cfg.grid[profile_index];
    let agents = profile.num_agents();
    let mut frac_sums = vec![0.0; agents];
    for result in results {
        for (s, f) in frac_sums.iter_mut().zip(&result.realized_fractions) {
            *s += f;
        }
    }
    let n = results.len() as f64;
    let mean = results.iter().map(|r| r.error_rate).sum::<f64>() / n;
    let std = if results.len() > 1 {
        let ss: f64 = results
            .iter()
            .map(|r| (r.error_rate - mean) * (r.error_rate - mean))
            .sum();
        math::sqrt(ss / (n - 1.0))
    } else {
        0.0
    };
    SweepCell {
        policy: kind,
        profile_index,
        alpha_head: profile.alpha(0),
        mean_error: mean,
        std_error: std,
        mean_fractions: frac_sums.iter().map(|s| s / n).collect(),
        runs: results.len(),
    }
}

/// Executes all runs of one sweep cell and aggregates them.
pub fn run_cell(
    source: &ReplaySource,
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    profile_index: usize,
) -> Result<SweepCell> {
    let profile = &cfg.grid[profile_index];
    let results = (0..cfg.runs)
        .map(|k| run_sweep_member(source, cfg, kind, profile, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_cell(cfg, kind, profile_index, &results))
}

/// Runs every (policy, profile) cell over `cfg.runs` seeded permutations.
pub fn run_sweep(source: &ReplaySource, cfg: &ExperimentConfig) -> Result<SweepTable> {
    cfg.validate()?;
    if cfg.grid.is_empty() || cfg.policies.is_empty() {
        return Err(Error::InvalidSpec {
            reason: "sweep needs at least one policy and one profile",
        });
    }
    let mut cells = Vec::new();
    for (kind, p) in sweep_cells(cfg) {
        cells.push(run_cell(source, cfg, kind, p)?);
    }
    Ok(SweepTable {
        profiles: cfg.grid.clone(),
        cells,
        offline: Vec::new(),
    })
}

/// Cumulative regret series for a traced run against true means.
///
/// The modified series compares the queue-penalized reward of the chosen
/// agent to the per-round best under the realized queue state (agents with a
/// zero constrained target are excluded, matching the selection rule). The
/// plain series compares realized true means to the constrained-oracle value
/// of the whole sample.
pub fn compute_regret(
    trace: &AssignmentTrace,
    mu_table: &[Vec<f64>],
    profile: &CapacityProfile,
) -> Result<RegretSeries> {
    if trace.rows.len() != mu_table.len() {
        return Err(Error::DimensionMismatch {
            expected: mu_table.len(),
            got: trace.rows.len(),
        });
    }
    let agents = profile.num_agents();
    let eligible: Vec<bool> = (0..agents)
        .map(|a| profile.is_unconstrained(a) || profile.alpha(a) > 0.0)
        .collect();
    let oracle = policy::oracle_constrained_general(mu_table, profile)?;
    let mut modified = Vec::with_capacity(trace.rows.len());
    let mut plain = Vec::with_capacity(trace.rows.len());
    let (mut acc_m, mut acc_p) = (0.0, 0.0);
    for row in &trace.rows {
        let mu = &mu_table[row.round];
        let mut best = f64::NEG_INFINITY;
        for a in 0..agents {
            if !eligible[a] {
                continue;
            }
            let q = if profile.is_unconstrained(a) {
                0.0
            } else {
                row.queues[a]
            };
            best = best.max(mu[a] - trace.eta * q);
        }
        let chosen = mu[row.agent] - trace.eta * row.queues[row.agent];
        acc_m += best - chosen;
        acc_p += oracle.value - mu[row.agent];
        modified.push(acc_m);
        plain.push(acc_p);
    }
    Ok(RegretSeries { modified, plain })
}
