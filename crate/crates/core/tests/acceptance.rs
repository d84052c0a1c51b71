//! Acceptance suite: one test per release criterion, each printing a
//! `PASS criterion N` line when its assertions hold.
//!
//! Every expected value here is either computed by an independent oracle
//! implemented in this file (explicit matrix inversion, full-gradient MAP
//! optimization, exhaustive assignment enumeration, closed-form integrals)
//! or pinned from first principles; none is copied from the engine under
//! test.

// The explicit-inverse and enumeration oracles here use indexed loops over
// matrix entries on purpose.
#![allow(clippy::needless_range_loop)]

use capbandit_core::batch::{apportion_counts, assign_batch, SCORE_SCALE};
use capbandit_core::domain::{CapacityProfile, TaskLog, TaskRecord};
use capbandit_core::harness::{
    self, compute_regret, run_batched, run_offline_benchmark, run_online, ExperimentConfig,
    ModelFamily, ReplaySource,
};
use capbandit_core::models::{sigmoid, LogisticPosterior};
use capbandit_core::policy::{
    self, assignment_value, disagreement_gain, oracle_constrained_general,
    oracle_constrained_two_agent, random_value, PolicyKind,
};
use capbandit_core::synth::{self, AgentMean, ContextLaw, SynthSpec};
use capbandit_core::QueueBank;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn complementary_source(rounds: usize, seed: u64) -> ReplaySource {
    ReplaySource::from_synth(synth::generate(&SynthSpec::complementary(rounds), seed).unwrap())
}

fn default_cfg() -> ExperimentConfig {
    ExperimentConfig::default()
}

/// Snap onto a 2^-10 grid: keeps all score gaps far above the 1e-6 cost
/// discretization so exactness comparisons cannot be flipped by rounding.
fn grid(v: f64) -> f64 {
    (v * 1024.0).round() / 1024.0
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

// ---------------------------------------------------------------------------
// Criterion 1: queue capacity enforcement
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_queue_capacity_enforcement() {
    let source = complementary_source(10_000, 101);
    let cfg = default_cfg();
    let profile = CapacityProfile::two_agent(0.3).unwrap();
    let policies = [
        PolicyKind::LogisticGreedy,
        PolicyKind::LogisticTs,
        PolicyKind::TreeGreedy,
        PolicyKind::TreeTs,
        PolicyKind::LearnedNonContextual,
    ];
    for kind in policies {
        let start = Instant::now();
        let result = run_online(&source, &cfg, kind, &profile, 11).unwrap();
        let elapsed = start.elapsed();
        for a in 0..2 {
            let dev = (result.realized_fractions[a] - profile.alpha(a)).abs();
            assert!(
                dev <= 0.01,
                "{kind}: fraction deviation {dev} for agent {a}"
            );
        }
        assert!(elapsed.as_secs_f64() < 10.0, "{kind}: run took {elapsed:?}");
    }
    println!(
        "PASS criterion 1: realized fractions within 0.01 of alpha at T=10000, eta=0.5, \
         every penalized policy, each run under 10 s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: Sherman-Morrison exactness
// ---------------------------------------------------------------------------

/// Test-local Gauss-Jordan inverse with partial pivoting.
fn invert(matrix: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = matrix.len();
    let mut aug: Vec<Vec<f64>> = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..d).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .unwrap();
        aug.swap(col, pivot);
        let p = aug[col][col];
        assert!(p.abs() > 1e-300, "singular matrix in test oracle");
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for row in 0..d {
            if row == col {
                continue;
            }
            let factor = aug[row][col];
            if factor == 0.0 {
                continue;
            }
            for k in 0..2 * d {
                aug[row][k] -= factor * aug[col][k];
            }
        }
    }
    aug.into_iter().map(|row| row[d..].to_vec()).collect()
}

fn cov_rows(post: &LogisticPosterior) -> Vec<Vec<f64>> {
    let d = post.dim();
    (0..d)
        .map(|i| (0..d).map(|j| post.covariance().get(i, j)).collect())
        .collect()
}

#[test]
fn criterion_02_sherman_morrison_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut steps = 0;
    while steps < 1000 {
        let d = rng.random_range(1..=10usize);
        let mut post = LogisticPosterior::new(d, 1.0, 0.5).unwrap();
        for _ in 0..25 {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let r = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };

            // Independent oracle: invert the current covariance, add the
            // curvature rank-one term, invert back.
            let sigma = cov_rows(&post);
            let p: f64 = sigmoid(post.mean().iter().zip(&x).map(|(m, v)| m * v).sum::<f64>());
            let w = (p * (1.0 - p)).clamp(1e-4, 0.25);
            let mut precision = invert(&sigma);
            for i in 0..d {
                for j in 0..d {
                    precision[i][j] += w * x[i] * x[j];
                }
            }
            let expected = invert(&precision);

            post.update(&x, r).unwrap();
            let mut frob = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let diff = post.covariance().get(i, j) - expected[i][j];
                    frob += diff * diff;
                }
            }
            assert!(
                frob.sqrt() < 1e-8,
                "step {steps}: Frobenius distance {}",
                frob.sqrt()
            );
            steps += 1;
        }
    }
    println!(
        "PASS criterion 2: 1000 rank-one covariance updates match the explicit inverse \
         of (Sigma^-1 + w x x') within 1e-8 Frobenius"
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: Laplace recursion vs batch MAP oracle
// ---------------------------------------------------------------------------

/// Independent full-gradient MAP optimizer (plain gradient descent on the
/// penalized log-likelihood; step size from the curvature bound).
fn map_by_gradient_descent(xs: &[Vec<f64>], ys: &[f64], gamma: f64) -> Vec<f64> {
    let d = xs[0].len();
    let lipschitz: f64 = 0.25
        * xs.iter()
            .map(|x| x.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
        + gamma;
    let step = 1.0 / lipschitz;
    let mut theta = vec![0.0; d];
    for _ in 0..200_000 {
        let mut grad: Vec<f64> = theta.iter().map(|t| -gamma * t).collect();
        for (x, &y) in xs.iter().zip(ys) {
            let z: f64 = theta.iter().zip(x).map(|(t, v)| t * v).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            for (g, v) in grad.iter_mut().zip(x) {
                *g += (y - p) * v;
            }
        }
        let norm: f64 = grad.iter().map(|g| g * g).sum();
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t += step * g;
        }
        if norm < 1e-24 {
            break;
        }
    }
    theta
}

#[test]
fn criterion_03_laplace_recursion_near_batch_map() {
    for seed in [31u64, 32, 33, 34, 35] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta_true = [1.0, -0.8, 0.5];
        let n = 50;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let z: f64 = theta_true.iter().zip(&x).map(|(t, v)| t * v).sum();
            let y = if rng.random::<f64>() < sigmoid(z) {
                1.0
            } else {
                0.0
            };
            xs.push(x);
            ys.push(y);
        }

        let mut post = LogisticPosterior::new(3, 1.0, 0.5).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            post.update(x, y).unwrap();
        }
        let map = map_by_gradient_descent(&xs, &ys, 1.0);
        let l2: f64 = post
            .mean()
            .iter()
            .zip(&map)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(l2 < 0.15, "seed {seed}: L2 distance {l2} (map {map:?})");
    }
    println!(
        "PASS criterion 3: sequential posterior mean within L2 0.15 of the batch MAP \
         from an independent full-gradient optimizer (n=50, d=3, five seeds)"
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: MCMF exactness against enumeration
// ---------------------------------------------------------------------------

fn enumerate_best_scaled(scores: &[Vec<f64>], counts: &[u64]) -> i64 {
    fn recurse(scores: &[Vec<f64>], remaining: &mut Vec<u64>, t: usize, acc: i64, best: &mut i64) {
        if t == scores.len() {
            *best = (*best).max(acc);
            return;
        }
        for a in 0..remaining.len() {
            if remaining[a] == 0 {
                continue;
            }
            remaining[a] -= 1;
            let s = (scores[t][a] * SCORE_SCALE).round() as i64;
            recurse(scores, remaining, t + 1, acc + s, best);
            remaining[a] += 1;
        }
    }
    let mut best = i64::MIN;
    recurse(scores, &mut counts.to_vec(), 0, 0, &mut best);
    best
}

#[test]
fn criterion_04_mcmf_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for instance in 0..200 {
        let tasks = rng.random_range(1..=8usize);
        let agents = rng.random_range(2..=3usize);
        let scores: Vec<Vec<f64>> = (0..tasks)
            .map(|_| (0..agents).map(|_| rng.random::<f64>()).collect())
            .collect();
        let mut counts = vec![0u64; agents];
        for _ in 0..tasks {
            counts[rng.random_range(0..agents)] += 1;
        }
        let plan = assign_batch(&scores, &counts).unwrap();
        assert_eq!(plan.counts, counts, "instance {instance}");
        let scaled: i64 = plan
            .assignment
            .iter()
            .enumerate()
            .map(|(t, &a)| (scores[t][a] * SCORE_SCALE).round() as i64)
            .sum();
        assert_eq!(
            scaled,
            enumerate_best_scaled(&scores, &counts),
            "instance {instance}"
        );
    }
    println!(
        "PASS criterion 4: 200 random instances (B<=8, A<=3) match brute-force \
         enumeration exactly in integer-scaled objective"
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: constrained-oracle dominance over random assignment
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_oracle_dominates_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut strict_checks = 0;
    for instance in 0..100 {
        let agents = if instance % 2 == 0 { 2 } else { 3 };
        // Random interior capacity profile.
        let raw: Vec<f64> = (0..agents).map(|_| rng.random::<f64>() + 0.2).collect();
        let total: f64 = raw.iter().sum();
        let mut alphas: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let head = 1.0 - alphas[1..].iter().sum::<f64>();
        alphas[0] = head;
        let profile = CapacityProfile::new(alphas, vec![false; agents]).unwrap();

        let mu_table: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..agents).map(|_| rng.random::<f64>()).collect())
            .collect();
        let oracle = oracle_constrained_general(&mu_table, &profile).unwrap();
        let rand_v = random_value(&mu_table, profile.alphas());
        assert!(
            oracle.value >= rand_v - 1e-12,
            "instance {instance}: {} < {rand_v}",
            oracle.value
        );
        let argmaxes = policy::oracle_unconstrained(&mu_table);
        let varying = argmaxes.iter().any(|&a| a != argmaxes[0]);
        if varying {
            assert!(
                oracle.value > rand_v,
                "instance {instance}: expected strict dominance"
            );
            strict_checks += 1;
        }
    }
    assert!(
        strict_checks >= 95,
        "only {strict_checks} varying instances"
    );
    println!(
        "PASS criterion 5: oracle value >= alpha-weighted column means on 100 random \
         tables (strict on all {strict_checks} tables with varying row argmax)"
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: two-agent threshold equivalence
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_two_agent_threshold_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut checked = 0;
    while checked < 100 {
        let n = 80;
        let mu_table: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![grid(rng.random()), grid(rng.random())])
            .collect();
        let delta: Vec<f64> = mu_table.iter().map(|r| r[0] - r[1]).collect();
        let mut sorted = delta.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        let alpha = grid(rng.random::<f64>() * 0.8 + 0.1);
        let profile = CapacityProfile::two_agent(alpha).unwrap();
        let general = oracle_constrained_general(&mu_table, &profile).unwrap();
        let (_, sorting) = oracle_constrained_two_agent(&delta, alpha).unwrap();
        let sorting_value = assignment_value(&mu_table, &sorting);
        assert_eq!(
            general.value.to_bits(),
            sorting_value.to_bits(),
            "table {checked}: {} vs {sorting_value}",
            general.value
        );
        checked += 1;
    }
    println!(
        "PASS criterion 6: MCMF and gap-sorting oracles agree exactly on 100 random \
         two-agent tables with distinct gaps"
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: disagreement-gain identity
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_disagreement_gain_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for instance in 0..25 {
        // n = 200 and alpha = 0.5 give exact counts; 50 positive gaps,
        // 70 negative, 80 zero keep 0.25 <= alpha <= 0.65.
        let n = 200;
        let mut mu_table = Vec::with_capacity(n);
        for i in 0..n {
            let base = grid(rng.random::<f64>() * 0.4 + 0.3);
            let gap = grid(rng.random::<f64>() * 0.2 + 0.05);
            let row = if i < 50 {
                vec![base + gap, base]
            } else if i < 120 {
                vec![base, base + gap]
            } else {
                vec![base, base]
            };
            mu_table.push(row);
        }
        let delta: Vec<f64> = mu_table.iter().map(|r| r[0] - r[1]).collect();
        let alpha = 0.5;
        let gain = disagreement_gain(&delta, alpha).unwrap();
        let profile = CapacityProfile::two_agent(alpha).unwrap();
        let oracle = oracle_constrained_general(&mu_table, &profile).unwrap();
        let rand_v = random_value(&mu_table, profile.alphas());
        let direct = oracle.value - rand_v;
        assert!(
            (gain - direct).abs() < 1e-9,
            "instance {instance}: closed form {gain} vs direct {direct}"
        );
    }
    println!(
        "PASS criterion 7: closed-form disagreement gain equals oracle minus random \
         within 1e-9 under exact counts"
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: outperforming both single agents at the disagreement point
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_oracle_beats_both_single_agents() {
    let synth = synth::generate(&SynthSpec::complementary(20_000), 808).unwrap();
    let mu = &synth.mu;
    let n = mu.len();
    let delta: Vec<f64> = mu.iter().map(|r| r[0] - r[1]).collect();
    let alpha = delta.iter().filter(|&&d| d >= 0.0).count() as f64 / n as f64;
    // The gap-sorting oracle (exactly equal to the transportation solve by
    // criterion 6) keeps this tractable at T = 20,000.
    let (_, assignment) = oracle_constrained_two_agent(&delta, alpha).unwrap();
    let value = assignment_value(mu, &assignment);

    let col_means = [
        mu.iter().map(|r| r[0]).sum::<f64>() / n as f64,
        mu.iter().map(|r| r[1]).sum::<f64>() / n as f64,
    ];
    let best_single = col_means[0].max(col_means[1]);
    assert!(
        value - best_single >= 0.05,
        "gap {} below 0.05",
        value - best_single
    );

    // Independent analytic oracle: E[max(mu_1, mu_2)] over U[-1, 1] is the
    // integral of sigmoid(4x) over [0, 1] = (ln(1 + e^4) - ln 2) / 4.
    let analytic = ((1.0 + 4.0f64.exp()).ln() - 2.0f64.ln()) / 4.0;
    assert!(
        (value - analytic).abs() <= 0.02,
        "sample oracle {value} vs analytic {analytic}"
    );
    println!(
        "PASS criterion 8: at alpha = frac(gap >= 0) the oracle value {:.4} beats both \
         single-agent means ({:.4}, {:.4}) by >= 0.05 and matches the closed-form \
         integral {:.4} within 0.02",
        value, col_means[0], col_means[1], analytic
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: contextual policies beat the random baseline online
// ---------------------------------------------------------------------------

fn cell_errors(
    source: &ReplaySource,
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    profile: &CapacityProfile,
) -> Vec<f64> {
    (0..cfg.runs)
        .map(|k| {
            let permuted = source.permuted(cfg.base_seed + k as u64);
            let seed = splitmix(cfg.base_seed + k as u64);
            run_online(&permuted, cfg, kind, profile, seed)
                .unwrap()
                .error_rate
        })
        .collect()
}

/// Same finalizer family as the engine's seed derivation, restated here so
/// the test fixes its own run-seed stream.
fn splitmix(v: u64) -> u64 {
    let mut z = v.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[test]
fn criterion_09_contextual_beats_random_online() {
    let source = complementary_source(5_000, 909);
    let mut cfg = default_cfg();
    cfg.runs = 50;
    cfg.base_seed = 90;
    let contextual = [
        PolicyKind::LogisticGreedy,
        PolicyKind::LogisticTs,
        PolicyKind::TreeGreedy,
        PolicyKind::TreeTs,
    ];
    for &alpha in &[0.2, 0.4, 0.5, 0.6, 0.8] {
        let profile = CapacityProfile::two_agent(alpha).unwrap();
        let (rand_mean, rand_se) = mean_and_se(&cell_errors(
            &source,
            &cfg,
            PolicyKind::RandomNonContextual,
            &profile,
        ));
        let mut by_kind = std::collections::HashMap::new();
        for kind in contextual {
            let (mean, se) = mean_and_se(&cell_errors(&source, &cfg, kind, &profile));
            assert!(
                mean + 2.0 * se < rand_mean - 2.0 * rand_se,
                "alpha {alpha} {kind}: {mean}+-{se} vs random {rand_mean}+-{rand_se}"
            );
            by_kind.insert(kind, (mean, se));
        }
        // Ordering check: tree <= logistic <= random in mean error, with a
        // two-pooled-standard-error allowance on the tree/logistic leg.
        let (tree, tree_se) = by_kind[&PolicyKind::TreeGreedy];
        let (logistic, logistic_se) = by_kind[&PolicyKind::LogisticGreedy];
        let pooled = (tree_se * tree_se + logistic_se * logistic_se).sqrt();
        assert!(
            tree <= logistic + 2.0 * pooled,
            "alpha {alpha}: tree {tree} vs logistic {logistic} (pooled se {pooled})"
        );
        assert!(logistic < rand_mean, "alpha {alpha}: logistic vs random");
    }
    println!(
        "PASS criterion 9: all contextual policies beat random with non-overlapping \
         2-s.e. bands at every interior capacity, with tree <= logistic <= random ordering"
    );
}

// ---------------------------------------------------------------------------
// Criterion 10: learned and random non-contextual policies are equivalent
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_learned_equals_random_non_contextual() {
    let source = complementary_source(5_000, 1010);
    let mut cfg = default_cfg();
    cfg.runs = 100;
    cfg.base_seed = 1000;
    let profile = CapacityProfile::two_agent(0.5).unwrap();
    let learned = cell_errors(&source, &cfg, PolicyKind::LearnedNonContextual, &profile);
    let random = cell_errors(&source, &cfg, PolicyKind::RandomNonContextual, &profile);
    let (lm, lse) = mean_and_se(&learned);
    let (rm, rse) = mean_and_se(&random);
    let pooled = (lse * lse + rse * rse).sqrt();
    assert!(
        (lm - rm).abs() < 2.0 * pooled,
        "learned {lm}+-{lse} vs random {rm}+-{rse}"
    );
    println!(
        "PASS criterion 10: learned non-contextual mean error {lm:.4} within 2 pooled \
         standard errors of random {rm:.4} over 100 runs"
    );
}

// ---------------------------------------------------------------------------
// Criterion 11: unconstrained free agent
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_free_agent_extension() {
    let spec = SynthSpec {
        dim: 1,
        rounds: 10_000,
        law: ContextLaw::UniformBox { lo: -1.0, hi: 1.0 },
        agents: vec![
            AgentMean::Logistic {
                theta: vec![4.0],
                intercept: 0.0,
            },
            AgentMean::Logistic {
                theta: vec![-4.0],
                intercept: 0.0,
            },
            AgentMean::Constant { value: 0.6 },
        ],
    };
    let source = ReplaySource::from_synth(synth::generate(&spec, 1111).unwrap());
    let mut cfg = default_cfg();
    cfg.record_trace = true;
    let profile = CapacityProfile::new(vec![0.5, 0.5, 0.0], vec![false, false, true]).unwrap();
    // Thompson scoring: under a pure greedy policy a never-selected
    // constrained agent can sit at its 0.5 prior forever while the free
    // agent's learned estimate beats it everywhere (queues only force
    // exploration when every agent is capacity-bound).
    let result = run_online(&source, &cfg, PolicyKind::LogisticTs, &profile, 17).unwrap();

    let trace = result.trace.as_ref().unwrap();
    assert!(
        trace.rows.iter().all(|r| r.queues[2] == 0.0),
        "free-agent queue moved off zero"
    );
    assert_eq!(result.final_queues[2], 0.0);

    let constrained_total: f64 = result.realized_fractions[0] + result.realized_fractions[1];
    assert!(
        result.realized_fractions[2] > 0.02,
        "free agent saw {} of tasks; scenario expects real participation",
        result.realized_fractions[2]
    );
    for a in 0..2 {
        let conditional = result.realized_fractions[a] / constrained_total;
        assert!(
            (conditional - profile.alpha(a)).abs() <= 0.02,
            "agent {a}: conditional fraction {conditional}"
        );
    }
    println!(
        "PASS criterion 11: free agent handled {:.1}% of tasks with queue pinned at 0; \
         constrained agents split their share within 0.02 of alpha",
        result.realized_fractions[2] * 100.0
    );
}

// ---------------------------------------------------------------------------
// Criterion 12: mini-batch consistency
// ---------------------------------------------------------------------------

#[test]
fn criterion_12_mini_batch_consistency() {
    let source = complementary_source(2_000, 1212);
    let cfg = default_cfg();
    let profile = CapacityProfile::two_agent(0.4).unwrap();

    // Batch size 1 reproduces the online run exactly for greedy policies.
    for kind in [PolicyKind::LogisticGreedy, PolicyKind::TreeGreedy] {
        let online = run_online(&source, &cfg, kind, &profile, 21).unwrap();
        let batched = run_batched(&source, &cfg, kind, &profile, 21, 1).unwrap();
        let diff = (online.error_rate - batched.error_rate).abs();
        assert!(diff < 1e-12, "{kind}: error difference {diff}");
        assert_eq!(online, batched);
    }

    // Real batches: per-batch realized counts sum to the batch size and
    // equal the apportionment at the batch-start queue state, replayed here
    // through the public queue and apportionment APIs.
    for batch_size in [7usize, 32, 250] {
        let mut cfg = cfg.clone();
        cfg.record_trace = true;
        let result = run_batched(
            &source,
            &cfg,
            PolicyKind::LogisticGreedy,
            &profile,
            22,
            batch_size,
        )
        .unwrap();
        let trace = result.trace.unwrap();
        let mut qb = QueueBank::new(profile.clone(), cfg.eta).unwrap();
        let mut start = 0;
        while start < trace.rows.len() {
            let end = (start + batch_size).min(trace.rows.len());
            let b = (end - start) as u64;
            let expected = apportion_counts(&profile, &qb, b);
            let mut realized = vec![0u64; 2];
            for row in &trace.rows[start..end] {
                realized[row.agent] += 1;
                assert_eq!(row.queues, qb.queues(), "queue snapshot mismatch");
            }
            assert_eq!(realized.iter().sum::<u64>(), b);
            assert_eq!(realized, expected, "batch at {start} (size {batch_size})");
            qb.batch_step(&realized, b).unwrap();
            start = end;
        }
    }
    println!(
        "PASS criterion 12: B=1 batching equals the online run exactly; batch counts \
         always sum to B and match the apportionment at each batch boundary"
    );
}

// ---------------------------------------------------------------------------
// Criterion 13: regret sublinearity proxy
// ---------------------------------------------------------------------------

/// Modified cumulative regret recomputed from the trace (the same quantity
/// `compute_regret` reports; equality is asserted on a subsample so the
/// fast path cannot drift from the public operation).
fn modified_series(trace: &capbandit_core::domain::AssignmentTrace, mu: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = 0.0;
    trace
        .rows
        .iter()
        .map(|row| {
            let best = (0..mu[row.round].len())
                .map(|a| mu[row.round][a] - trace.eta * row.queues[a])
                .fold(f64::NEG_INFINITY, f64::max);
            acc += best - (mu[row.round][row.agent] - trace.eta * row.queues[row.agent]);
            acc
        })
        .collect()
}

#[test]
fn criterion_13_regret_sublinearity_proxy() {
    let source = complementary_source(5_000, 1313);
    let mut cfg = default_cfg();
    cfg.record_trace = true;
    let profile = CapacityProfile::two_agent(0.5).unwrap();

    // Cross-check the fast in-test series against the public operation on
    // short runs (compute_regret also solves the full-sample oracle for its
    // plain series, so it is exercised at a tractable size).
    for k in 0..3u64 {
        let short = complementary_source(600, 1313).permuted(500 + k);
        let result = run_online(
            &short,
            &cfg,
            PolicyKind::LogisticTs,
            &profile,
            splitmix(500 + k),
        )
        .unwrap();
        let trace = result.trace.unwrap();
        let fast = modified_series(&trace, short.true_means().unwrap());
        let full = compute_regret(&trace, short.true_means().unwrap(), &profile).unwrap();
        for (a, b) in fast.iter().zip(&full.modified) {
            assert!((a - b).abs() < 1e-9, "series disagrees with compute_regret");
        }
        assert!(full.plain.len() == fast.len());
    }

    let mut concave = 0;
    let runs = 50;
    for k in 0..runs {
        let permuted = source.permuted(130 + k);
        let result = run_online(
            &permuted,
            &cfg,
            PolicyKind::LogisticTs,
            &profile,
            splitmix(130 + k),
        )
        .unwrap();
        let trace = result.trace.unwrap();
        let series = modified_series(&trace, permuted.true_means().unwrap());
        let half = series.len() / 2;
        let first = series[half - 1];
        let second = series[series.len() - 1] - first;
        if second < first {
            concave += 1;
        }
    }
    assert!(
        concave * 100 >= runs * 80,
        "only {concave}/{runs} runs had a smaller second-half increment"
    );

    // Random assignment accumulates modified regret linearly.
    let permuted = source.permuted(9130);
    let result = run_online(
        &permuted,
        &cfg,
        PolicyKind::RandomNonContextual,
        &profile,
        splitmix(9130),
    )
    .unwrap();
    let series = modified_series(&result.trace.unwrap(), permuted.true_means().unwrap());
    let n = series.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let r_mean = series.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (t, r) in series.iter().enumerate() {
        let dt = t as f64 - t_mean;
        cov += dt * (r - r_mean);
        var += dt * dt;
    }
    let slope = cov / var;
    assert!(slope > 0.05, "random-policy regret slope {slope}");
    println!(
        "PASS criterion 13: Thompson regret concave in {concave}/{runs} runs; random \
         policy slope {slope:.3} per round"
    );
}

// ---------------------------------------------------------------------------
// Criterion 14: queue-penalty sensitivity
// ---------------------------------------------------------------------------

#[test]
fn criterion_14_eta_sensitivity() {
    let source = complementary_source(5_000, 1416);
    let profile = CapacityProfile::two_agent(0.5).unwrap();
    let etas = [0.0, 0.1, 0.5, 5.0];
    let mut stats = Vec::new();
    for &eta in &etas {
        let mut cfg = default_cfg();
        cfg.runs = 50;
        cfg.base_seed = 180;
        cfg.eta = eta;
        let errors = cell_errors(&source, &cfg, PolicyKind::LogisticGreedy, &profile);
        stats.push(mean_and_se(&errors));
    }
    for w in stats.windows(2) {
        let (lo_mean, lo_se) = w[0];
        let (hi_mean, hi_se) = w[1];
        let pooled = (lo_se * lo_se + hi_se * hi_se).sqrt();
        assert!(
            hi_mean >= lo_mean - pooled,
            "error not non-decreasing: {lo_mean}+-{lo_se} then {hi_mean}+-{hi_se}"
        );
    }
    let mut cfg = default_cfg();
    cfg.runs = 50;
    cfg.base_seed = 180;
    let random_errors = cell_errors(&source, &cfg, PolicyKind::RandomNonContextual, &profile);
    let (rand_mean, rand_se) = mean_and_se(&random_errors);
    let (big_eta_mean, big_eta_se) = stats[3];
    let pooled = (rand_se * rand_se + big_eta_se * big_eta_se).sqrt();
    assert!(
        (big_eta_mean - rand_mean).abs() <= pooled,
        "eta=5 error {big_eta_mean} vs random {rand_mean} (pooled se {pooled})"
    );
    println!(
        "PASS criterion 14: error non-decreasing in eta within 1 s.e. \
         ({:.4} -> {:.4} -> {:.4} -> {:.4}) and eta=5 within 1 s.e. of random ({:.4})",
        stats[0].0, stats[1].0, stats[2].0, stats[3].0, rand_mean
    );
}

// ---------------------------------------------------------------------------
// Offline benchmark sanity used alongside the criteria
// ---------------------------------------------------------------------------

#[test]
fn run_to_run_spread_stays_small_at_scale() {
    // Error spread across 100 permutations of a T = 10,000 synthetic log
    // stays within 0.02 for the contextual policies.
    let source = complementary_source(10_000, 55);
    let mut cfg = default_cfg();
    cfg.runs = 100;
    cfg.base_seed = 500;
    let profile = CapacityProfile::two_agent(0.5).unwrap();
    let errors = cell_errors(&source, &cfg, PolicyKind::LogisticGreedy, &profile);
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let std = (errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
        / (errors.len() as f64 - 1.0))
        .sqrt();
    assert!(std <= 0.02, "std {std}");
}

#[test]
fn offline_benchmark_sits_at_or_below_online_error() {
    let source = complementary_source(5_000, 77);
    let cfg = default_cfg();
    let profile = CapacityProfile::two_agent(0.5).unwrap();
    let offline = run_offline_benchmark(&source, ModelFamily::Logistic, &cfg, 7).unwrap();
    let online = run_online(&source, &cfg, PolicyKind::LogisticGreedy, &profile, 7)
        .unwrap()
        .error_rate;
    // Reported as the error-gap diagnostic; offline is an optimistic bound
    // so this is an expectation about the scenario, not a guarantee.
    assert!(
        offline <= online + 0.02,
        "offline {offline} far above online {online}"
    );
}

// Keep TaskLog/TaskRecord linked into this test target for the ingestion
// round-trip exercised by the companion crate.
#[allow(dead_code)]
fn _types(_: &TaskLog, _: &TaskRecord, _: &harness::SweepTable) {}
