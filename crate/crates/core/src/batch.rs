//! Mini-batch assignment: integer count apportionment under queue backlogs
//! and exact score-maximizing matching via min-cost max-flow.
//!
//! A batch of `B` tasks is assigned in two steps. First, per-agent integer
//! counts are derived from the capacity targets net of accumulated queue
//! backlog (largest-remainder rounding). Second, tasks are matched to agents
//! to maximize the summed score subject to those counts, solved exactly as a
//! min-cost max-flow over the bipartite task/agent network with scores
//! negated and scaled to integers.

use alloc::vec;
use alloc::vec::Vec;

use crate::capacity::QueueBank;
use crate::domain::CapacityProfile;
use crate::error::Error;
use crate::math;
use crate::Result;

/// Fixed-point scale for exact integer costs. Scores are probabilities minus
/// queue penalties (magnitude well under 1e3), so 1e6 keeps rounding error
/// below any realistic score gap within i64 arithmetic.
pub const SCORE_SCALE: f64 = 1e6;

/// Largest score magnitude accepted by the scaler.
pub const SCORE_BOUND: f64 = 1e3;

/// Apportion `total` indivisible units proportionally to nonnegative
/// `weights` by the largest-remainder method; remainder ties go to the
/// lowest index.
pub fn largest_remainder(weights: &[f64], total: u64) -> Vec<u64> {
    let wsum: f64 = weights.iter().sum();
    if wsum <= 0.0 {
        let mut out = vec![0u64; weights.len()];
        if let Some(first) = out.first_mut() {
            *first = total;
        }
        return out;
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w * total as f64 / wsum).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| math::floor(*q) as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - math::floor(quotas[a]);
        let fb = quotas[b] - math::floor(quotas[b]);
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take((total - assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

/// Integer counts for the next batch of `batch` tasks.
///
/// Constrained agents get targets `max(batch * alpha_a - Q_a, 0)`,
/// renormalized to sum to the batch size and rounded by largest remainder;
/// the backlog subtraction makes future batches compensate for past
/// imbalance. If every backlog-adjusted target is zero, the raw alphas are
/// used. Unconstrained agents get a count of zero here; they participate in
/// the matching through a capacity-`batch` arc instead (see
/// [`assign_batch_with_caps`]).
pub fn apportion_counts(profile: &CapacityProfile, qb: &QueueBank, batch: u64) -> Vec<u64> {
    let agents = profile.num_agents();
    let mut demand = vec![0.0; agents];
    for a in profile.constrained_agents() {
        demand[a] = (batch as f64 * profile.alpha(a) - qb.queues()[a]).max(0.0);
    }
    if demand.iter().sum::<f64>() <= 0.0 {
        for a in profile.constrained_agents() {
            demand[a] = profile.alpha(a);
        }
    }
    largest_remainder(&demand, batch)
}

/// An exact batch assignment: per-agent counts, the task-to-agent map, and
/// the realized total score.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BatchPlan {
    pub counts: Vec<u64>,
    pub assignment: Vec<usize>,
    pub total_score: f64,
}

/// Max `sum score(t, a(t))` subject to exactly `counts[a]` tasks per agent.
///
/// `scores` is row-per-task, column-per-agent; counts must sum to the number
/// of tasks. Ties in the scaled objective resolve deterministically through
/// the flow order.
pub fn assign_batch(scores: &[Vec<f64>], counts: &[u64]) -> Result<BatchPlan> {
    let tasks = scores.len() as u64;
    let total: u64 = counts.iter().sum();
    if total != tasks {
        return Err(Error::CountMismatch {
            expected: tasks,
            got: total,
        });
    }
    let plan = assign_batch_with_caps(scores, counts)?;
    debug_assert_eq!(plan.counts, counts);
    Ok(plan)
}

/// Like [`assign_batch`] but with per-agent upper bounds whose sum may
/// exceed the task count; used when unconstrained agents compete for the
/// residual workload on score alone. When the caps sum exactly to the task
/// count the assignment meets every cap exactly.
pub fn assign_batch_with_caps(scores: &[Vec<f64>], caps: &[u64]) -> Result<BatchPlan> {
    assign_with_caps_duals(scores, caps).map(|(plan, _)| plan)
}

/// Matching plus per-agent dual prices read off the final node potentials
/// (normalized so the sink sits at zero, in unscaled score units).
pub(crate) fn assign_with_caps_duals(
    scores: &[Vec<f64>],
    caps: &[u64],
) -> Result<(BatchPlan, Vec<f64>)> {
    let tasks = scores.len();
    let agents = caps.len();
    if tasks == 0 {
        return Ok((
            BatchPlan {
                counts: vec![0; agents],
                assignment: Vec::new(),
                total_score: 0.0,
            },
            vec![0.0; agents],
        ));
    }
    if caps.iter().sum::<u64>() < tasks as u64 {
        return Err(Error::InfeasibleCounts {
            reason: "agent capacities sum below the number of tasks",
        });
    }
    for row in scores {
        if row.len() != agents {
            return Err(Error::DimensionMismatch {
                expected: agents,
                got: row.len(),
            });
        }
        for &s in row {
            if !s.is_finite() {
                return Err(Error::NonFinite { place: "score" });
            }
            if s.abs() > SCORE_BOUND {
                return Err(Error::ScoreOverflow { score: s });
            }
        }
    }

    // Node layout: 0 = source, 1..=tasks, tasks+1..=tasks+agents, last = sink.
    let source = 0;
    let task0 = 1;
    let agent0 = task0 + tasks;
    let sink = agent0 + agents;
    let mut net = FlowNetwork::new(sink + 1);
    let mut task_arcs: Vec<Vec<u32>> = vec![Vec::with_capacity(agents); tasks];
    for t in 0..tasks {
        net.add_edge(source, task0 + t, 1, 0)?;
        for a in 0..agents {
            let cost = -math::round(scores[t][a] * SCORE_SCALE) as i64;
            let e = net.add_edge(task0 + t, agent0 + a, 1, cost)?;
            task_arcs[t].push(e);
        }
    }
    for a in 0..agents {
        net.add_edge(agent0 + a, sink, caps[a] as i64, 0)?;
    }
    let (flow, _cost) = net.solve(source, sink)?;
    if flow != tasks as i64 {
        return Err(Error::InfeasibleCounts {
            reason: "matching did not place every task",
        });
    }

    let mut assignment = vec![0usize; tasks];
    let mut counts = vec![0u64; agents];
    let mut total_score = 0.0;
    for t in 0..tasks {
        let mut chosen = None;
        for (a, &e) in task_arcs[t].iter().enumerate() {
            if net.flow_on(e) > 0 {
                chosen = Some(a);
                break;
            }
        }
        let a = chosen.ok_or(Error::NetworkMalformed {
            reason: "task left unassigned after solve",
        })?;
        assignment[t] = a;
        counts[a] += 1;
        total_score += scores[t][a];
    }
    let sink_pot = net.potential_of(sink);
    let duals = (0..agents)
        .map(|a| (sink_pot - net.potential_of(agent0 + a)) as f64 / SCORE_SCALE)
        .collect();
    Ok((
        BatchPlan {
            counts,
            assignment,
            total_score,
        },
        duals,
    ))
}

/// Min-cost max-flow over integer capacities and costs, solved by
/// successive shortest paths with node potentials (Bellman-Ford once for
/// the initial potentials, Dijkstra on reduced costs afterwards).
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    nodes: usize,
    adj: Vec<Vec<u32>>,
    to: Vec<u32>,
    residual: Vec<i64>,
    cap: Vec<i64>,
    cost: Vec<i64>,
    potential: Vec<i64>,
}

const INF: i64 = i64::MAX / 4;

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            residual: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
            potential: vec![0; nodes],
        }
    }

    /// Adds a directed arc and its residual twin; returns the forward arc id.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> Result<u32> {
        if from >= self.nodes || to >= self.nodes || from == to {
            return Err(Error::NetworkMalformed {
                reason: "arc endpoints out of range",
            });
        }
        if cap < 0 {
            return Err(Error::NetworkMalformed {
                reason: "negative arc capacity",
            });
        }
        let e = self.to.len() as u32;
        self.adj[from].push(e);
        self.to.push(to as u32);
        self.residual.push(cap);
        self.cap.push(cap);
        self.cost.push(cost);
        self.adj[to].push(e + 1);
        self.to.push(from as u32);
        self.residual.push(0);
        self.cap.push(0);
        self.cost.push(-cost);
        Ok(e)
    }

    /// Flow currently routed through forward arc `e`.
    pub fn flow_on(&self, e: u32) -> i64 {
        self.cap[e as usize] - self.residual[e as usize]
    }

    /// Node potential after a solve (dual value up to an additive constant).
    pub fn potential_of(&self, node: usize) -> i64 {
        self.potential[node]
    }

    /// Runs min-cost max-flow from `source` to `sink`; returns
    /// `(max_flow, min_cost)`.
    pub fn solve(&mut self, source: usize, sink: usize) -> Result<(i64, i64)> {
        if source >= self.nodes || sink >= self.nodes || source == sink {
            return Err(Error::NetworkMalformed {
                reason: "bad source or sink",
            });
        }
        self.init_potentials(source)?;
        let mut total_flow = 0;
        let mut total_cost = 0;
        while let Some((dist, parent)) = self.dijkstra(source, sink) {
            // Push the bottleneck along the shortest path.
            let mut bottleneck = INF;
            let mut at = sink;
            while at != source {
                let e = parent[at] as usize;
                bottleneck = bottleneck.min(self.residual[e]);
                at = self.to[e ^ 1] as usize;
            }
            let mut at = sink;
            while at != source {
                let e = parent[at] as usize;
                self.residual[e] -= bottleneck;
                self.residual[e ^ 1] += bottleneck;
                total_cost += bottleneck * self.cost[e];
                at = self.to[e ^ 1] as usize;
            }
            total_flow += bottleneck;
            for v in 0..self.nodes {
                if dist[v] < INF {
                    self.potential[v] += dist[v];
                }
            }
        }
        Ok((total_flow, total_cost))
    }

    /// Bellman-Ford over residual arcs; tolerates negative arc costs but not
    /// negative cycles (the bipartite construction has none).
    fn init_potentials(&mut self, source: usize) -> Result<()> {
        self.potential = vec![INF; self.nodes];
        self.potential[source] = 0;
        for round in 0..self.nodes {
            let mut changed = false;
            for u in 0..self.nodes {
                if self.potential[u] >= INF {
                    continue;
                }
                for &e in &self.adj[u] {
                    let e = e as usize;
                    if self.residual[e] <= 0 {
                        continue;
                    }
                    let v = self.to[e] as usize;
                    let cand = self.potential[u] + self.cost[e];
                    if cand < self.potential[v] {
                        self.potential[v] = cand;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
            if round + 1 == self.nodes && changed {
                return Err(Error::NetworkMalformed {
                    reason: "negative cycle in arc costs",
                });
            }
        }
        for p in self.potential.iter_mut() {
            if *p >= INF {
                *p = 0;
            }
        }
        Ok(())
    }

    fn dijkstra(&self, source: usize, sink: usize) -> Option<(Vec<i64>, Vec<u32>)> {
        use alloc::collections::BinaryHeap;
        use core::cmp::Reverse;

        let mut dist = vec![INF; self.nodes];
        let mut parent = vec![u32::MAX; self.nodes];
        let mut heap = BinaryHeap::new();
        dist[source] = 0;
        heap.push(Reverse((0i64, source as u32)));
        while let Some(Reverse((d, u))) = heap.pop() {
            let u = u as usize;
            if d > dist[u] {
                continue;
            }
            for &e in &self.adj[u] {
                let e = e as usize;
                if self.residual[e] <= 0 {
                    continue;
                }
                let v = self.to[e] as usize;
                let reduced = self.cost[e] + self.potential[u] - self.potential[v];
                debug_assert!(reduced >= 0, "negative reduced cost");
                let cand = dist[u] + reduced;
                if cand < dist[v] {
                    dist[v] = cand;
                    parent[v] = e as u32;
                    heap.push(Reverse((cand, v as u32)));
                }
            }
        }
        if parent[sink] == u32::MAX {
            None
        } else {
            Some((dist, parent))
        }
    }

    /// True iff no residual arc has negative reduced cost (the optimality
    /// certificate for the final flow).
    pub fn optimality_certificate(&self) -> bool {
        for u in 0..self.nodes {
            for &e in &self.adj[u] {
                let e = e as usize;
                if self.residual[e] <= 0 {
                    continue;
                }
                let v = self.to[e] as usize;
                if self.cost[e] + self.potential[u] - self.potential[v] < 0 {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::QueueBank;
    use crate::domain::CapacityProfile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_agent_bank() -> (CapacityProfile, QueueBank) {
        let profile = CapacityProfile::two_agent(0.5).unwrap();
        let qb = QueueBank::new(profile.clone(), 0.5).unwrap();
        (profile, qb)
    }

    #[test]
    fn apportion_even_split() {
        let (profile, qb) = two_agent_bank();
        assert_eq!(apportion_counts(&profile, &qb, 10), vec![5, 5]);
    }

    #[test]
    fn apportion_odd_batch_ties_to_lowest_index() {
        let (profile, qb) = two_agent_bank();
        assert_eq!(apportion_counts(&profile, &qb, 11), vec![6, 5]);
    }

    #[test]
    fn apportion_subtracts_backlog() {
        let profile = CapacityProfile::two_agent(0.5).unwrap();
        let mut qb = QueueBank::new(profile.clone(), 0.5).unwrap();
        // Four consecutive picks of agent 0 leave q = (2, 0).
        for _ in 0..4 {
            qb.step(0).unwrap();
        }
        assert_eq!(qb.queues(), &[2.0, 0.0]);
        // Targets (3, 5) renormalize to (3.75, 6.25) and round to (4, 6).
        assert_eq!(apportion_counts(&profile, &qb, 10), vec![4, 6]);
    }

    #[test]
    fn apportion_free_agent_gets_zero() {
        let profile = CapacityProfile::new(vec![0.5, 0.5, 0.0], vec![false, false, true]).unwrap();
        let qb = QueueBank::new(profile.clone(), 0.5).unwrap();
        assert_eq!(apportion_counts(&profile, &qb, 9), vec![5, 4, 0]);
    }

    #[test]
    fn largest_remainder_sums_and_ties() {
        assert_eq!(largest_remainder(&[1.0, 3.0, 2.0], 10), vec![2, 5, 3]);
        assert_eq!(largest_remainder(&[0.5, 0.5], 11), vec![6, 5]);
        assert_eq!(largest_remainder(&[0.0, 0.0], 4), vec![4, 0]);
    }

    #[test]
    fn mcmf_single_arc() {
        let mut net = FlowNetwork::new(2);
        net.add_edge(0, 1, 3, 2).unwrap();
        assert_eq!(net.solve(0, 1).unwrap(), (3, 6));
        assert!(net.optimality_certificate());
    }

    #[test]
    fn mcmf_zero_capacity() {
        let mut net = FlowNetwork::new(2);
        net.add_edge(0, 1, 0, 5).unwrap();
        assert_eq!(net.solve(0, 1).unwrap(), (0, 0));
    }

    #[test]
    fn mcmf_rejects_malformed() {
        let mut net = FlowNetwork::new(2);
        assert!(net.add_edge(0, 2, 1, 0).is_err());
        assert!(net.add_edge(0, 0, 1, 0).is_err());
        assert!(net.add_edge(0, 1, -1, 0).is_err());
        assert!(net.solve(0, 0).is_err());
    }

    #[test]
    fn assign_two_by_two() {
        let scores = vec![vec![0.9, 0.1], vec![0.8, 0.7]];
        let plan = assign_batch(&scores, &[1, 1]).unwrap();
        assert_eq!(plan.assignment, vec![0, 1]);
        assert!((plan.total_score - 1.6).abs() < 1e-12);
        assert_eq!(plan.counts, vec![1, 1]);
    }

    #[test]
    fn assign_forced_to_one_agent() {
        let scores = vec![vec![0.1, 0.9], vec![0.2, 0.8], vec![0.3, 0.7]];
        let plan = assign_batch(&scores, &[3, 0]).unwrap();
        assert_eq!(plan.assignment, vec![0, 0, 0]);
        assert!((plan.total_score - 0.6).abs() < 1e-12);
    }

    #[test]
    fn assign_rejects_bad_counts_and_scores() {
        let scores = vec![vec![0.5, 0.5]];
        assert!(matches!(
            assign_batch(&scores, &[2, 1]),
            Err(Error::CountMismatch { .. })
        ));
        let big = vec![vec![2000.0, 0.0]];
        assert!(matches!(
            assign_batch(&big, &[1, 0]),
            Err(Error::ScoreOverflow { .. })
        ));
    }

    /// Exhaustive enumeration over count-respecting assignments.
    fn brute_force(scores: &[Vec<f64>], counts: &[u64]) -> i64 {
        fn recurse(
            scores: &[Vec<f64>],
            remaining: &mut Vec<u64>,
            t: usize,
            acc: i64,
            best: &mut i64,
        ) {
            if t == scores.len() {
                *best = (*best).max(acc);
                return;
            }
            for a in 0..remaining.len() {
                if remaining[a] == 0 {
                    continue;
                }
                remaining[a] -= 1;
                let s = math::round(scores[t][a] * SCORE_SCALE) as i64;
                recurse(scores, remaining, t + 1, acc + s, best);
                remaining[a] += 1;
            }
        }
        let mut best = i64::MIN;
        recurse(scores, &mut counts.to_vec(), 0, 0, &mut best);
        best
    }

    fn scaled_total(scores: &[Vec<f64>], plan: &BatchPlan) -> i64 {
        plan.assignment
            .iter()
            .enumerate()
            .map(|(t, &a)| math::round(scores[t][a] * SCORE_SCALE) as i64)
            .sum()
    }

    #[test]
    fn assign_matches_enumeration_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..60 {
            let tasks = rng.random_range(2..=6usize);
            let agents = rng.random_range(2..=3usize);
            let scores: Vec<Vec<f64>> = (0..tasks)
                .map(|_| (0..agents).map(|_| rng.random::<f64>()).collect())
                .collect();
            let mut counts = vec![0u64; agents];
            for _ in 0..tasks {
                counts[rng.random_range(0..agents)] += 1;
            }
            let plan = assign_batch(&scores, &counts).unwrap();
            assert_eq!(plan.counts, counts);
            assert_eq!(scaled_total(&scores, &plan), brute_force(&scores, &counts));
        }
    }

    #[test]
    fn positive_scaling_preserves_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scores: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let counts = [2u64, 2, 2];
        let base = assign_batch(&scores, &counts).unwrap();
        for scale in [0.1, 0.5, 2.0, 10.0] {
            let scaled: Vec<Vec<f64>> = scores
                .iter()
                .map(|row| row.iter().map(|s| s * scale).collect())
                .collect();
            let plan = assign_batch(&scaled, &counts).unwrap();
            assert_eq!(plan.assignment, base.assignment, "scale {scale}");
        }
    }

    #[test]
    fn caps_variant_lets_free_agent_absorb() {
        // Two constrained slots but a third agent capped at the batch size:
        // the matching sends tasks wherever the score is best.
        let scores = vec![
            vec![0.2, 0.1, 0.9],
            vec![0.9, 0.1, 0.2],
            vec![0.1, 0.8, 0.2],
        ];
        let plan = assign_batch_with_caps(&scores, &[1, 1, 3]).unwrap();
        assert_eq!(plan.assignment, vec![2, 0, 1]);
    }
}
