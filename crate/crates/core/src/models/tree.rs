//! Bootstrap ensemble of shallow CART regression trees.
//!
//! Every observed pair is buffered. After each `refit_period` updates the
//! whole ensemble is refit: each tree trains on its own seeded bootstrap
//! resample (with replacement, same size as the buffer). Splits greedily
//! minimize the summed squared error of the children, with candidate
//! thresholds at midpoints between consecutive distinct feature values.
//!
//! Greedy prediction averages all trees; Thompson sampling picks one tree
//! uniformly at random. Before the first fit the ensemble predicts its prior
//! mean of 0.5 (greedy) or a uniform draw from [0, 1] (sampled). Predictions
//! are clipped to [0, 1].
//!
//! Fitting is organized for the online setting where the ensemble is refit
//! hundreds of times per run: the buffer lives in one flat row-major block,
//! each refit argsorts it once per non-constant feature, and every tree's
//! bootstrap sample is emitted in sorted order from multiplicity counts, so
//! individual trees never sort.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;

/// Ensemble hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub refit_period: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            n_trees: 20,
            max_depth: 3,
            min_leaf: 10,
            refit_period: 20,
        }
    }
}

const PRIOR_MEAN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A single fitted regression tree (arena-backed).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

/// Row-major training data view.
#[derive(Clone, Copy)]
struct FlatData<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
    dim: usize,
}

impl FlatData<'_> {
    #[inline]
    fn x(&self, idx: u32, feature: usize) -> f64 {
        self.xs[idx as usize * self.dim + feature]
    }

    #[inline]
    fn y(&self, idx: u32) -> f64 {
        self.ys[idx as usize]
    }
}

impl RegressionTree {
    /// A tree that predicts `value` everywhere.
    pub fn constant(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return value.clamp(0.0, 1.0),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Fit from per-feature index lists already sorted by that feature's
    /// value (indices may repeat for bootstrap multiplicity). The recursion
    /// partitions these lists instead of re-sorting at every node. With no
    /// splittable feature the tree is a single leaf at `fallback_mean`.
    fn fit_presorted(
        data: FlatData<'_>,
        lists: Vec<(usize, Vec<u32>)>,
        fallback_mean: f64,
        params: &TreeParams,
    ) -> Self {
        if lists.is_empty() {
            return Self::constant(fallback_mean);
        }
        let mut builder = TreeBuilder {
            data,
            params,
            nodes: Vec::new(),
        };
        builder.build(lists, 0);
        Self {
            nodes: builder.nodes,
        }
    }
}

struct TreeBuilder<'a> {
    data: FlatData<'a>,
    params: &'a TreeParams,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    /// Appends the subtree for the given per-feature sorted index lists and
    /// returns its root index.
    fn build(&mut self, lists: Vec<(usize, Vec<u32>)>, depth: usize) -> usize {
        let n = lists[0].1.len();
        let sum: f64 = lists[0].1.iter().map(|&i| self.data.y(i)).sum();
        let mean = sum / n as f64;

        let splittable = depth < self.params.max_depth && n >= 2 * self.params.min_leaf;
        let best = if splittable {
            self.best_split(&lists, sum)
        } else {
            None
        };

        let Some((feature, threshold)) = best else {
            let at = self.nodes.len();
            self.nodes.push(Node::Leaf { value: mean });
            return at;
        };

        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for (f, list) in &lists {
            let mut left = Vec::new();
            let mut right = Vec::new();
            for &i in list {
                if self.data.x(i, feature) <= threshold {
                    left.push(i);
                } else {
                    right.push(i);
                }
            }
            left_lists.push((*f, left));
            right_lists.push((*f, right));
        }
        drop(lists);

        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean }); // placeholder
        let left = self.build(left_lists, depth + 1);
        let right = self.build(right_lists, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }

    /// Greedy variance-reduction split: maximize
    /// `sum_L^2 / n_L + sum_R^2 / n_R` over features and midpoint
    /// thresholds, honoring the minimum leaf size on both sides.
    fn best_split(&self, lists: &[(usize, Vec<u32>)], total_sum: f64) -> Option<(usize, f64)> {
        let n = lists[0].1.len();
        let min_leaf = self.params.min_leaf;
        let mut best: Option<(f64, usize, f64)> = None;
        for (feature, list) in lists {
            let feature = *feature;
            // Constant within this node: nothing to split on.
            if self.data.x(list[0], feature) == self.data.x(list[n - 1], feature) {
                continue;
            }
            let mut left_sum = 0.0;
            let mut prev = self.data.x(list[0], feature);
            for i in 1..n {
                left_sum += self.data.y(list[i - 1]);
                let next = self.data.x(list[i], feature);
                if prev == next {
                    continue;
                }
                let midpoint = 0.5 * (prev + next);
                prev = next;
                let (nl, nr) = (i, n - i);
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let right_sum = total_sum - left_sum;
                let score = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64;
                let better = match best {
                    None => true,
                    Some((s, _, _)) => score > s,
                };
                if better {
                    best = Some((score, feature, midpoint));
                }
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }
}

/// The per-agent ensemble: fitted trees plus the observation buffer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeEnsemble {
    params: TreeParams,
    trees: Vec<RegressionTree>,
    /// Row-major contexts, `dim` entries per observation.
    buffer_xs: Vec<f64>,
    buffer_ys: Vec<f64>,
    dim: usize,
    updates_since_refit: u64,
    refits: u64,
    seed: u64,
}

impl TreeEnsemble {
    /// Empty ensemble. `seed` keys all bootstrap draws; each tree's resample
    /// uses a stream derived from (seed, refit counter, tree index).
    pub fn new(params: TreeParams, seed: u64) -> Self {
        Self {
            params,
            trees: Vec::new(),
            buffer_xs: Vec::new(),
            buffer_ys: Vec::new(),
            dim: 0,
            updates_since_refit: 0,
            refits: 0,
            seed,
        }
    }

    /// Ensemble with externally supplied trees (testing and reconstruction).
    pub fn from_trees(params: TreeParams, trees: Vec<RegressionTree>, seed: u64) -> Self {
        Self {
            params,
            trees,
            buffer_xs: Vec::new(),
            buffer_ys: Vec::new(),
            dim: 0,
            updates_since_refit: 0,
            refits: 0,
            seed,
        }
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn is_fitted(&self) -> bool {
        !self.trees.is_empty()
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer_ys.len()
    }

    /// Completed refit passes, `floor(observations / refit_period)`.
    pub fn refit_count(&self) -> u64 {
        self.refits
    }

    pub fn observations(&self) -> u64 {
        self.buffer_ys.len() as u64
    }

    /// Ensemble-mean prediction, clipped to [0, 1]; the prior mean 0.5
    /// before the first fit.
    pub fn predict_greedy(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return PRIOR_MEAN;
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        (sum / self.trees.len() as f64).clamp(0.0, 1.0)
    }

    /// Bootstrap Thompson draw: one uniformly chosen tree's prediction, or a
    /// uniform draw from [0, 1] before the first fit.
    pub fn sample_ts<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        match self.sample_tree_index(rng) {
            Some(pick) => self.trees[pick].predict(x),
            None => rng.random::<f64>(),
        }
    }

    /// Index of a uniformly sampled tree; `None` before the first fit.
    pub fn sample_tree_index<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.trees.is_empty() {
            None
        } else {
            Some(rng.random_range(0..self.trees.len()))
        }
    }

    /// Prediction of one fitted tree.
    pub fn predict_tree(&self, index: usize, x: &[f64]) -> f64 {
        self.trees[index].predict(x)
    }

    /// Buffer one pair; refit the whole ensemble when the period elapses.
    pub fn update(&mut self, x: &[f64], r: f64) {
        if self.buffer_ys.is_empty() {
            self.dim = x.len();
        }
        debug_assert_eq!(x.len(), self.dim);
        self.buffer_xs.extend_from_slice(x);
        self.buffer_ys.push(r);
        self.updates_since_refit += 1;
        if self.updates_since_refit >= self.params.refit_period {
            self.refit();
            self.updates_since_refit = 0;
        }
    }

    fn refit(&mut self) {
        let n = self.buffer_ys.len();
        let data = FlatData {
            xs: &self.buffer_xs,
            ys: &self.buffer_ys,
            dim: self.dim,
        };
        // Argsort the buffer once per non-constant feature; each tree's
        // bootstrap sample is then emitted in sorted order from its
        // multiplicity counts, so trees cost O(n) each instead of a sort.
        let mut buffer_order: Vec<(usize, Vec<u32>)> = Vec::new();
        for f in 0..self.dim {
            let first = data.x(0, f);
            if (1..n as u32).all(|i| data.x(i, f) == first) {
                continue;
            }
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_unstable_by(|&a, &b| data.x(a, f).total_cmp(&data.x(b, f)));
            buffer_order.push((f, order));
        }
        let mut trees = Vec::with_capacity(self.params.n_trees);
        for b in 0..self.params.n_trees {
            let stream = math::mix_seed(&[self.seed, self.refits, b as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let mut multiplicity = vec![0u32; n];
            for _ in 0..n {
                multiplicity[rng.random_range(0..n)] += 1;
            }
            let lists: Vec<(usize, Vec<u32>)> = buffer_order
                .iter()
                .map(|(f, order)| {
                    let mut list = Vec::with_capacity(n);
                    for &i in order {
                        for _ in 0..multiplicity[i as usize] {
                            list.push(i);
                        }
                    }
                    (*f, list)
                })
                .collect();
            let fallback = {
                let mut acc = 0.0;
                for (i, &m) in multiplicity.iter().enumerate() {
                    acc += m as f64 * self.buffer_ys[i];
                }
                acc / n as f64
            };
            trees.push(RegressionTree::fit_presorted(
                data,
                lists,
                fallback,
                &self.params,
            ));
        }
        self.trees = trees;
        self.refits += 1;
    }

    /// Fits one ensemble on a full dataset in a single pass (the offline
    /// benchmark path; the online path goes through [`TreeEnsemble::update`]).
    pub fn fit_bulk(params: TreeParams, seed: u64, xs: &[Vec<f64>], ys: &[f64]) -> Self {
        let mut ens = Self::new(params, seed);
        ens.dim = xs[0].len();
        for x in xs {
            ens.buffer_xs.extend_from_slice(x);
        }
        ens.buffer_ys = ys.to_vec();
        ens.refit();
        ens
    }
}
