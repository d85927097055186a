//! Probabilistic random forest: bootstrapped regression trees whose spread
//! across trees serves as the predictive variance.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Prediction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Fraction of encoded features tried at each split.
    pub feature_fraction: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 24,
            max_depth: 20,
            min_samples_split: 2,
            feature_fraction: 5.0 / 6.0,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Tree>,
    dim: usize,
}

impl RandomForest {
    /// Fits on rows `x` (all of equal width) and targets `y`.
    ///
    /// Panics if `x` is empty or `x.len() != y.len()`.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &ForestParams, seed: u64) -> Self {
        assert!(!x.is_empty() && x.len() == y.len(), "invalid training data");
        let dim = x[0].len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = x.len();
        let n_features =
            ((dim as f64 * params.feature_fraction).ceil() as usize).clamp(1, dim.max(1));
        let trees = (0..params.n_trees.max(1))
            .map(|_| {
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut builder = TreeBuilder {
                    x,
                    y,
                    params,
                    n_features,
                    dim,
                    nodes: Vec::new(),
                };
                builder.build(sample, 0, &mut rng);
                Tree {
                    nodes: builder.nodes,
                }
            })
            .collect();
        Self { trees, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let n = self.trees.len() as f64;
        let (sum, sum_sq) = self.trees.iter().fold((0.0, 0.0), |(s, q), t| {
            let v = t.predict(x);
            (s + v, q + v * v)
        });
        let mean = sum / n;
        let variance = (sum_sq / n - mean * mean).max(0.0);
        Prediction { mean, variance }
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a ForestParams,
    n_features: usize,
    dim: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build<R: Rng>(&mut self, rows: Vec<usize>, depth: usize, rng: &mut R) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf(mean));

        if depth >= self.params.max_depth || rows.len() < self.params.min_samples_split {
            return id;
        }
        let first = self.y[rows[0]];
        if rows.iter().all(|&i| self.y[i] == first) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x[i][feature] <= threshold);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Exact CART split minimizing the summed squared error over a random
    /// subset of features.
    fn best_split<R: Rng>(&self, rows: &[usize], rng: &mut R) -> Option<(usize, f64)> {
        let all: Vec<usize> = (0..self.dim).collect();
        let features: Vec<usize> = all.choose_multiple(rng, self.n_features).copied().collect();
        let total: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let n = rows.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
        for f in features {
            order.clear();
            order.extend(rows.iter().map(|&i| (self.x[i][f], self.y[i])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if order[0].0 == order[order.len() - 1].0 {
                continue;
            }
            let mut left_sum = 0.0;
            for k in 0..order.len() - 1 {
                left_sum += order[k].1;
                if order[k].0 == order[k + 1].0 {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let right_sum = total - left_sum;
                // Maximizing this is equivalent to minimizing within-node SSE.
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, 0.5 * (order[k].0 + order[k + 1].0)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}
