//! Bagged regression trees with variance-reduction splits.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::Dataset;
use crate::rng::stream_rng;

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

/// Random-forest regressor.
#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Tree>,
}

struct Builder<'a> {
    ds: &'a Dataset,
    min_leaf: usize,
    n_candidates: usize,
    nodes: Vec<Node>,
}

impl Forest {
    pub(crate) fn fit(
        ds: &Dataset,
        rows: &[usize],
        trees: usize,
        min_leaf: usize,
        feature_fraction: f64,
        seed: u64,
    ) -> Self {
        let n_candidates = ((feature_fraction * ds.p() as f64).round() as usize).clamp(1, ds.p());
        let trees = (0..trees)
            .map(|t| {
                let mut rng = stream_rng(seed, t as u64);
                let mut sample: Vec<usize> = (0..rows.len())
                    .map(|_| rows[rng.random_range(0..rows.len())])
                    .collect();
                let mut b = Builder {
                    ds,
                    min_leaf,
                    n_candidates,
                    nodes: Vec::new(),
                };
                b.grow(&mut sample, &mut rng);
                Tree { nodes: b.nodes }
            })
            .collect();
        Forest { trees }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

impl Builder<'_> {
    /// Grows the subtree for `rows` and returns its node index.
    fn grow(&mut self, rows: &mut [usize], rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&r| self.ds.target(r)).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf(mean));
        if rows.len() < 2 * self.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, rng) else {
            return id;
        };
        let mut split = 0;
        for i in 0..rows.len() {
            if self.ds.row(rows[i])[feature] <= threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (l, r) = rows.split_at_mut(split);
        let left = self.grow(l, rng);
        let right = self.grow(r, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let n = rows.len();
        let total: f64 = rows.iter().map(|&r| self.ds.target(r)).sum();
        let total_sq: f64 = rows.iter().map(|&r| self.ds.target(r).powi(2)).sum();
        let parent_sse = total_sq - total * total / n as f64;
        if parent_sse <= 1e-12 * total_sq.max(1.0) {
            return None;
        }
        let mut features = index::sample(rng, self.ds.p(), self.n_candidates).into_vec();
        features.sort_unstable();

        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for f in features {
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (self.ds.row(r)[f], self.ds.target(r))));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for k in 1..n {
                let y = pairs[k - 1].1;
                left_sum += y;
                left_sq += y * y;
                if k < self.min_leaf || n - k < self.min_leaf || pairs[k - 1].0 == pairs[k].0 {
                    continue;
                }
                let right_sum = total - left_sum;
                let right_sq = total_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / k as f64)
                    + (right_sq - right_sum * right_sum / (n - k) as f64);
                if best.is_none_or(|(b, _, _)| sse < b) {
                    best = Some((sse, f, 0.5 * (pairs[k - 1].0 + pairs[k].0)));
                }
            }
        }
        best.filter(|(sse, _, _)| *sse < parent_sse)
            .map(|(_, f, t)| (f, t))
    }
}
