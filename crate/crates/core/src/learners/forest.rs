//! Random forest of unpruned Gini trees over bootstrap samples.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{par, Error, Result};

pub const MAX_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { class: usize, counts: Vec<u32> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { class, .. } => return class,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Best Gini split of `samples` over `features` (tried in the given order);
/// ties keep the earliest feature and the lowest threshold. `None` when no
/// feature takes two distinct values.
pub fn best_split(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    samples: &[usize],
    features: &[usize],
) -> Option<BestSplit> {
    let mut parent = vec![0usize; n_classes];
    for &s in samples {
        parent[labels[s]] += 1;
    }
    let n = samples.len();
    let parent_gini = gini(&parent, n);
    let mut best: Option<BestSplit> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0usize; n_classes];
    let mut right = vec![0usize; n_classes];
    for &f in features {
        column.clear();
        column.extend(samples.iter().map(|&s| (rows[s][f], labels[s])));
        // order inside runs of equal values cannot change any boundary count
        column.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        left.fill(0);
        right.copy_from_slice(&parent);
        for k in 0..n - 1 {
            let (v, c) = column[k];
            left[c] += 1;
            right[c] -= 1;
            let next = column[k + 1].0;
            if v == next {
                continue;
            }
            let nl = k + 1;
            let nr = n - nl;
            let child = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
            let gain = parent_gini - child;
            if best.is_none_or(|b| gain > b.gain) {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some(BestSplit { feature: f, threshold, gain });
            }
        }
    }
    best
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    mtry: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &s in &samples {
            counts[self.labels[s]] += 1;
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority(&counts), counts: counts.iter().map(|&c| c as u32).collect() });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || samples.len() < 2 || depth >= MAX_DEPTH {
            return id;
        }
        let d = self.rows[0].len();
        let mut features = index::sample(rng, d, self.mtry.min(d)).into_vec();
        features.sort_unstable();
        let Some(split) = best_split(self.rows, self.labels, self.n_classes, &samples, &features) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            samples.iter().partition(|&&s| self.rows[s][split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }
}

/// Features examined per split: `⌈√d⌉`.
pub fn features_per_split(d: usize) -> usize {
    ((d as f64).sqrt().ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_classes: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Tree `t` draws from stream `t` of a ChaCha8 generator seeded with
    /// `seed`, so the result does not depend on thread count.
    pub fn fit(rows: &[Vec<f64>], labels: &[usize], n_classes: usize, n_trees: usize, seed: u64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidExperiment("no training rows".into()));
        }
        let n = rows.len();
        let mtry = features_per_split(rows[0].len());
        let trees = par::map_range(n_trees, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let samples: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut b = Builder { rows, labels, n_classes, mtry, nodes: Vec::new() };
            b.grow(samples, 0, &mut rng);
            Tree { nodes: b.nodes }
        });
        Ok(ForestModel { n_classes, trees })
    }

    pub fn votes(&self, x: &[f64]) -> Vec<u32> {
        let mut votes = vec![0u32; self.n_classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        votes
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        self.predict_prefix(x, self.trees.len())
    }

    /// Prediction of the forest made of the first `n_trees` trees, which is
    /// exactly the forest `fit` returns for `n_trees` with the same seed.
    pub fn predict_prefix(&self, x: &[f64], n_trees: usize) -> usize {
        let mut votes = vec![0u32; self.n_classes];
        for t in &self.trees[..n_trees.min(self.trees.len())] {
            votes[t.predict(x)] += 1;
        }
        let mut best = 0;
        for c in 1..votes.len() {
            if votes[c] > votes[best] {
                best = c;
            }
        }
        best
    }
}
