//! k-nearest-neighbour voting with a choice of metric and weighting.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::metric::DistanceMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Uniform,
    /// 1/d; neighbours at distance 0 outvote everything else.
    DistanceInverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub weighting: Weighting,
    pub metric: DistanceMetric,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl KnnModel {
    /// `k` is capped at the number of training points.
    pub fn fit(
        points: Vec<Vec<f64>>,
        labels: Vec<usize>,
        n_classes: usize,
        k: usize,
        weighting: Weighting,
        metric: DistanceMetric,
    ) -> Self {
        let k = k.clamp(1, points.len().max(1));
        KnnModel { k, weighting, metric, points, labels, n_classes }
    }

    /// The k nearest as `(distance, index)`, nearest first; equal distances
    /// order by training index.
    pub fn neighbours(&self, x: &[f64]) -> Vec<(f64, usize)> {
        let mut scored: Vec<(f64, usize)> =
            self.points.iter().enumerate().map(|(i, p)| (self.metric.distance(x, p), i)).collect();
        let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let k = self.k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_key);
            scored.truncate(k);
        }
        scored.sort_unstable_by(by_key);
        scored
    }

    /// Winning class and the per-class vote weight.
    pub fn predict_votes(&self, x: &[f64]) -> (usize, Vec<f64>) {
        let neighbours = self.neighbours(x);
        let exact = neighbours.iter().any(|(d, _)| *d == 0.0);
        let mut votes = vec![0.0; self.n_classes];
        let mut dist_sum = vec![0.0; self.n_classes];
        let mut members = vec![0usize; self.n_classes];
        for &(d, i) in &neighbours {
            let weight = match self.weighting {
                Weighting::Uniform => 1.0,
                Weighting::DistanceInverse if exact => {
                    if d == 0.0 {
                        1.0
                    } else {
                        continue;
                    }
                }
                Weighting::DistanceInverse => 1.0 / d,
            };
            let c = self.labels[i];
            votes[c] += weight;
            dist_sum[c] += d;
            members[c] += 1;
        }
        let mean_dist = |c: usize| dist_sum[c] / members[c] as f64;
        let mut best = usize::MAX;
        for c in (0..self.n_classes).filter(|&c| members[c] > 0) {
            if best == usize::MAX {
                best = c;
                continue;
            }
            let better = match votes[c].total_cmp(&votes[best]) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => mean_dist(c) < mean_dist(best),
            };
            if better {
                best = c;
            }
        }
        (best, votes)
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        self.predict_votes(x).0
    }
}
