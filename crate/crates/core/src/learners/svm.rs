//! Soft-margin SVM trained by SMO, one-vs-one multiclass voting, and the
//! similarity feature maps (thresholded similarity, exponential similarity)
//! that can precede the kernel.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::metric::DistanceMetric;
use crate::{par, Error, Result};

/// `exp(-gamma * ||a - b||²)`.
pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * sq).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Upper bound on cached kernel memory for one binary problem.
    pub cache_bytes: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig { tolerance: 1e-3, max_iterations: 1_000_000, cache_bytes: 256 << 20 }
    }
}

/// Binary decision function `Σ coef_i K(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    /// Indices into the training rows.
    pub support: Vec<usize>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone)]
pub struct BinaryFit {
    pub machine: BinarySvm,
    pub alpha: Vec<f64>,
    /// Decision values of the training rows, read off the final gradient.
    pub decision: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Kernel rows computed on demand, oldest evicted first.
struct KernelRows<'a> {
    rows: &'a [&'a [f64]],
    gamma: f64,
    cache: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
    diagonal: Vec<f64>,
}

impl<'a> KernelRows<'a> {
    fn new(rows: &'a [&'a [f64]], gamma: f64, cache_bytes: usize) -> Self {
        let n = rows.len();
        let capacity = (cache_bytes / (8 * n.max(1))).max(2);
        KernelRows {
            rows,
            gamma,
            cache: vec![None; n],
            order: VecDeque::new(),
            capacity,
            diagonal: rows.iter().map(|r| rbf(gamma, r, r)).collect(),
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.cache[i].is_none() {
            if self.order.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.cache[old] = None;
                }
            }
            let xi = self.rows[i];
            let values = self.rows.iter().map(|r| rbf(self.gamma, xi, r)).collect();
            self.cache[i] = Some(values);
            self.order.push_back(i);
        }
        self.cache[i].as_deref().expect("row just filled")
    }
}

/// Solves `min ½αᵀQα − eᵀα` s.t. `0 ≤ α ≤ C`, `yᵀα = 0` with the
/// maximal-violating-pair working set.
pub fn train_binary(rows: &[&[f64]], y: &[f64], c: f64, gamma: f64, config: &SmoConfig) -> Result<BinaryFit> {
    let n = rows.len();
    let positives = y.iter().filter(|&&v| v > 0.0).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClass(format!("{n} samples labelled {}", y.first().copied().unwrap_or(0.0))));
    }
    const TAU: f64 = 1e-12;
    let mut kernel = KernelRows::new(rows, gamma, config.cache_bytes);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] < c) || (y[t] < 0.0 && a[t] > 0.0);
    let in_low = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut g_max2 = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(t, &alpha) && -y[t] * grad[t] > g_max {
                g_max = -y[t] * grad[t];
                i = t;
            }
            if in_low(t, &alpha) && y[t] * grad[t] > g_max2 {
                g_max2 = y[t] * grad[t];
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max + g_max2 < config.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let k_ii = kernel.diagonal[i];
        let k_jj = kernel.diagonal[j];
        let k_ij = kernel.row(i)[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = (k_ii + k_jj - 2.0 * k_ij).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_i = alpha[i] - old_i;
        let d_j = alpha[j] - old_j;
        // G_t += Q_ti Δα_i + Q_tj Δα_j, Q_ts = y_t y_s K_ts
        let row_i = kernel.row(i).to_vec();
        let row_j = kernel.row(j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * row_i[t] * d_i + y[j] * row_j[t] * d_j);
        }
    }

    // bias from free vectors, else the midpoint of the feasible interval
    let (mut upper, mut lower) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free_sum += yg;
            free += 1;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (upper + lower) / 2.0 };
    let bias = -rho;

    let decision = (0..n).map(|t| y[t] * (grad[t] + 1.0) + bias).collect();
    let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let coef = support.iter().map(|&t| alpha[t] * y[t]).collect();
    Ok(BinaryFit { machine: BinarySvm { support, coef, bias }, alpha, decision, iterations, converged })
}

impl BinarySvm {
    pub fn decision(&self, rows: &[&[f64]], gamma: f64, x: &[f64]) -> f64 {
        self.support.iter().zip(&self.coef).map(|(&s, &w)| w * rbf(gamma, rows[s], x)).sum::<f64>() + self.bias
    }
}

/// `1 − min(d, threshold) / threshold` against every anchor.
pub fn sim_features(x: &[f64], anchors: &[Vec<f64>], threshold: f64, metric: DistanceMetric) -> Vec<f64> {
    anchors.iter().map(|a| 1.0 - metric.distance(x, a).min(threshold) / threshold).collect()
}

/// `exp(−gamma · d)` against every anchor; `d` is the raw metric, not squared.
pub fn map_features(x: &[f64], anchors: &[Vec<f64>], gamma: f64, metric: DistanceMetric) -> Vec<f64> {
    anchors.iter().map(|a| (-gamma * metric.distance(x, a)).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureMap {
    None,
    Sim { threshold: f64, metric: DistanceMetric },
    Map { gamma: f64, metric: DistanceMetric },
}

impl FeatureMap {
    pub fn apply(&self, x: &[f64], anchors: &[Vec<f64>]) -> Vec<f64> {
        match *self {
            FeatureMap::None => x.to_vec(),
            FeatureMap::Sim { threshold, metric } => sim_features(x, anchors, threshold, metric),
            FeatureMap::Map { gamma, metric } => map_features(x, anchors, gamma, metric),
        }
    }
}

/// Rows used to estimate distance quantiles for the similarity threshold.
const QUANTILE_SAMPLE: usize = 1000;

/// The `q`-quantile of pairwise distances among (an evenly strided subset of)
/// `rows`. Never returns a non-positive value.
pub fn distance_quantile(rows: &[Vec<f64>], q: f64, metric: DistanceMetric) -> f64 {
    let stride = rows.len().div_ceil(QUANTILE_SAMPLE).max(1);
    let sample: Vec<&Vec<f64>> = rows.iter().step_by(stride).collect();
    let mut distances = Vec::with_capacity(sample.len() * sample.len().saturating_sub(1) / 2);
    for (i, a) in sample.iter().enumerate() {
        for b in &sample[i + 1..] {
            distances.push(metric.distance(a, b));
        }
    }
    if distances.is_empty() {
        return 1.0;
    }
    distances.sort_unstable_by(f64::total_cmp);
    let pos = ((distances.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
    let t = distances[pos];
    if t > 0.0 {
        t
    } else {
        distances.iter().copied().find(|&d| d > 0.0).unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMachine {
    /// Class voted for on a positive decision value.
    pub positive: usize,
    pub negative: usize,
    /// Indices into [`SvmOvoModel::vectors`].
    pub support: Vec<usize>,
    pub coef: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmOvoModel {
    pub n_classes: usize,
    pub c: f64,
    pub gamma: f64,
    pub feature_map: FeatureMap,
    /// Training rows the feature map measures against (empty without a map).
    pub anchors: Vec<Vec<f64>>,
    /// Support vectors in the (mapped) kernel input space.
    pub vectors: Vec<Vec<f64>>,
    pub machines: Vec<PairMachine>,
    /// Lowest class seen in training; the answer when only one was present.
    pub fallback: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OvoPrediction {
    pub class: usize,
    pub votes: Vec<u32>,
    pub decision: Vec<f64>,
}

/// Winner by votes, then by summed |decision| of the machines each class
/// won, then lowest class index.
pub fn ovo_vote(n_classes: usize, outcomes: &[(usize, usize, f64)]) -> OvoPrediction {
    let mut votes = vec![0u32; n_classes];
    let mut strength = vec![0.0; n_classes];
    for &(positive, negative, d) in outcomes {
        let winner = if d > 0.0 { positive } else { negative };
        votes[winner] += 1;
        strength[winner] += d.abs();
    }
    let mut best = 0;
    for c in 1..n_classes {
        if votes[c] > votes[best] || (votes[c] == votes[best] && strength[c] > strength[best]) {
            best = c;
        }
    }
    OvoPrediction { class: best, votes, decision: outcomes.iter().map(|o| o.2).collect() }
}

impl SvmOvoModel {
    /// Fits one machine per pair of classes present in `labels`.
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        c: f64,
        gamma: f64,
        feature_map: FeatureMap,
        config: &SmoConfig,
    ) -> Result<Self> {
        let anchors = match feature_map {
            FeatureMap::None => Vec::new(),
            _ => rows.to_vec(),
        };
        let mapped: Vec<Vec<f64>> = match feature_map {
            FeatureMap::None => rows.to_vec(),
            _ => par::map_collect(rows, |r| feature_map.apply(r, &anchors)),
        };
        let mut present: Vec<usize> = labels.to_vec();
        present.sort_unstable();
        present.dedup();
        if present.is_empty() {
            return Err(Error::InvalidExperiment("no training rows".into()));
        }
        let pairs: Vec<(usize, usize)> =
            present.iter().enumerate().flat_map(|(i, &a)| present[i + 1..].iter().map(move |&b| (a, b))).collect();

        let fits = par::map_collect(&pairs, |&(a, b)| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&t| labels[t] == a || labels[t] == b).collect();
            let sub: Vec<&[f64]> = idx.iter().map(|&t| mapped[t].as_slice()).collect();
            let y: Vec<f64> = idx.iter().map(|&t| if labels[t] == a { 1.0 } else { -1.0 }).collect();
            train_binary(&sub, &y, c, gamma, config).map(|fit| (idx, fit.machine))
        });

        let mut slot_of: BTreeMap<usize, usize> = BTreeMap::new();
        let mut machines = Vec::with_capacity(pairs.len());
        let mut used = Vec::new();
        for (&(a, b), fit) in pairs.iter().zip(fits) {
            let (idx, m) = fit?;
            let support = m
                .support
                .iter()
                .map(|&s| {
                    let original = idx[s];
                    let next = slot_of.len();
                    *slot_of.entry(original).or_insert_with(|| {
                        used.push(original);
                        next
                    })
                })
                .collect();
            machines.push(PairMachine { positive: a, negative: b, support, coef: m.coef, bias: m.bias });
        }
        let vectors = used.into_iter().map(|t| mapped[t].clone()).collect();
        Ok(SvmOvoModel { n_classes, c, gamma, feature_map, anchors, vectors, machines, fallback: present[0] })
    }

    pub fn map_input(&self, x: &[f64]) -> Vec<f64> {
        self.feature_map.apply(x, &self.anchors)
    }

    pub fn predict_detailed(&self, x: &[f64]) -> OvoPrediction {
        if self.machines.is_empty() {
            // single training class
            let mut votes = vec![0; self.n_classes];
            let class = self.fallback;
            votes[class] = 1;
            return OvoPrediction { class, votes, decision: Vec::new() };
        }
        let z = self.map_input(x);
        let k: Vec<f64> = self.vectors.iter().map(|v| rbf(self.gamma, v, &z)).collect();
        let outcomes: Vec<(usize, usize, f64)> = self
            .machines
            .iter()
            .map(|m| {
                let d = m.support.iter().zip(&m.coef).map(|(&s, &w)| w * k[s]).sum::<f64>() + m.bias;
                (m.positive, m.negative, d)
            })
            .collect();
        ovo_vote(self.n_classes, &outcomes)
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        self.predict_detailed(x).class
    }
}
