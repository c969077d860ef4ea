//! Classifiers and their hyperparameter grids.
//!
//! Every learner works on class indices `0..n_classes`; callers map those to
//! label strings sorted lexicographically, so "lowest index" tie-breaks are
//! lexicographic label order.

pub mod forest;
pub mod knn;
pub mod metric;
pub mod svm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use forest::ForestModel;
pub use knn::{KnnModel, Weighting};
pub use metric::DistanceMetric;
pub use svm::{FeatureMap, SmoConfig, SvmOvoModel};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Knn,
    SvmRbf,
    SvmSim,
    SvmMap,
    Rf,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] =
        [LearnerKind::Knn, LearnerKind::SvmRbf, LearnerKind::SvmSim, LearnerKind::SvmMap, LearnerKind::Rf];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Knn => "knn",
            LearnerKind::SvmRbf => "svm-rbf",
            LearnerKind::SvmSim => "svm-sim",
            LearnerKind::SvmMap => "svm-map",
            LearnerKind::Rf => "rf",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .or(match norm.as_str() {
                "svm" => Some(LearnerKind::SvmRbf),
                "random-forest" | "forest" => Some(LearnerKind::Rf),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidExperiment(format!("unknown learner `{s}`")))
    }
}

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "kebab-case")]
pub enum Hyper {
    Knn {
        k: usize,
        weighting: Weighting,
        metric: DistanceMetric,
    },
    SvmRbf {
        c: f64,
        gamma: f64,
    },
    /// `quantile` of pairwise training distances becomes the threshold.
    SvmSim {
        c: f64,
        gamma: f64,
        quantile: f64,
        metric: DistanceMetric,
    },
    SvmMap {
        c: f64,
        gamma: f64,
        gamma_map: f64,
        metric: DistanceMetric,
    },
    Rf {
        n_trees: usize,
    },
}

impl Hyper {
    pub fn kind(&self) -> LearnerKind {
        match self {
            Hyper::Knn { .. } => LearnerKind::Knn,
            Hyper::SvmRbf { .. } => LearnerKind::SvmRbf,
            Hyper::SvmSim { .. } => LearnerKind::SvmSim,
            Hyper::SvmMap { .. } => LearnerKind::SvmMap,
            Hyper::Rf { .. } => LearnerKind::Rf,
        }
    }
}

impl fmt::Display for Hyper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Hyper::Knn { k, weighting, metric } => {
                let w = match weighting {
                    Weighting::Uniform => "uniform",
                    Weighting::DistanceInverse => "distance",
                };
                write!(f, "knn k={k} weights={w} metric={metric}")
            }
            Hyper::SvmRbf { c, gamma } => write!(f, "svm-rbf C={c} gamma={gamma}"),
            Hyper::SvmSim { c, gamma, quantile, metric } => {
                write!(f, "svm-sim C={c} gamma={gamma} quantile={quantile} metric={metric}")
            }
            Hyper::SvmMap { c, gamma, gamma_map, metric } => {
                write!(f, "svm-map C={c} gamma={gamma} gamma_map={gamma_map} metric={metric}")
            }
            Hyper::Rf { n_trees } => write!(f, "rf trees={n_trees}"),
        }
    }
}

fn pow2(exponents: impl Iterator<Item = i32>) -> Vec<f64> {
    exponents.map(|e| 2f64.powi(e)).collect()
}

/// `2^-5, 2^-3, …, 2^15`.
pub fn c_values() -> Vec<f64> {
    pow2((-5..=15).step_by(2))
}

/// `2^-15, 2^-13, …, 2^3`.
pub fn gamma_values() -> Vec<f64> {
    pow2((-15..=3).step_by(2))
}

pub const SIM_QUANTILES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// All cells for `kind` in canonical order.
pub fn grid_for(kind: LearnerKind) -> Vec<Hyper> {
    let svm: Vec<(f64, f64)> =
        c_values().into_iter().flat_map(|c| gamma_values().into_iter().map(move |g| (c, g))).collect();
    match kind {
        LearnerKind::Knn => (4..=20)
            .step_by(2)
            .flat_map(|k| {
                [Weighting::Uniform, Weighting::DistanceInverse].into_iter().flat_map(move |weighting| {
                    DistanceMetric::ALL.into_iter().map(move |metric| Hyper::Knn { k, weighting, metric })
                })
            })
            .collect(),
        LearnerKind::SvmRbf => svm.into_iter().map(|(c, gamma)| Hyper::SvmRbf { c, gamma }).collect(),
        LearnerKind::SvmSim => DistanceMetric::ALL
            .into_iter()
            .flat_map(|metric| {
                SIM_QUANTILES.into_iter().flat_map({
                    let svm = svm.clone();
                    move |quantile| {
                        svm.clone().into_iter().map(move |(c, gamma)| Hyper::SvmSim { c, gamma, quantile, metric })
                    }
                })
            })
            .collect(),
        LearnerKind::SvmMap => DistanceMetric::ALL
            .into_iter()
            .flat_map(|metric| {
                gamma_values().into_iter().flat_map({
                    let svm = svm.clone();
                    move |gamma_map| {
                        svm.clone().into_iter().map(move |(c, gamma)| Hyper::SvmMap { c, gamma, gamma_map, metric })
                    }
                })
            })
            .collect(),
        LearnerKind::Rf => (20..=120).step_by(20).map(|n_trees| Hyper::Rf { n_trees }).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Model {
    Knn(KnnModel),
    Svm(SvmOvoModel),
    Forest(ForestModel),
}

impl Model {
    /// `seed` only matters for the forest.
    pub fn fit(hyper: &Hyper, rows: &[Vec<f64>], labels: &[usize], n_classes: usize, seed: u64) -> Result<Model> {
        if rows.is_empty() {
            return Err(Error::InvalidExperiment("no training rows".into()));
        }
        let smo = SmoConfig::default();
        let svm = |c, gamma, map| SvmOvoModel::fit(rows, labels, n_classes, c, gamma, map, &smo).map(Model::Svm);
        match *hyper {
            Hyper::Knn { k, weighting, metric } => {
                Ok(Model::Knn(KnnModel::fit(rows.to_vec(), labels.to_vec(), n_classes, k, weighting, metric)))
            }
            Hyper::SvmRbf { c, gamma } => svm(c, gamma, FeatureMap::None),
            Hyper::SvmSim { c, gamma, quantile, metric } => {
                let threshold = svm::distance_quantile(rows, quantile, metric);
                svm(c, gamma, FeatureMap::Sim { threshold, metric })
            }
            Hyper::SvmMap { c, gamma, gamma_map, metric } => {
                svm(c, gamma, FeatureMap::Map { gamma: gamma_map, metric })
            }
            Hyper::Rf { n_trees } => ForestModel::fit(rows, labels, n_classes, n_trees, seed).map(Model::Forest),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Model::Knn(m) => m.n_classes,
            Model::Svm(m) => m.n_classes,
            Model::Forest(m) => m.n_classes,
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        match self {
            Model::Knn(m) => m.predict(x),
            Model::Svm(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
        }
    }

    /// Predicted class plus per-class votes (weighted votes for KNN,
    /// pairwise wins for SVM, trees for the forest).
    pub fn predict_votes(&self, x: &[f64]) -> (usize, Vec<f64>) {
        match self {
            Model::Knn(m) => m.predict_votes(x),
            Model::Svm(m) => {
                let p = m.predict_detailed(x);
                (p.class, p.votes.into_iter().map(f64::from).collect())
            }
            Model::Forest(m) => {
                let votes = m.votes(x);
                (m.predict(x), votes.into_iter().map(f64::from).collect())
            }
        }
    }
}
