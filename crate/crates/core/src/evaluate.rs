//! Repeated stratified 70/30 evaluation with grid-search cross-validation,
//! learning curves, timing, and the robustness experiments.
//!
//! Repetition `r` of an experiment seeded with `s` splits with seed `s + r`,
//! subsamples the training side with `s + 2000 + r`, and uses `s + 1000 + r`
//! for cross-validation folds and learner randomness. Scaling, folds and
//! hyperparameter choice only ever see the training side.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::net::{IpAddr, Ipv4Addr};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    majority_baseline, perturb_cipher, split_indices, subsample_train, CipherPerturbation, LabelTuple, LabeledSample,
    LabeledSession, ScalingParams, Target,
};
use crate::features::{project, session_features, FeatureSetId, PeakConfig};
use crate::learners::{grid_for, ForestModel, Hyper, LearnerKind, Model};
use crate::model::{encode_label_tuples, encode_labels, ModelFile};
use crate::session::{aggregate_vpn, truncate_session, Endpoint};
use crate::{par, Error, Result};

pub const REPORT_VERSION: u32 = 1;

/// Remote end of the simulated tunnel in VPN runs.
pub const VPN_TUNNEL: Endpoint = (IpAddr::V4(Ipv4Addr::new(198, 18, 0, 1)), 443);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub learner: LearnerKind,
    pub feature_set: FeatureSetId,
    pub target: Target,
    pub repetitions: usize,
    pub folds: usize,
    pub seed: u64,
    /// Subsample the training side to this many samples.
    pub train_size: Option<usize>,
    /// Applied to test samples only.
    pub perturbation: Option<CipherPerturbation>,
    /// Test sessions are cut to this many seconds (session input only).
    pub time_horizon: Option<f64>,
    /// Test sessions of one host and class are merged this many at a time
    /// into tunnel sessions (session input only).
    pub vpn_chunk: Option<usize>,
    /// Replaces the learner's full grid.
    pub grid: Option<Vec<Hyper>>,
    /// Wall-clock timings make reports non-reproducible, so they are opt-in.
    pub record_timings: bool,
}

impl ExperimentSpec {
    pub fn new(learner: LearnerKind, feature_set: FeatureSetId, target: Target) -> Self {
        ExperimentSpec {
            learner,
            feature_set,
            target,
            repetitions: 5,
            folds: 5,
            seed: 0,
            train_size: None,
            perturbation: None,
            time_horizon: None,
            vpn_chunk: None,
            grid: None,
            record_timings: false,
        }
    }

    pub fn grid(&self) -> Vec<Hyper> {
        self.grid.clone().unwrap_or_else(|| grid_for(self.learner))
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidExperiment(m.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if let Some(grid) = &self.grid {
            if grid.is_empty() {
                return bad("empty hyperparameter grid");
            }
            if grid.iter().any(|h| h.kind() != self.learner) {
                return bad("grid cells must belong to the chosen learner");
            }
        }
        if self.time_horizon.is_some_and(|h| !(h > 0.0)) {
            return bad("time horizon must be positive");
        }
        if self.vpn_chunk == Some(0) {
            return bad("vpn chunk must be at least 1");
        }
        Ok(())
    }

    pub fn split_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }

    pub fn learner_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(1000 + r as u64)
    }

    pub fn subsample_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(2000 + r as u64)
    }
}

/// Fold number of every sample: classes are shuffled separately and dealt
/// round-robin, continuing the rotation from one class to the next.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        strata.entry(l).or_default().push(i);
    }
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    fold_of
}

struct Fold {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    n_classes: usize,
    val_rows: Vec<Vec<f64>>,
    /// `None` for classes the fold's training part never saw.
    val_labels: Vec<Option<usize>>,
}

fn build_fold(train: &[LabeledSample], fold_of: &[usize], f: usize, target: Target) -> Result<Fold> {
    let mut fit = Vec::new();
    let mut val = Vec::new();
    for (s, &k) in train.iter().zip(fold_of) {
        if k == f {
            val.push(s);
        } else {
            fit.push(s);
        }
    }
    let fit_labels: Vec<LabelTuple> = fit.iter().map(|s| s.label).collect();
    let (names, labels) = encode_label_tuples(&fit_labels, target);
    if names.len() < 2 {
        return Err(Error::SingleClass(format!(
            "cross-validation fold {f} trains on the single class {}",
            names.first().map_or("", String::as_str)
        )));
    }
    let raw: Vec<&[f64]> = fit.iter().map(|s| s.features.values.as_slice()).collect();
    let scaling = ScalingParams::fit_rows(fit[0].features.schema, &raw);
    Ok(Fold {
        rows: raw.iter().map(|r| scaling.transform(r)).collect(),
        labels,
        n_classes: names.len(),
        val_rows: val.iter().map(|s| scaling.transform(&s.features.values)).collect(),
        val_labels: val.iter().map(|s| names.binary_search(&target.project(&s.label)).ok()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best: Hyper,
    pub best_score: f64,
    /// Mean validation accuracy of every cell, in grid order.
    pub scores: Vec<f64>,
}

/// Picks the cell with the highest mean validation accuracy over `folds`
/// stratified folds; ties go to the earlier cell.
pub fn grid_search_cv(
    train: &[LabeledSample],
    target: Target,
    grid: &[Hyper],
    folds: usize,
    seed: u64,
) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(Error::InvalidExperiment("empty hyperparameter grid".into()));
    }
    let (names, labels) = encode_labels(train, target);
    if names.len() < 2 {
        return Err(Error::SingleClass(names.into_iter().next().unwrap_or_default()));
    }
    if train.len() < folds {
        return Err(Error::InvalidExperiment(format!(
            "{folds}-fold cross-validation needs at least {folds} samples, got {}",
            train.len()
        )));
    }
    let fold_of = stratified_folds(&labels, folds, seed);
    let prepared: Vec<Fold> = (0..folds).map(|f| build_fold(train, &fold_of, f, target)).collect::<Result<_>>()?;

    let forest_sizes: Option<Vec<usize>> = grid
        .iter()
        .map(|h| match *h {
            Hyper::Rf { n_trees } => Some(n_trees),
            _ => None,
        })
        .collect();
    let accuracies = match forest_sizes {
        Some(sizes) => forest_accuracies(&prepared, &sizes, seed)?,
        None => cell_accuracies(&prepared, grid, seed)?,
    };
    let scores: Vec<f64> = accuracies.chunks(folds).map(|c| c.iter().sum::<f64>() / folds as f64).collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(GridSearch { best: grid[best], best_score: scores[best], scores })
}

fn validation_accuracy(fold: &Fold, predict: impl Fn(&[f64]) -> usize) -> f64 {
    let correct = fold.val_rows.iter().zip(&fold.val_labels).filter(|(x, &y)| y == Some(predict(x))).count();
    correct as f64 / fold.val_rows.len().max(1) as f64
}

/// Accuracy per (cell, fold), cell-major.
fn cell_accuracies(prepared: &[Fold], grid: &[Hyper], seed: u64) -> Result<Vec<f64>> {
    let folds = prepared.len();
    par::map_range(grid.len() * folds, |job| {
        let (cell, f) = (job / folds, job % folds);
        let fold = &prepared[f];
        let model = Model::fit(&grid[cell], &fold.rows, &fold.labels, fold.n_classes, seed)?;
        Ok(validation_accuracy(fold, |x| model.predict(x)))
    })
    .into_iter()
    .collect()
}

/// As [`cell_accuracies`] for forest-only grids: the largest forest is grown
/// once per fold and smaller cells are scored on its leading trees, which
/// are the very forests a separate fit would grow.
fn forest_accuracies(prepared: &[Fold], sizes: &[usize], seed: u64) -> Result<Vec<f64>> {
    let folds = prepared.len();
    let largest = sizes.iter().copied().max().unwrap_or(0);
    let per_fold: Vec<Vec<f64>> = par::map_range(folds, |f| {
        let fold = &prepared[f];
        let forest = ForestModel::fit(&fold.rows, &fold.labels, fold.n_classes, largest, seed)?;
        Ok(sizes.iter().map(|&n| validation_accuracy(fold, |x| forest.predict_prefix(x, n))).collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok((0..sizes.len() * folds).map(|job| per_fold[job % folds][job / folds]).collect())
}

/// The model chosen and fitted for one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRepetition {
    pub search: GridSearch,
    pub model: ModelFile,
}

/// Grid search plus refit on the whole (already prepared) training side.
pub fn train_repetition(train: &[LabeledSample], spec: &ExperimentSpec, r: usize) -> Result<TrainedRepetition> {
    let seed = spec.learner_seed(r);
    let search = grid_search_cv(train, spec.target, &spec.grid(), spec.folds, seed)?;
    let model = ModelFile::train(train, &search.best, spec.target, seed)?;
    Ok(TrainedRepetition { search, model })
}

/// Training-side preparation: optional subsample, projection.
pub fn prepare_train(train: Vec<LabeledSample>, spec: &ExperimentSpec, r: usize) -> Result<Vec<LabeledSample>> {
    let train = match spec.train_size {
        Some(n) => subsample_train(&train, n, spec.subsample_seed(r))?,
        None => train,
    };
    project_all(train, spec.feature_set)
}

/// Test-side preparation: optional cipher perturbation, then projection.
pub fn prepare_test(test: Vec<LabeledSample>, spec: &ExperimentSpec) -> Result<Vec<LabeledSample>> {
    let test = match spec.perturbation {
        Some(p) if !p.is_identity() => test
            .into_iter()
            .map(|mut s| {
                s.features = perturb_cipher(&s.features, &p)?;
                Ok(s)
            })
            .collect::<Result<_>>()?,
        _ => test,
    };
    project_all(test, spec.feature_set)
}

fn project_all(samples: Vec<LabeledSample>, set: FeatureSetId) -> Result<Vec<LabeledSample>> {
    samples
        .into_iter()
        .map(|mut s| {
            if s.features.schema != set {
                s.features = project(&s.features, set)?;
            }
            Ok(s)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Grid search plus refit.
    pub train_secs: f64,
    /// Batch prediction of the test side.
    pub test_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub split_seed: u64,
    pub chosen: Hyper,
    pub cv_accuracy: f64,
    pub accuracy: f64,
    pub train_samples: usize,
    pub test_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub class: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecall {
    pub class: String,
    pub support: u64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub report_version: u32,
    pub spec: ExperimentSpec,
    pub mean_accuracy: f64,
    pub accuracies: Vec<f64>,
    pub repetitions: Vec<RepetitionResult>,
    /// Every class seen on either side of any split, sorted.
    pub classes: Vec<String>,
    /// Counts pooled over repetitions; rows are ground truth.
    pub confusion_counts: Vec<Vec<u64>>,
    /// `confusion_counts` with each non-empty row summing to 1.
    pub confusion: Vec<Vec<f64>>,
    pub per_class: Vec<ClassRecall>,
    /// Always predicting the modal class of the whole input.
    pub majority_baseline: Option<Baseline>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Model(e.to_string()))
    }

    /// `trace / total` of the pooled confusion matrix.
    pub fn pooled_accuracy(&self) -> f64 {
        let total: u64 = self.confusion_counts.iter().flatten().sum();
        let trace: u64 = (0..self.classes.len()).map(|i| self.confusion_counts[i][i]).sum();
        trace as f64 / total.max(1) as f64
    }

    pub fn to_text(&self) -> String {
        let s = &self.spec;
        let mut out = String::new();
        let _ = writeln!(out, "learner       {}", s.learner);
        let _ = writeln!(out, "feature set   {} ({} features)", s.feature_set, s.feature_set.len());
        let _ = writeln!(out, "target        {}", s.target);
        let _ = writeln!(out, "seed          {}", s.seed);
        if let Some(n) = s.train_size {
            let _ = writeln!(out, "train size    {n}");
        }
        if let Some(h) = s.time_horizon {
            let _ = writeln!(out, "horizon       {h} s");
        }
        if let Some(c) = s.vpn_chunk {
            let _ = writeln!(out, "vpn chunk     {c}");
        }
        if let Some(p) = s.perturbation {
            let _ = writeln!(
                out,
                "perturbation  suites {:+} extensions {:+} version {}",
                p.delta_suites,
                p.delta_extensions,
                p.new_version.map_or("unchanged".to_string(), |v| format!("{v:#06x}"))
            );
        }
        let _ = writeln!(out, "mean accuracy {:.4}", self.mean_accuracy);
        if let Some(b) = &self.majority_baseline {
            let _ = writeln!(out, "baseline      {:.4} ({})", b.accuracy, b.class);
        }
        let _ = writeln!(out);
        let _ =
            writeln!(out, "{:>3}  {:>8}  {:>8}  {:>6}  {:>6}  chosen", "rep", "cv acc", "test acc", "train", "test");
        for r in &self.repetitions {
            let _ = writeln!(
                out,
                "{:>3}  {:>8.4}  {:>8.4}  {:>6}  {:>6}  {}",
                r.repetition, r.cv_accuracy, r.accuracy, r.train_samples, r.test_samples, r.chosen
            );
        }
        let width = self.classes.iter().map(String::len).max().unwrap_or(5).max(5);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<width$}  {:>7}  {:>6}", "class", "support", "recall");
        for c in &self.per_class {
            let _ = writeln!(out, "{:<width$}  {:>7}  {:>6.4}", c.class, c.support, c.recall);
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "confusion (%, rows = truth)");
        let _ = write!(out, "{:w$}", "", w = width + 4);
        for j in 0..self.classes.len() {
            let _ = write!(out, " {j:>5}");
        }
        let _ = writeln!(out);
        for (i, row) in self.confusion.iter().enumerate() {
            let _ = write!(out, "{i:>2}  {:<width$}", self.classes[i]);
            for share in row {
                let _ = write!(out, " {:>5.1}", share * 100.0);
            }
            let _ = writeln!(out);
        }
        out
    }

    /// Plot-ready series as `(file name, csv)`.
    pub fn plot_csvs(&self) -> Vec<(&'static str, String)> {
        let mut confusion = String::from("truth,predicted,share,count\n");
        for (i, row) in self.confusion.iter().enumerate() {
            for (j, share) in row.iter().enumerate() {
                let _ = writeln!(
                    confusion,
                    "\"{}\",\"{}\",{share},{}",
                    self.classes[i], self.classes[j], self.confusion_counts[i][j]
                );
            }
        }
        let mut accuracy = String::from("repetition,accuracy\n");
        for r in &self.repetitions {
            let _ = writeln!(accuracy, "{},{}", r.repetition, r.accuracy);
        }
        vec![("confusion.csv", confusion), ("accuracy.csv", accuracy)]
    }
}

/// One repetition on a given split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub result: RepetitionResult,
    pub model: ModelFile,
    /// Projected test labels, in test order.
    pub truth: Vec<String>,
    pub predicted: Vec<String>,
}

/// Prepares both sides, trains on `train` and scores `test`.
pub fn run_split(
    spec: &ExperimentSpec,
    r: usize,
    train: Vec<LabeledSample>,
    test: Vec<LabeledSample>,
) -> Result<SplitOutcome> {
    let train = prepare_train(train, spec, r)?;
    let test = prepare_test(test, spec)?;
    let started = Instant::now();
    let trained = train_repetition(&train, spec, r)?;
    let train_secs = started.elapsed().as_secs_f64();
    let started = Instant::now();
    let predicted: Vec<String> =
        par::map_collect(&test, |s| trained.model.predict(&s.features)).into_iter().collect::<Result<_>>()?;
    let test_secs = started.elapsed().as_secs_f64();
    let truth: Vec<String> = test.iter().map(|s| spec.target.project(&s.label)).collect();
    let correct = truth.iter().zip(&predicted).filter(|(t, p)| t == p).count();
    Ok(SplitOutcome {
        result: RepetitionResult {
            repetition: r,
            split_seed: spec.split_seed(r),
            chosen: trained.search.best,
            cv_accuracy: trained.search.best_score,
            accuracy: correct as f64 / test.len().max(1) as f64,
            train_samples: train.len(),
            test_samples: test.len(),
            timing: spec.record_timings.then_some(Timing { train_secs, test_secs }),
        },
        model: trained.model,
        truth,
        predicted,
    })
}

fn assemble(spec: &ExperimentSpec, outcomes: Vec<SplitOutcome>, baseline: Option<Baseline>) -> EvaluationReport {
    let classes: Vec<String> = outcomes
        .iter()
        .flat_map(|o| o.truth.iter().chain(&o.predicted).cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let k = classes.len();
    let idx = |c: &String| classes.binary_search(c).expect("class collected above");
    let mut counts = vec![vec![0u64; k]; k];
    for o in &outcomes {
        for (t, p) in o.truth.iter().zip(&o.predicted) {
            counts[idx(t)][idx(p)] += 1;
        }
    }
    let confusion = counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            row.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect()
        })
        .collect();
    let per_class = classes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let support: u64 = counts[i].iter().sum();
            ClassRecall {
                class: c.clone(),
                support,
                recall: if support == 0 { 0.0 } else { counts[i][i] as f64 / support as f64 },
            }
        })
        .collect();
    let repetitions: Vec<RepetitionResult> = outcomes.into_iter().map(|o| o.result).collect();
    let accuracies: Vec<f64> = repetitions.iter().map(|r| r.accuracy).collect();
    EvaluationReport {
        report_version: REPORT_VERSION,
        spec: spec.clone(),
        mean_accuracy: accuracies.iter().sum::<f64>() / accuracies.len() as f64,
        accuracies,
        repetitions,
        classes,
        confusion_counts: counts,
        confusion,
        per_class,
        majority_baseline: baseline,
    }
}

fn baseline_of(labels: &[LabelTuple], target: Target) -> Option<Baseline> {
    let samples: Vec<LabeledSample> = labels
        .iter()
        .map(|&label| LabeledSample {
            session_id: String::new(),
            label,
            features: crate::features::FeatureVector { schema: FeatureSetId::Peaks, values: Vec::new() },
        })
        .collect();
    majority_baseline(&samples, target).map(|(class, accuracy)| Baseline { class, accuracy })
}

fn check_split_size(n: usize) -> Result<()> {
    if n < 10 {
        return Err(Error::InvalidExperiment(format!("a 70/30 split needs at least 10 samples, got {n}")));
    }
    Ok(())
}

/// Repeated 70/30 evaluation over feature vectors.
pub fn run_experiment(data: &[LabeledSample], spec: &ExperimentSpec) -> Result<EvaluationReport> {
    spec.validate()?;
    if spec.time_horizon.is_some() || spec.vpn_chunk.is_some() {
        return Err(Error::InvalidExperiment("time horizons and VPN aggregation need session input".into()));
    }
    check_split_size(data.len())?;
    let keys: Vec<LabelTuple> = data.iter().map(|s| s.label).collect();
    let outcomes = (0..spec.repetitions)
        .map(|r| {
            let (train, test) = split_indices(&keys, spec.split_seed(r));
            let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
            run_split(spec, r, pick(&train), pick(&test))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(spec, outcomes, baseline_of(&keys, spec.target)))
}

/// Merges test sessions into tunnel sessions: per (client address, target
/// class), in start order, `chunk` sessions at a time.
pub fn aggregate_test_sessions(
    sessions: &[LabeledSession],
    target: Target,
    chunk: usize,
) -> Result<Vec<LabeledSession>> {
    let mut groups: BTreeMap<(IpAddr, String), Vec<&LabeledSession>> = BTreeMap::new();
    for s in sessions {
        groups.entry((s.session.client.0, target.project(&s.label))).or_default().push(s);
    }
    let mut out = Vec::new();
    for ((host, _), mut members) in groups {
        members
            .sort_by(|a, b| a.session.first_ts.cmp(&b.session.first_ts).then_with(|| a.session_id.cmp(&b.session_id)));
        for (k, part) in members.chunks(chunk.max(1)).enumerate() {
            let merged: Vec<_> = part.iter().map(|s| s.session.clone()).collect();
            out.push(LabeledSession {
                session_id: format!("vpn-{host}-{k}"),
                label: part[0].label,
                session: aggregate_vpn(&merged, VPN_TUNNEL)?,
            });
        }
    }
    Ok(out)
}

/// Repeated 70/30 evaluation over sessions; the training side always uses
/// whole sessions, the test side gets the horizon cut and VPN merge.
pub fn run_session_experiment(
    sessions: &[LabeledSession],
    spec: &ExperimentSpec,
    peaks: &PeakConfig,
) -> Result<EvaluationReport> {
    spec.validate()?;
    check_split_size(sessions.len())?;
    let full: Vec<LabeledSample> = par::map_collect(sessions, |s| LabeledSample {
        session_id: s.session_id.clone(),
        label: s.label,
        features: session_features(&s.session, FeatureSetId::Combined, peaks),
    });
    let keys: Vec<LabelTuple> = sessions.iter().map(|s| s.label).collect();
    let outcomes = (0..spec.repetitions)
        .map(|r| {
            let (train_idx, test_idx) = split_indices(&keys, spec.split_seed(r));
            let train = train_idx.iter().map(|&i| full[i].clone()).collect();
            let test = if spec.time_horizon.is_none() && spec.vpn_chunk.is_none() {
                test_idx.iter().map(|&i| full[i].clone()).collect()
            } else {
                let mut test_sessions: Vec<LabeledSession> = test_idx
                    .iter()
                    .map(|&i| {
                        let s = &sessions[i];
                        LabeledSession {
                            session_id: s.session_id.clone(),
                            label: s.label,
                            session: match spec.time_horizon {
                                Some(h) => truncate_session(&s.session, h),
                                None => s.session.clone(),
                            },
                        }
                    })
                    .collect();
                if let Some(chunk) = spec.vpn_chunk {
                    test_sessions = aggregate_test_sessions(&test_sessions, spec.target, chunk)?;
                }
                par::map_collect(&test_sessions, |s| LabeledSample {
                    session_id: s.session_id.clone(),
                    label: s.label,
                    features: session_features(&s.session, FeatureSetId::Combined, peaks),
                })
            };
            run_split(spec, r, train, test)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(spec, outcomes, baseline_of(&keys, spec.target)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub train_size: usize,
    pub mean_accuracy: f64,
}

/// `run_experiment` once per training-set size.
pub fn learning_curve(data: &[LabeledSample], spec: &ExperimentSpec, sizes: &[usize]) -> Result<Vec<CurvePoint>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidExperiment("learning-curve sizes must be strictly ascending".into()));
    }
    let available = crate::dataset::train_size(data.len());
    if let Some(&max) = sizes.last() {
        if max > available {
            return Err(Error::SubsampleOutOfRange { requested: max, available });
        }
    }
    sizes
        .iter()
        .map(|&n| {
            let spec = ExperimentSpec { train_size: Some(n), ..spec.clone() };
            run_experiment(data, &spec).map(|r| CurvePoint { train_size: n, mean_accuracy: r.mean_accuracy })
        })
        .collect()
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("train_size,accuracy\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.train_size, p.mean_accuracy);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub train_samples: usize,
    pub test_samples: usize,
    pub threads: Option<usize>,
    pub timing: Timing,
}

/// Times the first repetition on a pool of `threads` workers.
pub fn measure_timing(data: &[LabeledSample], spec: &ExperimentSpec, threads: Option<usize>) -> Result<TimingReport> {
    let spec = ExperimentSpec { repetitions: 1, record_timings: true, ..spec.clone() };
    let report = par::with_threads(threads, || run_experiment(data, &spec))?;
    let r = &report.repetitions[0];
    Ok(TimingReport {
        train_samples: r.train_samples,
        test_samples: r.test_samples,
        threads,
        timing: r.timing.expect("timings requested"),
    })
}

fn robustness_target(target: Target) -> Result<()> {
    match target {
        Target::Os | Target::Browser | Target::OsBrowser => Ok(()),
        other => {
            Err(Error::InvalidExperiment(format!("robustness runs predict os, browser or os-browser, not {other}")))
        }
    }
}

/// Clean training, cipher-perturbed test side.
pub fn robustness_cipher(
    data: &[LabeledSample],
    spec: &ExperimentSpec,
    perturbation: CipherPerturbation,
) -> Result<EvaluationReport> {
    robustness_target(spec.target)?;
    run_experiment(data, &ExperimentSpec { perturbation: Some(perturbation), ..spec.clone() })
}

/// Clean training, VPN-merged test side.
pub fn robustness_vpn(
    sessions: &[LabeledSession],
    spec: &ExperimentSpec,
    chunk: usize,
    peaks: &PeakConfig,
) -> Result<EvaluationReport> {
    robustness_target(spec.target)?;
    run_session_experiment(sessions, &ExperimentSpec { vpn_chunk: Some(chunk), ..spec.clone() }, peaks)
}
