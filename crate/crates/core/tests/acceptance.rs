//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Criteria 10-14 need the real labelled corpus as a Combined-schema CSV in
//! `HOSTPRINT_DATASET`; criterion 13 additionally reads features extracted
//! with a 10 s horizon from `HOSTPRINT_DATASET_10S`. Without them those
//! criteria are skipped. Setting `HOSTPRINT_ACCEPT_SVM_MAP` adds SVM+MAP to
//! criterion 10 (slow at full scale).

mod oracles;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use hostprint::dataset::{
    read_csv_path, scale_apply, scale_fit, split_70_30, Application, Browser, LabelTuple, LabeledSample, Os, Target,
};
use hostprint::evaluate::{run_experiment, run_split, ExperimentSpec};
use hostprint::features::{detect_peaks, session_features, FeatureSetId, FeatureVector, PeakConfig};
use hostprint::learners::svm::{map_features, sim_features, train_binary};
use hostprint::learners::{
    grid_for, DistanceMetric, FeatureMap, Hyper, KnnModel, LearnerKind, SmoConfig, SvmOvoModel, Weighting,
};
use hostprint::packet::Timestamp;
use hostprint::synth::{labeled_features, SynthConfig};
use oracles::{close, feature_oracle, knn_oracle, peaks_oracle, random_session};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Verdict::{Fail, Pass, Skip};

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn knn_oracle_equivalence() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut queries = 0;
    for set in 0..200 {
        let n = rng.gen_range(1..=40);
        let dims = rng.gen_range(1..=6);
        let coord = |rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.5) {
                f64::from(rng.gen_range(-3i32..=3))
            } else {
                rng.gen_range(-3.0..3.0)
            }
        };
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dims).map(|_| coord(&mut rng)).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..dims).map(|_| coord(&mut rng)).collect()).collect();
        for metric in DistanceMetric::ALL {
            for weighting in [Weighting::Uniform, Weighting::DistanceInverse] {
                for k in 1..=9 {
                    let model = KnnModel::fit(points.clone(), labels.clone(), 4, k, weighting, metric);
                    for x in xs.iter().chain(points.iter().take(2)) {
                        queries += 1;
                        let want = knn_oracle(&points, &labels, 4, k, weighting, metric, x);
                        if model.predict(x) != want {
                            return Fail(format!("dataset {set}, {metric}, {weighting:?}, k={k}"));
                        }
                    }
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(secs < 10.0, format!("{queries} queries agree, {secs:.2} s"))
}

fn svm_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let config = SmoConfig::default();
    let mut worst_balance: f64 = 0.0;
    for set in 0..50 {
        let dims = rng.gen_range(2..=4);
        let w: Vec<f64> = (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        while rows.len() < 40 || y.iter().all(|&v| v == y[0]) {
            let p: Vec<f64> = (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s: f64 = p.iter().zip(&w).map(|(a, b)| a * b).sum();
            if s.abs() > 0.1 {
                y.push(s.signum());
                rows.push(p);
            }
        }
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let c = 100.0;
        let fit = match train_binary(&refs, &y, c, 1.0, &config) {
            Ok(f) => f,
            Err(e) => return Fail(format!("set {set}: {e}")),
        };
        let balance: f64 = fit.alpha.iter().zip(&y).map(|(a, t)| a * t).sum();
        worst_balance = worst_balance.max(balance.abs());
        if balance.abs() > 1e-6 || fit.alpha.iter().any(|&a| !(0.0..=c).contains(&a)) {
            return Fail(format!("set {set}: dual constraints violated"));
        }
        if rows.iter().zip(&y).any(|(r, &t)| fit.machine.decision(&refs, 1.0, r) * t <= 0.0) {
            return Fail(format!("set {set}: training accuracy below 1"));
        }
    }
    let xor = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let labels = [0, 0, 1, 1];
    let m = SvmOvoModel::fit(&xor, &labels, 2, 1000.0, 1.0, FeatureMap::None, &config).unwrap();
    let xor_ok = xor.iter().zip(&labels).all(|(r, &l)| m.predict(r) == l);
    check(xor_ok, format!("50/50 separable sets fit, max |sum alpha*y| = {worst_balance:.1e}, xor solved"))
}

fn sim_map_formulas() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let dims = rng.gen_range(1..6);
        let x: Vec<f64> = (0..dims).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let anchors: Vec<Vec<f64>> = (0..5).map(|_| (0..dims).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let metric = DistanceMetric::ALL[rng.gen_range(0..5)];
        let t = rng.gen_range(0.01..10.0);
        let gamma = rng.gen_range(1e-4..8.0);
        let sim = sim_features(&x, &anchors, t, metric);
        let map = map_features(&x, &anchors, gamma, metric);
        for (a, (s, m)) in anchors.iter().zip(sim.iter().zip(&map)) {
            let d = metric.distance(&x, a);
            worst = worst.max((s - (1.0 - d.min(t) / t)).abs());
            worst = worst.max((m - (-gamma * d).exp()).abs());
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:.1e} over 20000 values"))
}

fn feature_oracle_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let config = PeakConfig::default();
    for n in 0..100 {
        let rs = random_session(&mut rng, 40);
        let got = session_features(&rs.assemble(), FeatureSetId::Combined, &config);
        let want = feature_oracle(&rs, config.silence_gap_secs, config.min_peak_packets);
        for (name, v) in got.names().into_iter().zip(&got.values) {
            if !close(*v, want[name], 1e-9) {
                return Fail(format!("session {n}: {name} = {v}, oracle {}", want[name]));
            }
        }
    }
    for case in 0..500 {
        let len = rng.gen_range(0..=12);
        let mut t = 0i64;
        let stamps: Vec<i64> = (0..len)
            .map(|_| {
                t += [0, 1_000_000_000, 1_000_000_001, rng.gen_range(1..2_500_000_000)][rng.gen_range(0..4)];
                t
            })
            .collect();
        let min = rng.gen_range(1..4);
        let points: Vec<(Timestamp, u32)> = stamps.iter().map(|&s| (Timestamp(s), 100)).collect();
        let got: Vec<(i64, usize)> =
            detect_peaks(&points, &PeakConfig { silence_gap_secs: 1.0, min_peak_packets: min })
                .iter()
                .map(|p| (p.start.0, p.packets))
                .collect();
        let want: Vec<(i64, usize)> =
            peaks_oracle(&stamps, 1_000_000_000, min).iter().map(|&(a, b)| (stamps[a], b - a)).collect();
        if got != want {
            return Fail(format!("peak case {case}: {got:?} vs {want:?}"));
        }
    }
    Pass("100 sessions x 53 features within 1e-9, 500 peak partitions exact".into())
}

fn scaling() -> Verdict {
    let label = LabelTuple::new(Os::Windows, Browser::Chrome, Application::Twitter);
    let data = labeled_features(
        &SynthConfig { sessions: 200, seed: 5, ..SynthConfig::default() },
        FeatureSetId::Combined,
        &PeakConfig::default(),
    );
    let params = scale_fit(&data);
    let in_unit =
        data.iter().all(|s| scale_apply(&params, &s.features).unwrap().values.iter().all(|v| (0.0..=1.0).contains(v)));
    let row = |a: f64, b: f64| LabeledSample {
        session_id: String::new(),
        label,
        features: FeatureVector { schema: FeatureSetId::Peaks, values: [vec![a, b], vec![0.0; 16]].concat() },
    };
    let params = scale_fit(&[row(0.0, 7.0), row(10.0, 7.0)]);
    let out = scale_apply(&params, &row(20.0, 3.0).features).unwrap();
    check(
        in_unit && out.values[0] == 2.0 && out.values[1] == 0.0,
        format!(
            "training rows in [0,1]: {in_unit}; x=20 on (0,10) -> {}; degenerate -> {}",
            out.values[0], out.values[1]
        ),
    )
}

fn leakage() -> Verdict {
    let data = labeled_features(
        &SynthConfig { sessions: 300, seed: 6, ..SynthConfig::default() },
        FeatureSetId::Combined,
        &PeakConfig::default(),
    );
    let (train, test) = split_70_30(&data, 0).unwrap();
    let mut poisoned = test.clone();
    for s in &mut poisoned {
        s.label = LabelTuple::new(Os::Osx, Browser::NonBrowser, Application::Dropbox);
    }
    let mut checked = Vec::new();
    for learner in [LearnerKind::Rf, LearnerKind::Knn, LearnerKind::SvmRbf] {
        let grid = grid_for(learner).into_iter().step_by(if learner == LearnerKind::Rf { 1 } else { 23 }).collect();
        let spec =
            ExperimentSpec { grid: Some(grid), ..ExperimentSpec::new(learner, FeatureSetId::Combined, Target::Tuple) };
        let clean = run_split(&spec, 0, train.clone(), test.clone()).unwrap();
        let dirty = run_split(&spec, 0, train.clone(), poisoned.clone()).unwrap();
        if clean.model.to_json().unwrap() != dirty.model.to_json().unwrap()
            || clean.result.chosen != dirty.result.chosen
        {
            return Fail(format!("{learner}: fitted model changed"));
        }
        checked.push(learner.as_str());
    }
    Pass(format!("model files bit-identical for {}", checked.join(", ")))
}

fn synthetic_benchmark() -> Verdict {
    let started = Instant::now();
    let data = labeled_features(
        &SynthConfig { sessions: 3000, seed: 1, ..SynthConfig::default() },
        FeatureSetId::Combined,
        &PeakConfig::default(),
    );
    let spec =
        ExperimentSpec { seed: 7, ..ExperimentSpec::new(LearnerKind::Rf, FeatureSetId::Combined, Target::Tuple) };
    let combined = run_experiment(&data, &spec).unwrap().mean_accuracy;
    let no_ssl = run_experiment(&data, &ExperimentSpec { feature_set: FeatureSetId::CombinedNoSsl, ..spec })
        .unwrap()
        .mean_accuracy;
    let secs = started.elapsed().as_secs_f64();
    check(
        combined >= 0.95 && combined >= no_ssl && secs < 300.0,
        format!("combined {combined:.4}, without TLS {no_ssl:.4}, {secs:.1} s"),
    )
}

fn determinism() -> Verdict {
    let data = labeled_features(
        &SynthConfig { sessions: 600, seed: 8, ..SynthConfig::default() },
        FeatureSetId::Combined,
        &PeakConfig::default(),
    );
    let spec =
        ExperimentSpec { seed: 3, ..ExperimentSpec::new(LearnerKind::Rf, FeatureSetId::Combined, Target::Tuple) };
    let a = run_experiment(&data, &spec).unwrap().to_json().unwrap();
    let b = run_experiment(&data, &spec).unwrap().to_json().unwrap();
    check(a == b, format!("{} byte reports {}", a.len(), if a == b { "identical" } else { "differ" }))
}

fn grid_sizes() -> Verdict {
    let sizes: Vec<usize> =
        [LearnerKind::Knn, LearnerKind::SvmRbf, LearnerKind::Rf].into_iter().map(|k| grid_for(k).len()).collect();
    check(sizes == [90, 110, 6], format!("knn {}, svm-rbf {}, rf {}", sizes[0], sizes[1], sizes[2]))
}

fn dataset(var: &str) -> Option<Vec<LabeledSample>> {
    let path = PathBuf::from(std::env::var_os(var)?);
    Some(read_csv_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())).samples)
}

fn reproduce(data: &[LabeledSample], learner: LearnerKind, set: FeatureSetId, train_size: Option<usize>) -> f64 {
    let spec = ExperimentSpec { train_size, ..ExperimentSpec::new(learner, set, Target::Tuple) };
    run_experiment(data, &spec).unwrap().mean_accuracy
}

fn within(value: f64, centre: f64, tol: f64) -> bool {
    (value - centre).abs() <= tol
}

fn combined_accuracy(data: &[LabeledSample]) -> Verdict {
    let rf = reproduce(data, LearnerKind::Rf, FeatureSetId::Combined, None);
    let mut best = rf;
    let mut detail = format!("rf {rf:.4}");
    if std::env::var_os("HOSTPRINT_ACCEPT_SVM_MAP").is_some() {
        let map = reproduce(data, LearnerKind::SvmMap, FeatureSetId::Combined, None);
        best = best.max(map);
        detail += &format!(", svm-map {map:.4}");
    }
    check(within(best, 0.9606, 0.02), format!("{detail} (target 0.9606 +/- 0.02)"))
}

fn common_accuracy(data: &[LabeledSample]) -> Verdict {
    let acc = reproduce(data, LearnerKind::Rf, FeatureSetId::Common, None);
    check(within(acc, 0.935, 0.02), format!("rf {acc:.4} (target 0.935 +/- 0.02)"))
}

fn majority(data: &[LabeledSample]) -> Verdict {
    let spec = ExperimentSpec {
        repetitions: 1,
        grid: Some(vec![Hyper::Rf { n_trees: 20 }]),
        ..ExperimentSpec::new(LearnerKind::Rf, FeatureSetId::Common, Target::Tuple)
    };
    let report = run_experiment(data, &spec).unwrap();
    let b = report.majority_baseline.unwrap();
    let share = data.iter().filter(|s| s.label.to_string() == b.class).count() as f64 / data.len() as f64;
    check(b.accuracy == share, format!("{} at {:.4} (reference 0.3234)", b.class, b.accuracy))
}

fn truncated(data: &[LabeledSample]) -> Verdict {
    let acc = reproduce(data, LearnerKind::Rf, FeatureSetId::Combined, None);
    check(acc >= 0.91, format!("rf {acc:.4} on 10 s sessions (needs >= 0.91)"))
}

fn small_training(data: &[LabeledSample]) -> Verdict {
    let common = reproduce(data, LearnerKind::Rf, FeatureSetId::Common, Some(500));
    let combined = reproduce(data, LearnerKind::Rf, FeatureSetId::Combined, Some(500));
    check(
        within(common, 0.80, 0.04) && within(combined, 0.85, 0.04),
        format!("common {common:.4} (0.80 +/- 0.04), combined {combined:.4} (0.85 +/- 0.04)"),
    )
}

fn main() -> ExitCode {
    let full = dataset("HOSTPRINT_DATASET");
    let short = dataset("HOSTPRINT_DATASET_10S");
    let no_data = || Skip("HOSTPRINT_DATASET not set".into());
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("knn oracle equivalence", Box::new(knn_oracle_equivalence)),
        ("svm correctness", Box::new(svm_correctness)),
        ("sim/map formulas", Box::new(sim_map_formulas)),
        ("feature extraction oracle", Box::new(feature_oracle_check)),
        ("scaling", Box::new(scaling)),
        ("no test leakage", Box::new(leakage)),
        ("synthetic end-to-end benchmark", Box::new(synthetic_benchmark)),
        ("determinism", Box::new(determinism)),
        ("grid sizes", Box::new(grid_sizes)),
        ("combined features accuracy", Box::new(|| full.as_deref().map_or_else(no_data, combined_accuracy))),
        ("common features accuracy", Box::new(|| full.as_deref().map_or_else(no_data, common_accuracy))),
        ("majority-class baseline", Box::new(|| full.as_deref().map_or_else(no_data, majority))),
        (
            "10 s truncation",
            Box::new(|| short.as_deref().map_or_else(|| Skip("HOSTPRINT_DATASET_10S not set".into()), truncated)),
        ),
        ("500-sample training", Box::new(|| full.as_deref().map_or_else(no_data, small_training))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("{tag} {:>2} {name}: {detail}", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
