use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use hostprint::capture::write_pcap;
use hostprint::dataset::{read_csv_path, write_csv, Dataset, LabelTuple};
use hostprint::features::{session_features, FeatureSetId, PeakConfig};
use hostprint::learners::{DistanceMetric, Hyper, Weighting};
use hostprint::model::ModelFile;
use hostprint::packet::LinkType;
use hostprint::session::{sessions_from_pcap, truncate_session, SplitConfig};
use hostprint::synth::{generate, SynthConfig, SynthSession};
use tempfile::TempDir;

fn hostprint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hostprint")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hostprint(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// `synth` output plus the dataset extracted from it, shared by all tests.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn pcap(&self) -> PathBuf {
        self.dir.path().join("synth.pcap")
    }

    fn labels(&self) -> PathBuf {
        self.dir.path().join("labels.csv")
    }

    fn csv(&self) -> PathBuf {
        self.dir.path().join("data.csv")
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let f = Fixture { dir: tempfile::tempdir().unwrap() };
        ok(&["synth", "-o", p(f.dir.path()), "--sessions", "270", "--seed", "3"]);
        ok(&["extract", p(&f.pcap()), "--labels", p(&f.labels()), "-o", p(&f.csv())]);
        f
    })
}

fn write_sessions(path: &Path, sessions: &[&SynthSession]) {
    let mut frames: Vec<_> = sessions.iter().flat_map(|s| s.frames()).collect();
    frames.sort_by_key(|f| f.timestamp);
    write_pcap(path, LinkType::Ethernet, &frames).unwrap();
}

#[test]
fn help_and_usage_errors_have_their_exit_codes() {
    assert_eq!(code(&hostprint(&["--help"])), 0);
    assert_eq!(code(&hostprint(&["evaluate", "--help"])), 0);
    assert_eq!(code(&hostprint(&["--no-such-flag"])), 2);
    assert_eq!(code(&hostprint(&["frobnicate"])), 2);
    assert_eq!(code(&hostprint(&["train", "x.csv", "-o", "m.json", "--learner", "perceptron"])), 2);
    assert_eq!(code(&hostprint(&["--jobs", "0", "features"])), 2);
    let help = String::from_utf8(hostprint(&["extract", "--help"]).stdout).unwrap();
    for flag in ["--port", "--silence-gap", "--direction-convention", "--horizon", "--labels"] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn extract_writes_one_labeled_row_per_session() {
    let f = fixture();
    let data = read_csv_path(&f.csv()).unwrap();
    assert_eq!(data.schema, FeatureSetId::Combined);
    assert_eq!(data.len(), 270);
    assert!(data.samples.iter().all(|s| s.label != LabelTuple::UNLABELED));
    let header = fs::read_to_string(f.csv()).unwrap().lines().next().unwrap().split(',').count();
    assert_eq!(header, 4 + 53);

    let synth = generate(&SynthConfig { sessions: 270, seed: 3, ..SynthConfig::default() });
    for s in &synth {
        let row = data.samples.iter().find(|r| r.session_id == s.id()).expect("session present");
        assert_eq!(row.label, s.label);
    }
}

#[test]
fn extract_honours_the_horizon() {
    let f = fixture();
    let out = f.dir.path().join("h10.csv");
    ok(&["extract", p(&f.pcap()), "--labels", p(&f.labels()), "--horizon", "10", "-o", p(&out)]);
    let data = read_csv_path(&out).unwrap();
    let (sessions, _) = sessions_from_pcap(&f.pcap(), SplitConfig::default()).unwrap();
    assert_eq!(data.len(), sessions.len());
    let peaks = PeakConfig::default();
    let mut shorter = 0;
    for (row, s) in data.samples.iter().zip(&sessions) {
        let cut = truncate_session(s, 10.0);
        shorter += usize::from(cut.len() < s.len());
        assert_eq!(row.features, session_features(&cut, FeatureSetId::Combined, &peaks));
    }
    assert!(shorter > 0, "horizon never cut a session");
}

#[test]
fn extract_port_filter_and_empty_output() {
    let f = fixture();
    let mut synth = generate(&SynthConfig { sessions: 2, seed: 5, ..SynthConfig::default() });
    for s in &mut synth {
        for (pkt, _) in &mut s.packets {
            for port in [&mut pkt.src_port, &mut pkt.dst_port] {
                if *port == 443 {
                    *port = 8443;
                }
            }
        }
    }
    let pcap = f.dir.path().join("alt-port.pcap");
    write_sessions(&pcap, &synth.iter().collect::<Vec<_>>());

    let out = f.dir.path().join("alt-443.csv");
    let run = ok(&["extract", p(&pcap), "-o", p(&out)]);
    assert!(stderr(&run).contains("warning"), "{}", stderr(&run));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("session_id,os,browser,application,"));

    let out = f.dir.path().join("alt-all.csv");
    ok(&["extract", p(&pcap), "--port", "0", "-o", p(&out)]);
    let data = read_csv_path(&out).unwrap();
    assert_eq!(data.len(), 2);
    assert!(data.samples.iter().all(|s| s.label == LabelTuple::UNLABELED));
}

#[test]
fn extract_reads_directories_and_names_bad_files() {
    let f = fixture();
    let dir = f.dir.path().join("captures");
    fs::create_dir_all(&dir).unwrap();
    let synth = generate(&SynthConfig { sessions: 4, seed: 8, ..SynthConfig::default() });
    write_sessions(&dir.join("a.pcap"), &[&synth[0], &synth[1]]);
    write_sessions(&dir.join("b.cap"), &[&synth[2], &synth[3]]);
    fs::write(dir.join("notes.txt"), "ignored").unwrap();
    let out = f.dir.path().join("dir.csv");
    ok(&["extract", p(&dir), "-o", p(&out)]);
    assert_eq!(read_csv_path(&out).unwrap().len(), 4);

    let bad = dir.join("broken.pcap");
    fs::write(&bad, b"definitely not a capture").unwrap();
    let run = hostprint(&["extract", p(&bad), "-o", p(&out)]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("broken.pcap"), "{}", stderr(&run));
    let run = hostprint(&["extract", "/no/such/file.pcap", "-o", p(&out)]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("/no/such/file.pcap"), "{}", stderr(&run));
}

#[test]
fn training_is_deterministic_and_round_trips_through_predict() {
    let f = fixture();
    let a = f.dir.path().join("rf-a.json");
    let b = f.dir.path().join("rf-b.json");
    for out in [&a, &b] {
        ok(&["train", p(&f.csv()), "--learner", "rf", "--seed", "4", "-o", p(out)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let predictions = f.dir.path().join("rf-pred.csv");
    ok(&["predict", "--model", p(&a), p(&f.csv()), "-o", p(&predictions)]);
    let model = ModelFile::load(&a).unwrap();
    let data = read_csv_path(&f.csv()).unwrap();
    let mut reader = csv::Reader::from_path(&predictions).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(header.iter().take(3).collect::<Vec<_>>(), ["session_id", "truth", "predicted"]);
    assert_eq!(header.len(), 3 + model.classes.len());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), data.len());
    for (row, s) in rows.iter().zip(&data.samples) {
        assert_eq!(&row[0], s.session_id);
        assert_eq!(&row[1], s.label.to_string());
        assert_eq!(row[2], model.predict(&s.features).unwrap());
    }
}

#[test]
fn knn_with_one_neighbour_memorises_its_training_file() {
    let f = fixture();
    let data = read_csv_path(&f.csv()).unwrap();
    let hyper = Hyper::Knn { k: 1, weighting: Weighting::Uniform, metric: DistanceMetric::Euclidean };
    let model = ModelFile::train(&data.samples, &hyper, hostprint::dataset::Target::Tuple, 0).unwrap();
    let path = f.dir.path().join("knn1.json");
    fs::write(&path, model.to_json().unwrap()).unwrap();
    let out = f.dir.path().join("knn1-pred.csv");
    let run = ok(&["predict", "--model", p(&path), p(&f.csv()), "-o", p(&out)]);
    assert!(stderr(&run).contains("accuracy 1.0000"), "{}", stderr(&run));
    let mut reader = csv::Reader::from_path(&out).unwrap();
    assert!(reader.records().map(Result::unwrap).all(|r| r[1] == r[2]));
}

#[test]
fn predict_rejects_mismatched_schemas_and_accepts_empty_input() {
    let f = fixture();
    let data = read_csv_path(&f.csv()).unwrap();
    let model = f.dir.path().join("rf-combined.json");
    ok(&["train", p(&f.csv()), "--learner", "rf", "-o", p(&model)]);

    let common: Vec<_> = data
        .samples
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.features = hostprint::features::project(&s.features, FeatureSetId::Common).unwrap();
            s
        })
        .collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, &Dataset::new(FeatureSetId::Common, common).unwrap()).unwrap();
    let common_csv = f.dir.path().join("common.csv");
    fs::write(&common_csv, buf).unwrap();
    let out = f.dir.path().join("mismatch.csv");
    let run = hostprint(&["predict", "--model", p(&model), p(&common_csv), "-o", p(&out)]);
    assert_eq!(code(&run), 1);
    let msg = stderr(&run);
    assert!(msg.contains("combined") && msg.contains("common"), "{msg}");

    let mut buf = Vec::new();
    write_csv(&mut buf, &Dataset::new(FeatureSetId::Combined, Vec::new()).unwrap()).unwrap();
    let empty = f.dir.path().join("empty.csv");
    fs::write(&empty, buf).unwrap();
    let out = f.dir.path().join("empty-pred.csv");
    ok(&["predict", "--model", p(&model), p(&empty), "-o", p(&out)]);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 1);
}

#[test]
fn training_errors_are_data_errors() {
    let f = fixture();
    let data = read_csv_path(&f.csv()).unwrap();
    let first = data.samples[0].label;
    let single: Vec<_> = data.samples.iter().filter(|s| s.label == first).cloned().collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, &Dataset::new(FeatureSetId::Combined, single).unwrap()).unwrap();
    let path = f.dir.path().join("single.csv");
    fs::write(&path, buf).unwrap();
    let run = hostprint(&["train", p(&path), "-o", p(&f.dir.path().join("never.json"))]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("single class"), "{}", stderr(&run));
    assert!(!f.dir.path().join("never.json").exists());

    let text = fs::read_to_string(f.csv()).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[4] = "garbage,row";
    let path = f.dir.path().join("broken.csv");
    fs::write(&path, lines.join("\n")).unwrap();
    let run = hostprint(&["train", p(&path), "-o", p(&f.dir.path().join("never.json"))]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("line 5"), "{}", stderr(&run));
}

#[test]
fn evaluate_writes_a_reproducible_report_and_plots() {
    let f = fixture();
    let plots = f.dir.path().join("plots");
    let a = f.dir.path().join("report-a.json");
    let b = f.dir.path().join("report-b.json");
    let args = |out: &Path| {
        vec![
            "evaluate".to_string(),
            p(&f.csv()).to_string(),
            "--repetitions".into(),
            "2".into(),
            "--features".into(),
            "combined".into(),
            "--learning-curve".into(),
            "60,120".into(),
            "--plots".into(),
            p(&plots).to_string(),
            "-o".into(),
            p(out).to_string(),
        ]
    };
    for out in [&a, &b] {
        let argv = args(out);
        let run = ok(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        let text = String::from_utf8(run.stdout).unwrap();
        assert!(text.contains("confusion") && text.contains("learning curve"), "{text}");
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    assert_eq!(report["report_version"], 1);
    assert_eq!(report["accuracies"].as_array().unwrap().len(), 2);
    assert!(report["mean_accuracy"].as_f64().unwrap() > 0.8);
    for name in ["confusion.csv", "accuracy.csv", "learning_curve.csv"] {
        assert!(plots.join(name).exists(), "{name}");
    }
    let curve = fs::read_to_string(plots.join("learning_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
}

#[test]
fn config_overlay_is_checked_and_yields_to_flags() {
    let f = fixture();
    let config = f.dir.path().join("bad.toml");
    fs::write(&config, "[evaluate]\nrepetitons = 2\n").unwrap();
    let out = f.dir.path().join("cfg.json");
    let run = hostprint(&["--config", p(&config), "evaluate", p(&f.csv()), "-o", p(&out)]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("repetitons"), "{}", stderr(&run));

    let config = f.dir.path().join("good.toml");
    fs::write(&config, "jobs = 1\n[model]\nlearner = \"rf\"\nseed = 9\n[evaluate]\nrepetitions = 1\n").unwrap();
    ok(&["--config", p(&config), "evaluate", p(&f.csv()), "-o", p(&out)]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["repetitions"].as_array().unwrap().len(), 1);
    assert_eq!(report["spec"]["seed"], 9);

    ok(&["--config", p(&config), "evaluate", p(&f.csv()), "--repetitions", "2", "--seed", "3", "-o", p(&out)]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["repetitions"].as_array().unwrap().len(), 2);
    assert_eq!(report["spec"]["seed"], 3);
}

#[test]
fn evaluate_runs_packet_level_experiments() {
    let f = fixture();
    let out = f.dir.path().join("horizon.json");
    let csv = hostprint(&["evaluate", p(&f.csv()), "--horizon", "10", "-o", p(&out)]);
    assert_eq!(code(&csv), 2);

    ok(&[
        "evaluate",
        p(&f.pcap()),
        "--labels",
        p(&f.labels()),
        "--target",
        "os",
        "--repetitions",
        "1",
        "--horizon",
        "10",
        "--vpn-chunk",
        "3",
        "-o",
        p(&out),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["spec"]["time_horizon"], 10.0);
    assert_eq!(report["spec"]["vpn_chunk"], 3);
    assert!(report["repetitions"][0]["test_samples"].as_u64().unwrap() < 81);
}

#[test]
fn perturb_shifts_cipher_counts_or_copies() {
    let f = fixture();
    let data = read_csv_path(&f.csv()).unwrap();
    let col = FeatureSetId::Combined.index_of("ssl_cipher_methods").unwrap();

    let out = f.dir.path().join("minus5.csv");
    ok(&["perturb", p(&f.csv()), "--cipher", "--delta-suites", "-5", "-o", p(&out)]);
    let shifted = read_csv_path(&out).unwrap();
    assert_eq!(shifted.len(), data.len());
    for (a, b) in shifted.samples.iter().zip(&data.samples) {
        assert_eq!(a.features.values[col], (b.features.values[col] - 5.0).max(0.0));
        for (i, (x, y)) in a.features.values.iter().zip(&b.features.values).enumerate() {
            if i != col {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    let out = f.dir.path().join("copy.csv");
    ok(&["perturb", p(&f.csv()), "-o", p(&out)]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(f.csv()).unwrap());

    let run = hostprint(&["perturb", p(&f.csv()), "--vpn", "-o", p(&out)]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("packet-level"), "{}", stderr(&run));
}

#[test]
fn perturb_vpn_merges_a_hosts_sessions() {
    let f = fixture();
    let synth = generate(&SynthConfig { sessions: 200, seed: 11, ..SynthConfig::default() });
    let pair = synth
        .iter()
        .enumerate()
        .find_map(|(i, a)| {
            synth[i + 1..].iter().find(|b| b.client.0 == a.client.0 && b.label == a.label).map(|b| [a, b])
        })
        .expect("two sessions from one host");
    let pcap = f.dir.path().join("pair.pcap");
    write_sessions(&pcap, &pair);

    let out = f.dir.path().join("pair.csv");
    ok(&["perturb", p(&pcap), "-o", p(&out)]);
    assert_eq!(read_csv_path(&out).unwrap().len(), 2);

    ok(&["perturb", p(&pcap), "--vpn", "-o", p(&out)]);
    let merged = read_csv_path(&out).unwrap();
    assert_eq!(merged.len(), 1);
    let total = FeatureSetId::Combined.index_of("total_packets").unwrap();
    let packets = (pair[0].packets.len() + pair[1].packets.len()) as f64;
    assert_eq!(merged.samples[0].features.values[total], packets);
}

#[test]
fn info_subcommands_print_tables() {
    let f = fixture();
    let out = ok(&["features", "--set", "common"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 26);
    let out = ok(&["features"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("tcp_mss"));
    let out = ok(&["stats", p(&f.csv()), "--target", "os"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("270 samples, 3 classes") && text.contains("majority baseline"), "{text}");
    ok(&["--jobs", "1", "stats", p(&f.csv())]);
}
