use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use hostprint::capture::write_frames;
use hostprint::dataset::{
    label_statistics, majority_baseline, perturb_cipher, Dataset, LabelRules, LabelTuple, LabeledSample, RuleKind,
    Target,
};
use hostprint::evaluate::{
    aggregate_test_sessions, curve_csv, grid_search_cv, learning_curve, run_experiment, run_session_experiment,
};
use hostprint::features::{dictionary_markdown, project, FeatureSetId, FeatureVector};
use hostprint::learners::grid_for;
use hostprint::model::ModelFile;
use hostprint::packet::LinkType;
use hostprint::synth::{generate, SynthConfig};

use crate::io::{is_packet_input, load_sessions, read_dataset, session_samples, write_atomic, write_dataset};
use crate::options::{experiment_spec, CaptureOpts, CipherOpts, ConfigFile, EvalOpts, ModelOpts};
use crate::usage;

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// A capture file or a directory of .pcap/.cap files
    input: PathBuf,

    /// Dataset CSV to write
    #[arg(short, long)]
    out: PathBuf,

    #[command(flatten)]
    capture: CaptureOpts,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset CSV
    input: PathBuf,

    /// Model JSON to write
    #[arg(short, long)]
    out: PathBuf,

    #[command(flatten)]
    model: ModelOpts,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Dataset CSV, or captures (file or directory) for horizon and VPN runs
    input: PathBuf,

    /// Report JSON to write
    #[arg(short, long)]
    out: PathBuf,

    /// Directory for the confusion, per-class and learning-curve tables
    #[arg(long, value_name = "DIR")]
    plots: Option<PathBuf>,

    #[command(flatten)]
    model: ModelOpts,

    #[command(flatten)]
    eval: EvalOpts,

    #[command(flatten)]
    cipher: CipherOpts,

    #[command(flatten)]
    capture: CaptureOpts,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model JSON written by `train`
    #[arg(short, long)]
    model: PathBuf,

    /// Dataset CSV
    input: PathBuf,

    /// Predictions CSV to write
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PerturbArgs {
    /// Dataset CSV, or captures for --vpn
    input: PathBuf,

    /// Dataset CSV to write
    #[arg(short, long)]
    out: PathBuf,

    /// Shift the ClientHello features (the default when --vpn is absent)
    #[arg(long, conflicts_with = "vpn")]
    cipher: bool,

    /// Merge each host's sessions into tunnel sessions
    #[arg(long)]
    vpn: bool,

    /// Sessions per tunnel session [default: all of a host's sessions]
    #[arg(long, value_name = "N", requires = "vpn")]
    vpn_chunk: Option<usize>,

    #[command(flatten)]
    deltas: CipherOpts,

    #[command(flatten)]
    capture: CaptureOpts,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// List the columns of one feature set instead
    #[arg(long)]
    set: Option<FeatureSetId>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Dataset CSV
    input: PathBuf,

    /// tuple, os, browser, os-browser or application [default: tuple]
    #[arg(long)]
    target: Option<Target>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Directory for synth.pcap and labels.csv
    #[arg(short, long)]
    out: PathBuf,

    /// Sessions to generate
    #[arg(long, default_value_t = 3000)]
    sessions: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn check_horizon(capture: &CaptureOpts) -> Result<()> {
    match capture.horizon {
        Some(h) if !(h > 0.0) => Err(usage(format!("--horizon must be positive, got {h}"))),
        _ => Ok(()),
    }
}

pub fn extract(args: ExtractArgs, config: ConfigFile) -> Result<()> {
    let capture = args.capture.or(config.capture);
    check_horizon(&capture)?;
    let sessions = load_sessions(&args.input, &capture, true)?;
    if sessions.is_empty() {
        eprintln!("warning: no sessions found; writing a header-only CSV");
    }
    let samples = session_samples(&sessions, &capture.peak_config());
    write_dataset(&args.out, &Dataset::new(FeatureSetId::Combined, samples)?)?;
    eprintln!("wrote {} sessions to {}", sessions.len(), args.out.display());
    Ok(())
}

fn project_samples(samples: Vec<LabeledSample>, set: FeatureSetId) -> Result<Vec<LabeledSample>> {
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

pub fn train(args: TrainArgs, config: ConfigFile) -> Result<()> {
    let model = args.model.or(config.model);
    let data = read_dataset(&args.input)?;
    let samples = project_samples(data.samples, model.features())?;
    let grid = grid_for(model.learner());
    let search = grid_search_cv(&samples, model.target(), &grid, model.folds(), model.seed())?;
    let fitted = ModelFile::train(&samples, &search.best, model.target(), model.seed())?;
    write_atomic(&args.out, fitted.to_json()?.as_bytes())?;
    eprintln!(
        "searched {} cells, chose {} (cv accuracy {:.4}); {} classes; model written to {}",
        grid.len(),
        search.best,
        search.best_score,
        fitted.classes.len(),
        args.out.display()
    );
    Ok(())
}

pub fn evaluate(args: EvaluateArgs, config: ConfigFile) -> Result<()> {
    let model = args.model.or(config.model);
    let eval = args.eval.or(config.evaluate);
    let cipher = args.cipher.or(config.cipher);
    let capture = args.capture.or(config.capture);
    check_horizon(&capture)?;
    let mut spec = experiment_spec(&model, &eval, &cipher);

    let mut curve = None;
    let report = if is_packet_input(&args.input) {
        if eval.learning_curve.is_some() {
            return Err(usage("--learning-curve needs a dataset CSV input"));
        }
        spec.time_horizon = capture.horizon;
        let sessions = load_sessions(&args.input, &capture, false)?;
        run_session_experiment(&sessions, &spec, &capture.peak_config())?
    } else {
        if spec.vpn_chunk.is_some() || capture.horizon.is_some() {
            return Err(usage("--vpn-chunk and --horizon need packet captures as input, not a dataset CSV"));
        }
        let data = read_dataset(&args.input)?;
        let report = run_experiment(&data.samples, &spec)?;
        if let Some(sizes) = &eval.learning_curve {
            curve = Some(learning_curve(&data.samples, &spec, sizes)?);
        }
        report
    };

    write_atomic(&args.out, report.to_json()?.as_bytes())?;
    if let Some(dir) = &args.plots {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, text) in report.plot_csvs() {
            write_atomic(&dir.join(name), text.as_bytes())?;
        }
        if let Some(points) = &curve {
            write_atomic(&dir.join("learning_curve.csv"), curve_csv(points).as_bytes())?;
        }
    }
    print!("{}", report.to_text());
    if let Some(points) = &curve {
        println!("learning curve");
        for p in points {
            println!("  {:>6}  {:.4}", p.train_size, p.mean_accuracy);
        }
    }
    Ok(())
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let model = ModelFile::load(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let data = read_dataset(&args.input)?;
    let probe = FeatureVector { schema: data.schema, values: vec![0.0; data.schema.len()] };
    if project(&probe, model.schema).is_err() {
        bail!(
            "model expects feature set {} but {} holds feature set {}",
            model.schema,
            args.input.display(),
            data.schema
        );
    }

    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["session_id".to_string(), "truth".to_string(), "predicted".to_string()];
    header.extend(model.classes.iter().map(|c| format!("votes:{c}")));
    out.write_record(&header)?;
    let (mut labeled, mut correct) = (0usize, 0usize);
    for s in &data.samples {
        let features = project(&s.features, model.schema)?;
        let p = model.predict_votes(&features)?;
        let truth = model.target.project(&s.label);
        if s.label != LabelTuple::UNLABELED {
            labeled += 1;
            correct += usize::from(truth == p.class);
        }
        let mut row = vec![s.session_id.clone(), truth, p.class];
        row.extend(p.votes.iter().map(|v| v.to_string()));
        out.write_record(&row)?;
    }
    let bytes = out.into_inner().map_err(|e| anyhow!("{}", e.error()))?;
    write_atomic(&args.out, &bytes)?;
    if labeled > 0 {
        eprintln!("accuracy {:.4} over {labeled} labeled rows", correct as f64 / labeled as f64);
    }
    eprintln!("wrote {} predictions to {}", data.samples.len(), args.out.display());
    Ok(())
}

pub fn perturb(args: PerturbArgs, config: ConfigFile) -> Result<()> {
    let capture = args.capture.or(config.capture);
    let deltas = args.deltas.or(config.cipher).perturbation();
    check_horizon(&capture)?;
    let packets = is_packet_input(&args.input);
    if args.vpn && !packets {
        bail!("--vpn needs packet-level data: {} is a dataset CSV, pass the captures instead", args.input.display());
    }
    if args.vpn_chunk == Some(0) {
        return Err(usage("--vpn-chunk must be at least 1"));
    }

    let (schema, mut samples) = if packets {
        let mut sessions = load_sessions(&args.input, &capture, true)?;
        if args.vpn {
            let before = sessions.len();
            sessions = aggregate_test_sessions(&sessions, Target::Tuple, args.vpn_chunk.unwrap_or(usize::MAX))?;
            eprintln!("merged {before} sessions into {} tunnel sessions", sessions.len());
        }
        (FeatureSetId::Combined, session_samples(&sessions, &capture.peak_config()))
    } else {
        let data = read_dataset(&args.input)?;
        (data.schema, data.samples)
    };
    if !deltas.is_identity() {
        for s in &mut samples {
            s.features = perturb_cipher(&s.features, &deltas)?;
        }
    }
    write_dataset(&args.out, &Dataset::new(schema, samples)?)?;
    Ok(())
}

pub fn features(args: FeaturesArgs) -> Result<()> {
    match args.set {
        Some(set) => {
            for (i, name) in set.feature_names().iter().enumerate() {
                println!("{i:>2}  {name}");
            }
        }
        None => print!("{}", dictionary_markdown()),
    }
    Ok(())
}

pub fn stats(args: StatsArgs, config: ConfigFile) -> Result<()> {
    let target = args.target.or(config.model.target).unwrap_or(Target::Tuple);
    let data = read_dataset(&args.input)?;
    let rows = label_statistics(&data.samples, target);
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{} samples, {} classes, feature set {}", data.len(), rows.len(), data.schema);
    let _ = writeln!(out, "{:<width$}  {:>7}  {:>7}", "class", "count", "share");
    for (class, count, share) in &rows {
        let _ = writeln!(out, "{class:<width$}  {count:>7}  {:>6.2}%", share * 100.0);
    }
    if let Some((class, share)) = majority_baseline(&data.samples, target) {
        let _ = writeln!(out, "majority baseline {:.2}% ({class})", share * 100.0);
    }
    print!("{out}");
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    if args.sessions == 0 {
        return Err(usage("--sessions must be at least 1"));
    }
    let sessions = generate(&SynthConfig { sessions: args.sessions, seed: args.seed, ..SynthConfig::default() });
    let mut frames: Vec<_> = sessions.iter().flat_map(|s| s.frames()).collect();
    frames.sort_by_key(|f| f.timestamp);
    let rules: Vec<_> = sessions.iter().map(|s| (RuleKind::Client, format_endpoint(s.client), s.label)).collect();

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut pcap = Vec::new();
    write_frames(&mut pcap, LinkType::Ethernet, &frames)?;
    write_atomic(&args.out.join("synth.pcap"), &pcap)?;
    let mut labels = Vec::new();
    LabelRules::write_rows(&mut labels, &rules)?;
    write_atomic(&args.out.join("labels.csv"), &labels)?;
    eprintln!("wrote {} sessions ({} frames) to {}", sessions.len(), frames.len(), args.out.display());
    Ok(())
}

fn format_endpoint((ip, port): (std::net::IpAddr, u16)) -> String {
    match ip {
        std::net::IpAddr::V4(v4) => format!("{v4}:{port}"),
        std::net::IpAddr::V6(v6) => format!("[{v6}]:{port}"),
    }
}
