//! Flag groups shared between subcommands and the TOML config overlay.
//!
//! Every group is both a set of clap flags and a config section of the same
//! name. Values given on the command line win over the config file, which
//! wins over the built-in defaults.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use hostprint::dataset::{CipherPerturbation, Target};
use hostprint::evaluate::ExperimentSpec;
use hostprint::features::{FeatureSetId, PeakConfig};
use hostprint::learners::LearnerKind;
use hostprint::session::{DirectionConvention, SplitConfig};
use serde::{Deserialize, Deserializer};

/// Builds `a.or(b)` field by field.
macro_rules! overlay {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            pub fn or(self, fallback: Self) -> Self {
                $ty { $($field: self.$field.or(fallback.$field)),* }
            }
        }
    };
}

fn parsed<'de, D, T>(d: D) -> Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: Display,
{
    let s = String::deserialize(d)?;
    s.parse().map(Some).map_err(serde::de::Error::custom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Forward = initiator to responder.
    Initiator,
    /// Forward = responder to initiator.
    Responder,
}

/// `[capture]`: reading packet captures into sessions.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureOpts {
    /// Label rules file (kind,pattern,os,browser,application)
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,

    /// Keep sessions with this port on either side; 0 keeps every session [default: 443]
    #[arg(long)]
    pub port: Option<u16>,

    /// Silence (seconds) that closes a burst [default: 1.0]
    #[arg(long, value_name = "SECS")]
    pub silence_gap: Option<f64>,

    /// Packets a burst needs to count [default: 2]
    #[arg(long, value_name = "N")]
    pub min_peak_packets: Option<usize>,

    /// Which side is the forward flow [default: initiator]
    #[arg(long, value_enum)]
    pub direction_convention: Option<Convention>,

    /// Only the first SECS seconds of each session are kept (evaluate: test side only)
    #[arg(long, value_name = "SECS")]
    pub horizon: Option<f64>,
}

overlay!(CaptureOpts { labels, port, silence_gap, min_peak_packets, direction_convention, horizon });

impl CaptureOpts {
    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            port_filter: match self.port.unwrap_or(443) {
                0 => None,
                p => Some(p),
            },
            convention: match self.direction_convention.unwrap_or(Convention::Initiator) {
                Convention::Initiator => DirectionConvention::InitiatorForward,
                Convention::Responder => DirectionConvention::ResponderForward,
            },
            ..SplitConfig::default()
        }
    }

    pub fn peak_config(&self) -> PeakConfig {
        let d = PeakConfig::default();
        PeakConfig {
            silence_gap_secs: self.silence_gap.unwrap_or(d.silence_gap_secs),
            min_peak_packets: self.min_peak_packets.unwrap_or(d.min_peak_packets),
        }
    }
}

/// `[model]`: what to learn and how to search for it.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOpts {
    /// knn, svm-rbf, svm-sim, svm-map or rf [default: rf]
    #[arg(long)]
    #[serde(default, deserialize_with = "parsed")]
    pub learner: Option<LearnerKind>,

    /// Feature set, e.g. combined, common, peaks, combined-no-ssl [default: combined]
    #[arg(long)]
    #[serde(default, deserialize_with = "parsed")]
    pub features: Option<FeatureSetId>,

    /// tuple, os, browser, os-browser or application [default: tuple]
    #[arg(long)]
    #[serde(default, deserialize_with = "parsed")]
    pub target: Option<Target>,

    /// Seed for splits, folds and learners [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,

    /// Cross-validation folds [default: 5]
    #[arg(long)]
    pub folds: Option<usize>,
}

overlay!(ModelOpts { learner, features, target, seed, folds });

impl ModelOpts {
    pub fn learner(&self) -> LearnerKind {
        self.learner.unwrap_or(LearnerKind::Rf)
    }

    pub fn features(&self) -> FeatureSetId {
        self.features.unwrap_or(FeatureSetId::Combined)
    }

    pub fn target(&self) -> Target {
        self.target.unwrap_or(Target::Tuple)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn folds(&self) -> usize {
        self.folds.unwrap_or(5)
    }
}

/// `[evaluate]`: the repeated 70/30 harness.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOpts {
    /// Independent 70/30 splits [default: 5]
    #[arg(long)]
    pub repetitions: Option<usize>,

    /// Subsample every training side to N sessions
    #[arg(long, value_name = "N")]
    pub train_size: Option<usize>,

    /// Also run a learning curve over these ascending training sizes
    #[arg(long, value_name = "N,N,...", value_delimiter = ',')]
    pub learning_curve: Option<Vec<usize>>,

    /// Merge test sessions of one host and class N at a time (packet input only)
    #[arg(long, value_name = "N")]
    pub vpn_chunk: Option<usize>,

    /// Record wall-clock training and test times in the report
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub timing: Option<bool>,
}

overlay!(EvalOpts { repetitions, train_size, learning_curve, vpn_chunk, timing });

/// `[cipher]`: ClientHello perturbation of test features.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CipherOpts {
    /// Added to the offered cipher-suite count (floored at 0)
    #[arg(long, allow_negative_numbers = true, value_name = "N")]
    pub delta_suites: Option<i64>,

    /// Added to the extension count (floored at 0)
    #[arg(long, allow_negative_numbers = true, value_name = "N")]
    pub delta_extensions: Option<i64>,

    /// Replaces the TLS version code, decimal or 0x-prefixed hex
    #[arg(long, value_parser = parse_u16, value_name = "CODE")]
    pub new_version: Option<u16>,
}

overlay!(CipherOpts { delta_suites, delta_extensions, new_version });

impl CipherOpts {
    pub fn perturbation(&self) -> CipherPerturbation {
        CipherPerturbation {
            delta_suites: self.delta_suites.unwrap_or(0),
            delta_extensions: self.delta_extensions.unwrap_or(0),
            new_version: self.new_version,
        }
    }
}

fn parse_u16(s: &str) -> Result<u16, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u16::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("`{s}`: {e}"))
}

pub fn experiment_spec(model: &ModelOpts, eval: &EvalOpts, cipher: &CipherOpts) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(model.learner(), model.features(), model.target());
    spec.seed = model.seed();
    spec.folds = model.folds();
    spec.repetitions = eval.repetitions.unwrap_or(spec.repetitions);
    spec.train_size = eval.train_size;
    spec.vpn_chunk = eval.vpn_chunk;
    spec.record_timings = eval.timing.unwrap_or(false);
    let p = cipher.perturbation();
    spec.perturbation = (!p.is_identity()).then_some(p);
    spec
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub jobs: Option<usize>,
    #[serde(default)]
    pub capture: CaptureOpts,
    #[serde(default)]
    pub model: ModelOpts,
    #[serde(default)]
    pub evaluate: EvalOpts,
    #[serde(default)]
    pub cipher: CipherOpts,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }
}
