use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hostprint::dataset::{self, Dataset, LabelRules, LabelTuple, LabeledSample, LabeledSession};
use hostprint::features::{session_features, FeatureSetId, PeakConfig};
use hostprint::session::{sessions_from_pcap, truncate_session};
use rayon::prelude::*;

use crate::options::CaptureOpts;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut buf = Vec::new();
    dataset::write_csv(&mut buf, data)?;
    write_atomic(path, &buf)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    dataset::read_csv_path(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn is_capture(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pcap" | "cap"))
}

/// True for a directory or a file with a capture extension.
pub fn is_packet_input(path: &Path) -> bool {
    path.is_dir() || is_capture(path)
}

/// The capture files behind `input`, sorted by name for directories.
pub fn capture_files(input: &Path) -> Result<Vec<PathBuf>> {
    if !input.is_dir() {
        if !input.exists() {
            bail!("{}: no such file or directory", input.display());
        }
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(input).with_context(|| format!("listing {}", input.display()))? {
        let path = entry?.path();
        if path.is_file() && is_capture(&path) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        eprintln!("warning: no .pcap or .cap files in {}", input.display());
    }
    Ok(files)
}

/// Decodes, splits and labels every session under `input`; the horizon is
/// applied only when `truncate` is set.
pub fn load_sessions(input: &Path, opts: &CaptureOpts, truncate: bool) -> Result<Vec<LabeledSession>> {
    let rules = match &opts.labels {
        Some(path) => LabelRules::read_path(path).with_context(|| format!("reading labels {}", path.display()))?,
        None => LabelRules::default(),
    };
    let split = opts.split_config();
    let mut out = Vec::new();
    let mut unlabeled = 0usize;
    for path in capture_files(input)? {
        let (sessions, counters) = sessions_from_pcap(&path, split)?;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        eprintln!(
            "{}: {} packets decoded, {} skipped, {} sessions",
            path.display(),
            counters.decoded,
            counters.skipped(),
            sessions.len()
        );
        for session in sessions {
            let label = rules.label_for(&name, &session).unwrap_or_else(|| {
                unlabeled += 1;
                LabelTuple::UNLABELED
            });
            let session = match opts.horizon {
                Some(h) if truncate => truncate_session(&session, h),
                _ => session,
            };
            out.push(LabeledSession { session_id: dataset::session_id(&session), label, session });
        }
    }
    if unlabeled > 0 {
        eprintln!("warning: {unlabeled} sessions matched no label rule and are labeled {}", LabelTuple::UNLABELED);
    }
    Ok(out)
}

pub fn session_samples(sessions: &[LabeledSession], peaks: &PeakConfig) -> Vec<LabeledSample> {
    sessions
        .par_iter()
        .map(|s| LabeledSample {
            session_id: s.session_id.clone(),
            label: s.label,
            features: session_features(&s.session, FeatureSetId::Combined, peaks),
        })
        .collect()
}
