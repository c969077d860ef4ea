//! Labeled samples: label taxonomy, CSV persistence, scaling, splitting,
//! subsampling and test-time perturbation.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureSetId, FeatureVector};
use crate::session::{Endpoint, Session};
use crate::{Error, Result};

fn normalize(s: &str) -> String {
    s.chars().filter(|c| !matches!(c, '-' | '_' | ' ')).map(|c| c.to_ascii_lowercase()).collect()
}

macro_rules! label_enum {
    ($name:ident { $($variant:ident => $display:literal $(| $alias:literal)*),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $display),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let key = normalize(s);
                $(
                    if key == normalize($display) $(|| key == normalize($alias))* {
                        return Ok($name::$variant);
                    }
                )+
                Err(Error::InvalidLabel(s.to_string()))
            }
        }
    };
}

label_enum!(Os {
    Windows => "Windows",
    Ubuntu => "Ubuntu" | "Linux",
    Osx => "OSX" | "macOS",
});

label_enum!(Browser {
    Chrome => "Chrome",
    Firefox => "Firefox",
    IExplorer => "IExplorer" | "Internet-Explorer" | "IE",
    Safari => "Safari",
    NonBrowser => "NonBrowser",
});

label_enum!(Application {
    Twitter => "Twitter",
    GoogleServices => "GoogleServices" | "Google-Background",
    Unidentified => "Unidentified",
    MicrosoftServices => "MicrosoftServices" | "Microsoft-Background",
    Youtube => "Youtube",
    Facebook => "Facebook",
    Teamviewer => "Teamviewer",
    Dropbox => "Dropbox",
    Skype => "Skype",
});

/// ⟨OS, Browser, Application⟩. Renders as `Windows,IExplorer,Twitter`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelTuple {
    pub os: Os,
    pub browser: Browser,
    pub application: Application,
}

impl LabelTuple {
    pub const fn new(os: Os, browser: Browser, application: Application) -> Self {
        LabelTuple { os, browser, application }
    }

    /// Label given to sessions nothing else claims.
    pub const UNLABELED: LabelTuple = LabelTuple::new(Os::Windows, Browser::NonBrowser, Application::Unidentified);
}

impl fmt::Display for LabelTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.os, self.browser, self.application)
    }
}

impl FromStr for LabelTuple {
    type Err = Error;

    /// Accepts comma, tab or whitespace separated parts.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
        let [os, browser, application] = parts[..] else {
            return Err(Error::InvalidLabel(s.to_string()));
        };
        Ok(LabelTuple { os: os.parse()?, browser: browser.parse()?, application: application.parse()? })
    }
}

/// What a classifier is asked to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Tuple,
    Os,
    Browser,
    OsBrowser,
    Application,
}

impl Target {
    pub fn project(self, label: &LabelTuple) -> String {
        match self {
            Target::Tuple => label.to_string(),
            Target::Os => label.os.to_string(),
            Target::Browser => label.browser.to_string(),
            Target::OsBrowser => format!("{},{}", label.os, label.browser),
            Target::Application => label.application.to_string(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Tuple => "tuple",
            Target::Os => "os",
            Target::Browser => "browser",
            Target::OsBrowser => "os-browser",
            Target::Application => "application",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match normalize(s).as_str() {
            "tuple" => Ok(Target::Tuple),
            "os" => Ok(Target::Os),
            "browser" => Ok(Target::Browser),
            "osbrowser" => Ok(Target::OsBrowser),
            "application" | "app" => Ok(Target::Application),
            _ => Err(format!("unknown target `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub session_id: String,
    pub label: LabelTuple,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSetId,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(schema: FeatureSetId, samples: Vec<LabeledSample>) -> Result<Self> {
        if let Some(bad) = samples.iter().find(|s| s.features.schema != schema) {
            return Err(Error::SchemaMismatch { expected: schema, actual: bad.features.schema });
        }
        Ok(Dataset { schema, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A session with its ground truth, before feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSession {
    pub session_id: String,
    pub label: LabelTuple,
    pub session: Session,
}

/// Stable identifier `client_ip:port-server_ip:port`.
pub fn session_id(session: &Session) -> String {
    let fmt_ep = |(ip, port): Endpoint| match ip {
        std::net::IpAddr::V4(v4) => format!("{v4}:{port}"),
        std::net::IpAddr::V6(v6) => format!("[{v6}]:{port}"),
    };
    format!("{}-{}", fmt_ep(session.key.initiator()), fmt_ep(session.key.responder()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    /// Capture file name (without directories).
    File,
    /// Initiator address, optionally with port.
    Client,
    /// Responder address, optionally with port.
    Server,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum HostPattern {
    Ip(std::net::IpAddr),
    Endpoint(std::net::SocketAddr),
}

impl HostPattern {
    fn matches(&self, ep: Endpoint) -> bool {
        match *self {
            HostPattern::Ip(ip) => ep.0 == ip,
            HostPattern::Endpoint(sa) => ep == (sa.ip(), sa.port()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRule {
    pub kind: RuleKind,
    pub pattern: String,
    pub label: LabelTuple,
    host: Option<HostPattern>,
}

/// Ordered labelling rules; the first matching rule wins.
///
/// CSV with header `kind,pattern,os,browser,application`, where `kind` is
/// `file`, `client` or `server`. Lines starting with `#` are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelRules {
    pub rules: Vec<LabelRule>,
}

impl LabelRules {
    pub fn parse<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let csv_err = |e: csv::Error| Error::Csv { line: e.position().map_or(0, |p| p.line()), message: e.to_string() };
        let headers = rdr.headers().map_err(csv_err)?.clone();
        let expected = ["kind", "pattern", "os", "browser", "application"];
        if headers.iter().ne(expected) {
            return Err(Error::Csv {
                line: 1,
                message: format!("label rules header must be `{}`", expected.join(",")),
            });
        }
        let mut rules = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |message: String| Error::Csv { line, message };
            let kind = match normalize(&record[0]).as_str() {
                "file" => RuleKind::File,
                "client" => RuleKind::Client,
                "server" => RuleKind::Server,
                other => return Err(bad(format!("unknown rule kind `{other}`"))),
            };
            let pattern = record[1].to_string();
            let host = match kind {
                RuleKind::File => None,
                _ => Some(if let Ok(sa) = pattern.parse() {
                    HostPattern::Endpoint(sa)
                } else if let Ok(ip) = pattern.parse() {
                    HostPattern::Ip(ip)
                } else {
                    return Err(bad(format!("`{pattern}` is not an address")));
                }),
            };
            let label = LabelTuple {
                os: record[2].parse().map_err(|e: Error| bad(e.to_string()))?,
                browser: record[3].parse().map_err(|e: Error| bad(e.to_string()))?,
                application: record[4].parse().map_err(|e: Error| bad(e.to_string()))?,
            };
            rules.push(LabelRule { kind, pattern, label, host });
        }
        Ok(LabelRules { rules })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file))
    }

    /// Label for `session` found in capture `file_name`, if any rule matches.
    pub fn label_for(&self, file_name: &str, session: &Session) -> Option<LabelTuple> {
        self.rules
            .iter()
            .find(|r| match (&r.kind, &r.host) {
                (RuleKind::File, _) => r.pattern == file_name,
                (RuleKind::Client, Some(h)) => h.matches(session.key.initiator()),
                (RuleKind::Server, Some(h)) => h.matches(session.key.responder()),
                _ => false,
            })
            .map(|r| r.label)
    }

    /// Serializes `(kind, pattern, label)` rows in the format [`parse`](Self::parse) reads.
    pub fn write_rows<W: Write>(writer: W, rows: &[(RuleKind, String, LabelTuple)]) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let csv_err = |e: csv::Error| Error::Csv { line: 0, message: e.to_string() };
        out.write_record(["kind", "pattern", "os", "browser", "application"]).map_err(csv_err)?;
        for (kind, pattern, label) in rows {
            let kind = match kind {
                RuleKind::File => "file",
                RuleKind::Client => "client",
                RuleKind::Server => "server",
            };
            let (os, browser, app) = (label.os.to_string(), label.browser.to_string(), label.application.to_string());
            out.write_record([kind, pattern.as_str(), &os, &browser, &app]).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::Csv { line: 0, message: e.to_string() })
    }
}

const LABEL_COLUMNS: [&str; 4] = ["session_id", "os", "browser", "application"];

pub fn write_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let to_err = |e: csv::Error| Error::Csv { line: 0, message: e.to_string() };
    let mut header: Vec<&str> = LABEL_COLUMNS.to_vec();
    header.extend(data.schema.feature_names());
    out.write_record(&header).map_err(to_err)?;
    for s in &data.samples {
        let mut row = vec![
            s.session_id.clone(),
            s.label.os.to_string(),
            s.label.browser.to_string(),
            s.label.application.to_string(),
        ];
        row.extend(s.features.values.iter().map(|v| v.to_string()));
        out.write_record(&row).map_err(to_err)?;
    }
    out.flush().map_err(|e| Error::Csv { line: 0, message: e.to_string() })
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| Error::Csv { line: 1, message: e.to_string() })?,
        None => return Err(Error::Csv { line: 1, message: "missing header row".into() }),
    };
    let columns: Vec<&str> = header.iter().map(str::trim).collect();
    for (i, expected) in LABEL_COLUMNS.iter().enumerate() {
        if columns.get(i) != Some(expected) {
            return Err(Error::Csv { line: 1, message: format!("column {} must be `{expected}`", i + 1) });
        }
    }
    let feature_columns = &columns[LABEL_COLUMNS.len()..];
    let known = FeatureSetId::Combined.feature_names();
    if let Some(unknown) = feature_columns.iter().find(|c| !known.contains(c)) {
        return Err(Error::UnknownColumn(unknown.to_string()));
    }
    let schema = FeatureSetId::from_columns(feature_columns)
        .ok_or_else(|| Error::Csv { line: 1, message: "feature columns do not match any feature set".into() })?;

    let mut samples = Vec::new();
    for record in records {
        let record =
            record.map_err(|e| Error::Csv { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = record.position().map_or(0, |p| p.line());
        let csv_err = |message: String| Error::Csv { line, message };
        if record.len() < columns.len() {
            return Err(csv_err(format!("missing value for column `{}`", columns[record.len()])));
        }
        if record.len() > columns.len() {
            return Err(csv_err(format!("{} fields but the header has {}", record.len(), columns.len())));
        }
        let label = LabelTuple {
            os: record[1].trim().parse().map_err(|e: Error| csv_err(e.to_string()))?,
            browser: record[2].trim().parse().map_err(|e: Error| csv_err(e.to_string()))?,
            application: record[3].trim().parse().map_err(|e: Error| csv_err(e.to_string()))?,
        };
        let values = feature_columns
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let raw = record[LABEL_COLUMNS.len() + i].trim();
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(csv_err(format!("column `{name}`: not a finite number: `{raw}`"))),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        samples.push(LabeledSample {
            session_id: record[0].to_string(),
            label,
            features: FeatureVector { schema, values },
        });
    }
    Ok(Dataset { schema, samples })
}

pub fn read_csv_path(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(file))
}

pub fn write_csv_path(path: &Path, data: &Dataset) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(BufWriter::new(file), data)
}

/// Per-feature minimum and maximum seen in training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub schema: FeatureSetId,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingParams {
    /// Fits on raw rows. `rows` must be non-empty and rectangular.
    pub fn fit_rows(schema: FeatureSetId, rows: &[&[f64]]) -> Self {
        let width = rows.first().map_or(0, |r| r.len());
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for row in rows {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        ScalingParams { schema, min, max }
    }

    /// `(x - min) / (max - min)`; constant columns map to 0. No clamping.
    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }
}

pub fn scale_fit(train: &[LabeledSample]) -> ScalingParams {
    let schema = train.first().map_or(FeatureSetId::Combined, |s| s.features.schema);
    let rows: Vec<&[f64]> = train.iter().map(|s| s.features.values.as_slice()).collect();
    ScalingParams::fit_rows(schema, &rows)
}

pub fn scale_apply(params: &ScalingParams, v: &FeatureVector) -> Result<FeatureVector> {
    if v.schema != params.schema {
        return Err(Error::SchemaMismatch { expected: params.schema, actual: v.schema });
    }
    Ok(FeatureVector { schema: v.schema, values: params.transform(&v.values) })
}

/// Training share of a repeated 70/30 split: ⌈0.7·n⌉.
pub fn train_size(n: usize) -> usize {
    (7 * n).div_ceil(10)
}

/// Stratified 70/30 split over `keys` (one stratum per distinct key).
///
/// Returns sample indices. Every stratum with at least two members lands in
/// training at least once, and the training side has exactly ⌈0.7·n⌉ items.
pub fn split_indices<K: Ord + Clone>(keys: &[K], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        strata.entry(k.clone()).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = strata.into_values().collect();
    for g in &mut groups {
        g.shuffle(&mut rng);
    }

    let target = train_size(keys.len());
    let floor_of = |n: usize| if n >= 2 { 1 } else { 0 };
    let mut quota: Vec<usize> = groups.iter().map(|g| ((7 * g.len()) / 10).max(floor_of(g.len()))).collect();
    // largest fractional remainder first, then larger strata
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse((7 * groups[c].len()) % 10), std::cmp::Reverse(groups[c].len()), c));

    let mut total: usize = quota.iter().sum();
    while total < target {
        let mut moved = false;
        for &c in &order {
            if total < target && quota[c] < groups[c].len() {
                quota[c] += 1;
                total += 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    while total > target {
        let mut moved = false;
        for &c in order.iter().rev() {
            if total > target && quota[c] > floor_of(groups[c].len()) {
                quota[c] -= 1;
                total -= 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }

    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(keys.len() - target);
    for (g, &q) in groups.iter().zip(&quota) {
        train.extend_from_slice(&g[..q]);
        test.extend_from_slice(&g[q..]);
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    (train, test)
}

/// Seeded stratified 70/30 split by label tuple.
pub fn split_70_30(data: &[LabeledSample], seed: u64) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if data.len() < 10 {
        return Err(Error::InvalidExperiment(format!("a 70/30 split needs at least 10 samples, got {}", data.len())));
    }
    let keys: Vec<LabelTuple> = data.iter().map(|s| s.label).collect();
    let (train, test) = split_indices(&keys, seed);
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| data[i].clone()).collect();
    Ok((pick(train), pick(test)))
}

/// Indices of a stratified size-`n` subset of `keys`.
///
/// Every stratum receives one member before any receives a second (random
/// strata are chosen when `n` is below the stratum count); the remainder is
/// allotted proportionally by largest remainder.
pub fn subsample_indices<K: Ord + Clone>(keys: &[K], n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 || n > keys.len() {
        return Err(Error::SubsampleOutOfRange { requested: n, available: keys.len() });
    }
    if n == keys.len() {
        return Ok((0..n).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        strata.entry(k.clone()).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = strata.into_values().collect();
    for g in &mut groups {
        g.shuffle(&mut rng);
    }

    let mut quota = vec![0usize; groups.len()];
    if n < groups.len() {
        let mut chosen: Vec<usize> = (0..groups.len()).collect();
        chosen.shuffle(&mut rng);
        for &c in &chosen[..n] {
            quota[c] = 1;
        }
    } else {
        quota.iter_mut().for_each(|q| *q = 1);
        let extra = n - groups.len();
        let spare: Vec<usize> = groups.iter().map(|g| g.len() - 1).collect();
        let spare_total: usize = spare.iter().sum();
        let mut remainders = Vec::with_capacity(groups.len());
        let mut given = 0;
        for (c, &s) in spare.iter().enumerate() {
            let share = extra * s;
            quota[c] += share / spare_total;
            given += share / spare_total;
            remainders.push((std::cmp::Reverse(share % spare_total), c));
        }
        remainders.sort();
        while given < extra {
            let before = given;
            for &(_, c) in &remainders {
                if given < extra && quota[c] < groups[c].len() {
                    quota[c] += 1;
                    given += 1;
                }
            }
            if given == before {
                break;
            }
        }
    }
    let mut picked: Vec<usize> = groups.iter().zip(&quota).flat_map(|(g, &q)| g[..q].iter().copied()).collect();
    picked.shuffle(&mut rng);
    Ok(picked)
}

pub fn subsample_train(train: &[LabeledSample], n: usize, seed: u64) -> Result<Vec<LabeledSample>> {
    let keys: Vec<LabelTuple> = train.iter().map(|s| s.label).collect();
    Ok(subsample_indices(&keys, n, seed)?.into_iter().map(|i| train[i].clone()).collect())
}

/// Test-time change to the advertised TLS parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CipherPerturbation {
    pub delta_suites: i64,
    pub delta_extensions: i64,
    pub new_version: Option<u16>,
}

impl CipherPerturbation {
    pub fn is_identity(&self) -> bool {
        self.delta_suites == 0 && self.delta_extensions == 0 && self.new_version.is_none()
    }
}

pub fn perturb_cipher(v: &FeatureVector, p: &CipherPerturbation) -> Result<FeatureVector> {
    let idx = |name: &str| v.schema.index_of(name).ok_or(Error::MissingSslFeatures(v.schema));
    let suites = idx("ssl_cipher_methods")?;
    let extensions = idx("ssl_extension_count")?;
    let version = idx("ssl_version")?;
    let mut out = v.clone();
    let shift = |x: f64, d: i64| (x + d as f64).max(0.0);
    out.values[suites] = shift(out.values[suites], p.delta_suites);
    out.values[extensions] = shift(out.values[extensions], p.delta_extensions);
    if let Some(code) = p.new_version {
        out.values[version] = f64::from(code);
    }
    Ok(out)
}

/// `(class, count, share)` sorted by count descending, then name.
pub fn label_statistics(samples: &[LabeledSample], target: Target) -> Vec<(String, usize, f64)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for s in samples {
        *counts.entry(target.project(&s.label)).or_default() += 1;
    }
    let total = samples.len().max(1) as f64;
    let mut rows: Vec<(String, usize, f64)> = counts.into_iter().map(|(k, c)| (k, c, c as f64 / total)).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows
}

/// The modal class and the accuracy of always predicting it.
pub fn majority_baseline(samples: &[LabeledSample], target: Target) -> Option<(String, f64)> {
    label_statistics(samples, target).into_iter().next().map(|(k, _, share)| (k, share))
}
