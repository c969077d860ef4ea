//! Per-session features and the nine feature sets built from them.
//!
//! Two base vectors are extracted from every session: 26 common flow
//! statistics and 27 new TCP/TLS/burst features. Every other feature set is a
//! filter over their concatenation, so column order is always common columns
//! first, in dictionary order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::packet::{DecodedPacket, Timestamp};
use crate::session::{Direction, Session};
use crate::{Error, Result};

/// Guard for zero-length peaks in throughput.
pub const PEAK_DURATION_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSetId {
    Common,
    Peaks,
    New,
    CommonStats,
    Statistics,
    Combined,
    CombinedNoPeaks,
    CombinedNoSsl,
    CombinedNoTcp,
}

impl FeatureSetId {
    pub const ALL: [FeatureSetId; 9] = [
        FeatureSetId::Common,
        FeatureSetId::Peaks,
        FeatureSetId::New,
        FeatureSetId::CommonStats,
        FeatureSetId::Statistics,
        FeatureSetId::Combined,
        FeatureSetId::CombinedNoPeaks,
        FeatureSetId::CombinedNoSsl,
        FeatureSetId::CombinedNoTcp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSetId::Common => "common",
            FeatureSetId::Peaks => "peaks",
            FeatureSetId::New => "new",
            FeatureSetId::CommonStats => "common-stats",
            FeatureSetId::Statistics => "statistics",
            FeatureSetId::Combined => "combined",
            FeatureSetId::CombinedNoPeaks => "combined-no-peaks",
            FeatureSetId::CombinedNoSsl => "combined-no-ssl",
            FeatureSetId::CombinedNoTcp => "combined-no-tcp",
        }
    }

    fn admits(self, def: &FeatureDef, common: bool) -> bool {
        let peak = matches!(def.kind, Kind::PeakStat | Kind::Burst);
        match self {
            FeatureSetId::Common => common,
            FeatureSetId::New => !common,
            FeatureSetId::Peaks => peak,
            FeatureSetId::CommonStats => common && def.kind.is_statistic(),
            FeatureSetId::Statistics => def.kind.is_statistic(),
            FeatureSetId::Combined => true,
            FeatureSetId::CombinedNoPeaks => !peak,
            FeatureSetId::CombinedNoSsl => def.kind != Kind::Ssl,
            FeatureSetId::CombinedNoTcp => def.kind != Kind::Tcp,
        }
    }

    /// Positions of this set's columns within the combined vector.
    pub fn combined_indices(self) -> Vec<usize> {
        all_definitions().enumerate().filter(|(_, (def, common))| self.admits(def, *common)).map(|(i, _)| i).collect()
    }

    pub fn feature_names(self) -> Vec<&'static str> {
        all_definitions().filter(|(def, common)| self.admits(def, *common)).map(|(def, _)| def.name).collect()
    }

    pub fn len(self) -> usize {
        self.combined_indices().len()
    }

    /// Position of a named feature within this set.
    pub fn index_of(self, name: &str) -> Option<usize> {
        self.feature_names().iter().position(|n| *n == name)
    }

    /// The set whose column names are exactly `names`, in order.
    pub fn from_columns(names: &[&str]) -> Option<FeatureSetId> {
        FeatureSetId::ALL.into_iter().find(|set| set.feature_names() == names)
    }
}

impl fmt::Display for FeatureSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSetId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        FeatureSetId::ALL
            .into_iter()
            .find(|set| set.as_str() == key)
            .ok_or_else(|| format!("unknown feature set `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Count,
    Stat,
    Tcp,
    Ssl,
    PeakStat,
    Burst,
}

impl Kind {
    pub fn is_statistic(self) -> bool {
        matches!(self, Kind::Stat | Kind::PeakStat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureDef {
    pub name: &'static str,
    pub unit: &'static str,
    pub label: &'static str,
    pub kind: Kind,
}

const fn def(name: &'static str, unit: &'static str, label: &'static str, kind: Kind) -> FeatureDef {
    FeatureDef { name, unit, label, kind }
}

pub const COMMON_FEATURES: [FeatureDef; 26] = [
    def("fwd_packets", "packets", "# Forward packets", Kind::Count),
    def("fwd_total_bytes", "bytes", "# Forward total bytes", Kind::Count),
    def("fwd_iat_min", "s", "Min forward inter arrival time difference", Kind::Stat),
    def("fwd_iat_max", "s", "Max forward inter arrival time difference", Kind::Stat),
    def("fwd_iat_mean", "s", "Mean forward inter arrival time difference", Kind::Stat),
    def("fwd_iat_std", "s", "STD forward inter arrival time difference", Kind::Stat),
    def("fwd_pkt_size_mean", "bytes", "Mean forward packets", Kind::Stat),
    def("fwd_pkt_size_std", "bytes", "STD forward packets", Kind::Stat),
    def("bwd_packets", "packets", "# Backward packets", Kind::Count),
    def("bwd_total_bytes", "bytes", "# Backward total bytes", Kind::Count),
    def("bwd_iat_min", "s", "Min backward inter arrival time difference", Kind::Stat),
    def("bwd_iat_max", "s", "Max backward inter arrival time difference", Kind::Stat),
    def("bwd_iat_mean", "s", "Mean backward inter arrival time difference", Kind::Stat),
    def("bwd_iat_std", "s", "STD backward inter arrival time difference", Kind::Stat),
    def("bwd_pkt_size_mean", "bytes", "Mean backward packets", Kind::Stat),
    def("bwd_pkt_size_std", "bytes", "STD backward packets", Kind::Stat),
    def("fwd_ttl_mean", "hops", "Mean forward TTL value", Kind::Stat),
    def("fwd_pkt_size_min", "bytes", "Minimum forward packet", Kind::Stat),
    def("bwd_pkt_size_min", "bytes", "Minimum backward packet", Kind::Stat),
    def("fwd_pkt_size_max", "bytes", "Maximum forward packet", Kind::Stat),
    def("bwd_pkt_size_max", "bytes", "Maximum backward packet", Kind::Stat),
    def("total_packets", "packets", "# Total packets", Kind::Count),
    def("pkt_size_min", "bytes", "Minimum packet size", Kind::Stat),
    def("pkt_size_max", "bytes", "Maximum packet size", Kind::Stat),
    def("pkt_size_mean", "bytes", "Mean packet size", Kind::Stat),
    def("pkt_size_variance", "bytes^2", "Packet size variance", Kind::Stat),
];

pub const NEW_FEATURES: [FeatureDef; 27] = [
    def("tcp_init_window", "bytes", "TCP initial window size", Kind::Tcp),
    def("tcp_window_scale", "shift", "TCP window scaling factor", Kind::Tcp),
    def("ssl_compression_methods", "count", "# SSL compression methods", Kind::Ssl),
    def("ssl_extension_count", "count", "# SSL extension count", Kind::Ssl),
    def("ssl_cipher_methods", "count", "# SSL cipher methods", Kind::Ssl),
    def("ssl_session_id_len", "bytes", "SSL session ID len", Kind::Ssl),
    def("fwd_peak_tput_max", "bytes/s", "Forward peak MAX throughput", Kind::PeakStat),
    def("bwd_peak_tput_mean", "bytes/s", "Mean throughput of backward peaks", Kind::PeakStat),
    def("bwd_peak_tput_max", "bytes/s", "Max throughput of backward peaks", Kind::PeakStat),
    def("bwd_peak_tput_min", "bytes/s", "Backward min peak throughput", Kind::PeakStat),
    def("bwd_peak_tput_std", "bytes/s", "Backward STD peak throughput", Kind::PeakStat),
    def("fwd_bursts", "count", "Forward number of bursts", Kind::Burst),
    def("bwd_bursts", "count", "Backward number of bursts", Kind::Burst),
    def("fwd_peak_tput_min", "bytes/s", "Forward min peak throughput", Kind::PeakStat),
    def("fwd_peak_tput_mean", "bytes/s", "Mean throughput of forward peaks", Kind::PeakStat),
    def("fwd_peak_tput_std", "bytes/s", "Forward STD peak throughput", Kind::PeakStat),
    def("bwd_peak_iat_mean", "s", "Mean backward peak inter arrival time diff", Kind::PeakStat),
    def("bwd_peak_iat_min", "s", "Minimum backward peak inter arrival time diff", Kind::PeakStat),
    def("bwd_peak_iat_max", "s", "Maximum backward peak inter arrival time diff", Kind::PeakStat),
    def("bwd_peak_iat_std", "s", "STD backward peak inter arrival time diff", Kind::PeakStat),
    def("fwd_peak_iat_mean", "s", "Mean forward peak inter arrival time diff", Kind::PeakStat),
    def("fwd_peak_iat_min", "s", "Minimum forward peak inter arrival time diff", Kind::PeakStat),
    def("fwd_peak_iat_max", "s", "Maximum forward peak inter arrival time diff", Kind::PeakStat),
    def("fwd_peak_iat_std", "s", "STD forward peak inter arrival time diff", Kind::PeakStat),
    def("keepalive_packets", "packets", "# Keep alive packets", Kind::Tcp),
    def("tcp_mss", "bytes", "TCP Maximum Segment Size", Kind::Tcp),
    def("ssl_version", "code", "Forward SSL Version", Kind::Ssl),
];

fn all_definitions() -> impl Iterator<Item = (&'static FeatureDef, bool)> {
    COMMON_FEATURES.iter().map(|d| (d, true)).chain(NEW_FEATURES.iter().map(|d| (d, false)))
}

/// Markdown rendering of the feature dictionary, one row per combined column.
pub fn dictionary_markdown() -> String {
    let mut out = String::from(
        "# Feature dictionary (v1)\n\n\
         Columns of the `combined` set in order. Other sets keep this relative order.\n\n\
         | index | name | unit | group | description |\n\
         |---|---|---|---|---|\n",
    );
    for (i, (def, common)) in all_definitions().enumerate() {
        out.push_str(&format!(
            "| {i} | `{}` | {} | {} | {} |\n",
            def.name,
            def.unit,
            if common { "common" } else { "new" },
            def.label
        ));
    }
    out.push_str("\n## Feature sets\n\n| set | columns |\n|---|---|\n");
    for set in FeatureSetId::ALL {
        out.push_str(&format!("| `{set}` | {} |\n", set.len()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema: FeatureSetId,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn names(&self) -> Vec<&'static str> {
        self.schema.feature_names()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.schema.index_of(name).map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakConfig {
    pub silence_gap_secs: f64,
    pub min_peak_packets: usize,
}

impl Default for PeakConfig {
    fn default() -> Self {
        PeakConfig { silence_gap_secs: 1.0, min_peak_packets: 2 }
    }
}

/// A burst: a maximal run of packets with no silence longer than the gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Peak {
    pub start: Timestamp,
    pub end: Timestamp,
    pub packets: usize,
    pub byte_count: u64,
}

impl Peak {
    pub fn duration_secs(&self) -> f64 {
        self.end.secs_since(self.start)
    }

    pub fn throughput(&self) -> f64 {
        self.byte_count as f64 / self.duration_secs().max(PEAK_DURATION_EPSILON)
    }
}

/// Splits time-ordered `(timestamp, bytes)` points at every gap longer than
/// the silence threshold; runs shorter than `min_peak_packets` are dropped.
pub fn detect_peaks(points: &[(Timestamp, u32)], config: &PeakConfig) -> Vec<Peak> {
    let gap = Timestamp::from_secs_f64(config.silence_gap_secs).0;
    let mut peaks = Vec::new();
    let mut start = 0;
    for i in 1..=points.len() {
        let boundary = i == points.len() || points[i].0 .0 - points[i - 1].0 .0 > gap;
        if !boundary {
            continue;
        }
        let run = &points[start..i];
        if !run.is_empty() && run.len() >= config.min_peak_packets {
            peaks.push(Peak {
                start: run[0].0,
                end: run[run.len() - 1].0,
                packets: run.len(),
                byte_count: run.iter().map(|p| u64::from(p.1)).sum(),
            });
        }
        start = i;
    }
    peaks
}

/// min, max, mean, population std and variance; all zero for an empty input.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Summary {
    min: f64,
    max: f64,
    mean: f64,
    std: f64,
    variance: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Summary::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Summary {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: variance.sqrt(),
            variance,
        }
    }
}

fn inter_arrivals(stamps: &[Timestamp]) -> Vec<f64> {
    stamps.windows(2).map(|w| w[1].secs_since(w[0])).collect()
}

struct DirectionStats {
    count: f64,
    bytes: f64,
    iat: Summary,
    size: Summary,
}

fn direction_stats(packets: &[&DecodedPacket]) -> DirectionStats {
    let stamps: Vec<Timestamp> = packets.iter().map(|p| p.timestamp).collect();
    let sizes: Vec<f64> = packets.iter().map(|p| f64::from(p.total_ip_len)).collect();
    DirectionStats {
        count: packets.len() as f64,
        bytes: sizes.iter().sum(),
        iat: Summary::of(&inter_arrivals(&stamps)),
        size: Summary::of(&sizes),
    }
}

fn split_directions(session: &Session) -> (Vec<&DecodedPacket>, Vec<&DecodedPacket>) {
    (session.in_direction(Direction::Forward).collect(), session.in_direction(Direction::Backward).collect())
}

pub fn extract_common(session: &Session) -> FeatureVector {
    let (fwd, bwd) = split_directions(session);
    let f = direction_stats(&fwd);
    let b = direction_stats(&bwd);
    let all_sizes: Vec<f64> = session.packets.iter().map(|p| f64::from(p.packet.total_ip_len)).collect();
    let all = Summary::of(&all_sizes);
    let ttls: Vec<f64> = fwd.iter().map(|p| f64::from(p.ttl)).collect();
    let ttl = Summary::of(&ttls);

    let values = vec![
        f.count,
        f.bytes,
        f.iat.min,
        f.iat.max,
        f.iat.mean,
        f.iat.std,
        f.size.mean,
        f.size.std,
        b.count,
        b.bytes,
        b.iat.min,
        b.iat.max,
        b.iat.mean,
        b.iat.std,
        b.size.mean,
        b.size.std,
        ttl.mean,
        f.size.min,
        b.size.min,
        f.size.max,
        b.size.max,
        all_sizes.len() as f64,
        all.min,
        all.max,
        all.mean,
        all.variance,
    ];
    FeatureVector { schema: FeatureSetId::Common, values }
}

struct PeakStats {
    bursts: f64,
    throughput: Summary,
    start_gaps: Summary,
}

fn peak_stats(packets: &[&DecodedPacket], config: &PeakConfig) -> PeakStats {
    let points: Vec<(Timestamp, u32)> = packets.iter().map(|p| (p.timestamp, p.total_ip_len)).collect();
    let peaks = detect_peaks(&points, config);
    let throughputs: Vec<f64> = peaks.iter().map(Peak::throughput).collect();
    let starts: Vec<Timestamp> = peaks.iter().map(|p| p.start).collect();
    PeakStats {
        bursts: peaks.len() as f64,
        throughput: Summary::of(&throughputs),
        start_gaps: Summary::of(&inter_arrivals(&starts)),
    }
}

/// Packets of at most one payload byte whose sequence number sits one below
/// the highest ACK their sender had received. Only ACKs with a strictly
/// earlier timestamp count, so reordering simultaneous packets changes nothing.
pub fn count_keepalives(session: &Session) -> usize {
    let mut highest_ack: [Option<u32>; 2] = [None, None];
    let side = |d: Direction| usize::from(d == Direction::Backward);
    let mut count = 0;
    let mut i = 0;
    let packets = &session.packets;
    while i < packets.len() {
        let ts = packets[i].packet.timestamp;
        let mut j = i;
        while j < packets.len() && packets[j].packet.timestamp == ts {
            j += 1;
        }
        for sp in &packets[i..j] {
            // acks received by the sender were sent from the other side
            let received = highest_ack[1 - side(sp.direction)];
            if let Some(ack) = received {
                if sp.packet.payload_len <= 1 && sp.packet.seq == ack.wrapping_sub(1) {
                    count += 1;
                }
            }
        }
        for sp in &packets[i..j] {
            if sp.packet.tcp_flags.contains(crate::packet::TcpFlags::ACK) {
                let slot = &mut highest_ack[side(sp.direction)];
                *slot = Some(slot.map_or(sp.packet.ack, |a| a.max(sp.packet.ack)));
            }
        }
        i = j;
    }
    count
}

pub fn extract_new(session: &Session, config: &PeakConfig) -> FeatureVector {
    let client_syn =
        session.packets.iter().map(|sp| &sp.packet).find(|p| p.src() == session.client && p.tcp_flags.is_syn_only());
    let (window, scale, mss) = client_syn.map_or((0.0, 0.0, 0.0), |p| {
        (f64::from(p.window), f64::from(p.opt_window_scale.unwrap_or(0)), f64::from(p.opt_mss.unwrap_or(0)))
    });
    let hello = session.client_hello.as_ref().filter(|_| !session.tls_parse_failed);
    let (compression, extensions, ciphers, session_id, version) = hello.map_or((0.0, 0.0, 0.0, 0.0, 0.0), |h| {
        (
            h.compression_method_count as f64,
            h.extension_count as f64,
            h.cipher_suite_count as f64,
            h.session_id_len as f64,
            f64::from(h.tls_version),
        )
    });

    let (fwd, bwd) = split_directions(session);
    let f = peak_stats(&fwd, config);
    let b = peak_stats(&bwd, config);

    let values = vec![
        window,
        scale,
        compression,
        extensions,
        ciphers,
        session_id,
        f.throughput.max,
        b.throughput.mean,
        b.throughput.max,
        b.throughput.min,
        b.throughput.std,
        f.bursts,
        b.bursts,
        f.throughput.min,
        f.throughput.mean,
        f.throughput.std,
        b.start_gaps.mean,
        b.start_gaps.min,
        b.start_gaps.max,
        b.start_gaps.std,
        f.start_gaps.mean,
        f.start_gaps.min,
        f.start_gaps.max,
        f.start_gaps.std,
        count_keepalives(session) as f64,
        mss,
        version,
    ];
    FeatureVector { schema: FeatureSetId::New, values }
}

pub fn assemble_set(set: FeatureSetId, common: &FeatureVector, new: &FeatureVector) -> Result<FeatureVector> {
    if common.schema != FeatureSetId::Common {
        return Err(Error::SchemaMismatch { expected: FeatureSetId::Common, actual: common.schema });
    }
    if new.schema != FeatureSetId::New {
        return Err(Error::SchemaMismatch { expected: FeatureSetId::New, actual: new.schema });
    }
    let combined: Vec<f64> = common.values.iter().chain(&new.values).copied().collect();
    Ok(FeatureVector { schema: set, values: set.combined_indices().into_iter().map(|i| combined[i]).collect() })
}

/// Narrows a vector to a subset of its own columns.
pub fn project(v: &FeatureVector, target: FeatureSetId) -> Result<FeatureVector> {
    let source = v.schema.feature_names();
    let values = target
        .feature_names()
        .iter()
        .map(|name| source.iter().position(|s| s == name).map(|i| v.values[i]))
        .collect::<Option<Vec<f64>>>()
        .ok_or(Error::SchemaMismatch { expected: target, actual: v.schema })?;
    Ok(FeatureVector { schema: target, values })
}

pub fn session_features(session: &Session, set: FeatureSetId, config: &PeakConfig) -> FeatureVector {
    let common = extract_common(session);
    let new = extract_new(session, config);
    assemble_set(set, &common, &new).expect("schemas produced by the extractors")
}
