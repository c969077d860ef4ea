//! Slow, obviously-correct reference implementations shared by the
//! integration tests and the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::net::IpAddr;

use hostprint::learners::{DistanceMetric, Weighting};
use hostprint::packet::{DecodedPacket, TcpFlags, Timestamp};
use hostprint::session::{split_sessions_with_payload, Endpoint, Session, SplitConfig};
use hostprint::tls::{encode_client_hello, HelloTemplate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- knn

/// Sorts every training point by (distance, index) and votes among the first k.
pub fn knn_oracle(
    points: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    k: usize,
    weighting: Weighting,
    metric: DistanceMetric,
    x: &[f64],
) -> usize {
    let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (metric.distance(x, p), i)).collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let k = k.clamp(1, points.len());
    let nearest = &all[..k];
    let has_zero = nearest.iter().any(|n| n.0 == 0.0);

    let mut weight = vec![0.0; n_classes];
    let mut dsum = vec![0.0; n_classes];
    let mut count = vec![0usize; n_classes];
    for &(d, i) in nearest {
        let w = match weighting {
            Weighting::Uniform => 1.0,
            Weighting::DistanceInverse => {
                if has_zero && d != 0.0 {
                    continue;
                }
                if has_zero {
                    1.0
                } else {
                    1.0 / d
                }
            }
        };
        weight[labels[i]] += w;
        dsum[labels[i]] += d;
        count[labels[i]] += 1;
    }
    let candidates: Vec<usize> = (0..n_classes).filter(|&c| count[c] > 0).collect();
    let top = candidates.iter().map(|&c| weight[c]).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = candidates.into_iter().filter(|&c| weight[c] == top).collect();
    let closest = tied.iter().map(|&c| dsum[c] / count[c] as f64).fold(f64::INFINITY, f64::min);
    *tied.iter().find(|&&c| dsum[c] / count[c] as f64 == closest).unwrap()
}

// ---------------------------------------------------------------- peaks

/// Tries every way of cutting the sequence into contiguous runs and keeps
/// the one whose inner gaps are all within the threshold and whose cuts all
/// exceed it. Returns the runs (as index ranges) with at least `min` packets.
pub fn peaks_oracle(stamps_ns: &[i64], gap_ns: i64, min: usize) -> Vec<(usize, usize)> {
    let n = stamps_ns.len();
    if n == 0 {
        return Vec::new();
    }
    assert!(n <= 16, "brute force is exponential");
    let mut found = None;
    for mask in 0u32..(1 << (n - 1)) {
        // bit i set: cut between i and i+1
        let valid = (0..n - 1).all(|i| {
            let cut = mask & (1 << i) != 0;
            let gap = stamps_ns[i + 1] - stamps_ns[i];
            cut == (gap > gap_ns)
        });
        if valid {
            assert!(found.is_none(), "partition must be unique");
            found = Some(mask);
        }
    }
    let mask = found.expect("some partition is valid");
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 0..n {
        if i == n - 1 || mask & (1 << i) != 0 {
            if i + 1 - start >= min {
                runs.push((start, i + 1));
            }
            start = i + 1;
        }
    }
    runs
}

// ---------------------------------------------------------------- sessions

pub struct RandomSession {
    pub packets: Vec<(DecodedPacket, Vec<u8>)>,
    /// The ClientHello the client sent, if any.
    pub hello: Option<HelloTemplate>,
    pub client: Endpoint,
    pub server: Endpoint,
}

impl RandomSession {
    pub fn assemble(&self) -> Session {
        let mut sessions = split_sessions_with_payload(self.packets.iter().cloned(), SplitConfig::default());
        assert_eq!(sessions.len(), 1);
        sessions.pop().unwrap()
    }
}

fn gap_ns(rng: &mut ChaCha8Rng) -> i64 {
    match rng.gen_range(0..20) {
        0 => 0,
        1 | 2 => 1_000_000_000,
        3..=9 => rng.gen_range(1..50_000_000),
        10..=15 => rng.gen_range(200_000_000..999_999_999),
        _ => rng.gen_range(1_000_000_001..5_000_000_000),
    }
}

/// A single session on port 443 exercising handshakes, ClientHello
/// fragmentation, keepalives, timestamp ties and exact-threshold gaps.
pub fn random_session(rng: &mut ChaCha8Rng, max_packets: usize) -> RandomSession {
    let client: Endpoint = ("10.0.0.1".parse::<IpAddr>().unwrap(), rng.gen_range(1024..65000));
    let server: Endpoint = ("192.0.2.7".parse::<IpAddr>().unwrap(), 443);
    let mut t: i64 = rng.gen_range(0..1_000_000_000_000);
    let mut packets = Vec::new();
    let mut seq = [rng.gen::<u32>(), rng.gen::<u32>()];
    let mut acked = [None::<u32>, None::<u32>];

    let make =
        |from_client: bool, t: i64, flags: TcpFlags, payload_len: u32, seq: u32, ack: u32, rng: &mut ChaCha8Rng| {
            let (src, dst) = if from_client { (client, server) } else { (server, client) };
            DecodedPacket {
                timestamp: Timestamp(t),
                src_ip: src.0,
                dst_ip: dst.0,
                src_port: src.1,
                dst_port: dst.1,
                ttl: rng.gen_range(30..=128),
                total_ip_len: 40 + payload_len,
                payload_len,
                tcp_flags: flags,
                seq,
                ack,
                window: rng.gen(),
                opt_mss: None,
                opt_window_scale: None,
            }
        };

    if rng.gen_bool(0.85) {
        let mut syn = make(true, t, TcpFlags::SYN, 0, seq[0], 0, rng);
        syn.opt_mss = rng.gen_bool(0.8).then(|| rng.gen_range(536..=1460));
        syn.opt_window_scale = rng.gen_bool(0.8).then(|| rng.gen_range(0..=14));
        syn.total_ip_len = 40 + 4 * (u32::from(syn.opt_mss.is_some()) + u32::from(syn.opt_window_scale.is_some()));
        packets.push((syn, Vec::new()));
        seq[0] = seq[0].wrapping_add(1);
        t += gap_ns(rng);
        let syn_ack = make(false, t, TcpFlags::SYN | TcpFlags::ACK, 0, seq[1], seq[0], rng);
        acked[1] = Some(seq[0]);
        packets.push((syn_ack, Vec::new()));
        seq[1] = seq[1].wrapping_add(1);
    } else if rng.gen_bool(0.5) {
        // capture starts mid-stream with a server packet
        let p = make(false, t, TcpFlags::ACK, 100, seq[1], seq[0], rng);
        acked[1] = Some(seq[0]);
        seq[1] = seq[1].wrapping_add(100);
        packets.push((p, Vec::new()));
    }

    let hello = rng.gen_bool(0.8).then(|| HelloTemplate {
        record_version: 0x0301,
        client_version: [0x0301, 0x0302, 0x0303][rng.gen_range(0..3)],
        cipher_suites: (0..rng.gen_range(1..40)).map(|_| rng.gen()).collect(),
        compression_methods: rng.gen_range(1..3),
        session_id_len: [0, 32][rng.gen_range(0..2)],
        extensions: (0..rng.gen_range(0..20)).map(|i| (i, rng.gen_range(0..30))).collect(),
    });
    if let Some(h) = &hello {
        let bytes = encode_client_hello(h);
        let parts: Vec<Vec<u8>> = if rng.gen_bool(0.3) {
            let cut = rng.gen_range(1..bytes.len());
            vec![bytes[..cut].to_vec(), bytes[cut..].to_vec()]
        } else {
            vec![bytes]
        };
        for part in parts {
            t += gap_ns(rng);
            let len = part.len() as u32;
            let ack = acked[1].map_or(0, |_| seq[1]);
            let p = make(true, t, TcpFlags::ACK | TcpFlags::PSH, len, seq[0], ack, rng);
            acked[0] = Some(seq[1]);
            seq[0] = seq[0].wrapping_add(len);
            packets.push((p, part));
        }
    }

    let more = rng.gen_range(0..max_packets.saturating_sub(packets.len()).max(1));
    for _ in 0..more {
        t += gap_ns(rng);
        let from_client = rng.gen_bool(0.5);
        let side = usize::from(!from_client);
        let other = 1 - side;
        if rng.gen_bool(0.1) {
            // keepalive probe one below what the peer acknowledged
            if let Some(edge) = acked[other] {
                let len = rng.gen_range(0..=1);
                let p = make(from_client, t, TcpFlags::ACK, len, edge.wrapping_sub(1), seq[other], rng);
                packets.push((p, vec![0; len as usize]));
                continue;
            }
        }
        let len = if rng.gen_bool(0.3) { 0 } else { rng.gen_range(1..1460) };
        let flags = if rng.gen_bool(0.9) { TcpFlags::ACK } else { TcpFlags::ACK | TcpFlags::PSH };
        let p = make(from_client, t, flags, len, seq[side], seq[other], rng);
        acked[side] = Some(seq[other]);
        seq[side] = seq[side].wrapping_add(len);
        packets.push((p, Vec::new()));
    }
    if packets.is_empty() {
        packets.push((make(true, t, TcpFlags::ACK, 0, seq[0], 0, rng), Vec::new()));
    }
    RandomSession { packets, hello, client, server }
}

// ---------------------------------------------------------------- features

fn stats(xs: &[f64]) -> (f64, f64, f64, f64, f64) {
    // (min, max, mean, std, variance), zeros when empty
    if xs.is_empty() {
        return (0.0, 0.0, 0.0, 0.0, 0.0);
    }
    let mut min = xs[0];
    let mut max = xs[0];
    let mut total = 0.0;
    for &x in xs {
        if x < min {
            min = x;
        }
        if x > max {
            max = x;
        }
        total += x;
    }
    let mean = total / xs.len() as f64;
    let mut sq = 0.0;
    for &x in xs {
        sq += (x - mean) * (x - mean);
    }
    let var = sq / xs.len() as f64;
    (min, max, mean, var.sqrt(), var)
}

fn gaps_secs(ns: &[i64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..ns.len() {
        out.push((ns[i] - ns[i - 1]) as f64 / 1e9);
    }
    out
}

fn peak_values(ns: &[i64], sizes: &[f64], gap: i64, min: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let mut start = 0;
    let mut throughputs = Vec::new();
    let mut starts = Vec::new();
    let mut i = 0;
    while i < ns.len() {
        let last = i + 1 == ns.len() || ns[i + 1] - ns[i] > gap;
        if last {
            if i + 1 - start >= min {
                let mut bytes = 0.0;
                for s in &sizes[start..=i] {
                    bytes += s;
                }
                let duration = ((ns[i] - ns[start]) as f64 / 1e9).max(1e-6);
                throughputs.push(bytes / duration);
                starts.push(ns[start]);
            }
            start = i + 1;
        }
        i += 1;
    }
    (throughputs.len() as f64, throughputs, gaps_secs(&starts))
}

/// Every combined feature recomputed straight from the generator's packets,
/// by name.
pub fn feature_oracle(rs: &RandomSession, gap_secs: f64, min_peak: usize) -> BTreeMap<&'static str, f64> {
    let gap = (gap_secs * 1e9).round() as i64;
    let mut pkts: Vec<&DecodedPacket> = rs.packets.iter().map(|p| &p.0).collect();
    // initiator: first pure SYN in capture order, else the first sender
    let initiator = pkts
        .iter()
        .find(|p| p.tcp_flags.contains(TcpFlags::SYN) && !p.tcp_flags.contains(TcpFlags::ACK))
        .map(|p| (p.src_ip, p.src_port))
        .unwrap_or((pkts[0].src_ip, pkts[0].src_port));
    pkts.sort_by_key(|p| p.timestamp.0);
    let fwd: Vec<&DecodedPacket> = pkts.iter().copied().filter(|p| (p.src_ip, p.src_port) == initiator).collect();
    let bwd: Vec<&DecodedPacket> = pkts.iter().copied().filter(|p| (p.src_ip, p.src_port) != initiator).collect();

    let size = |v: &[&DecodedPacket]| v.iter().map(|p| f64::from(p.total_ip_len)).collect::<Vec<_>>();
    let ns = |v: &[&DecodedPacket]| v.iter().map(|p| p.timestamp.0).collect::<Vec<_>>();
    let (fs, bs, all) = (size(&fwd), size(&bwd), size(&pkts));
    let (f_iat, b_iat) = (stats(&gaps_secs(&ns(&fwd))), stats(&gaps_secs(&ns(&bwd))));
    let (f_sz, b_sz, a_sz) = (stats(&fs), stats(&bs), stats(&all));
    let ttl = stats(&fwd.iter().map(|p| f64::from(p.ttl)).collect::<Vec<_>>());

    let mut m = BTreeMap::new();
    m.insert("fwd_packets", fwd.len() as f64);
    m.insert("fwd_total_bytes", fs.iter().sum());
    m.insert("fwd_iat_min", f_iat.0);
    m.insert("fwd_iat_max", f_iat.1);
    m.insert("fwd_iat_mean", f_iat.2);
    m.insert("fwd_iat_std", f_iat.3);
    m.insert("fwd_pkt_size_mean", f_sz.2);
    m.insert("fwd_pkt_size_std", f_sz.3);
    m.insert("bwd_packets", bwd.len() as f64);
    m.insert("bwd_total_bytes", bs.iter().sum());
    m.insert("bwd_iat_min", b_iat.0);
    m.insert("bwd_iat_max", b_iat.1);
    m.insert("bwd_iat_mean", b_iat.2);
    m.insert("bwd_iat_std", b_iat.3);
    m.insert("bwd_pkt_size_mean", b_sz.2);
    m.insert("bwd_pkt_size_std", b_sz.3);
    m.insert("fwd_ttl_mean", ttl.2);
    m.insert("fwd_pkt_size_min", f_sz.0);
    m.insert("bwd_pkt_size_min", b_sz.0);
    m.insert("fwd_pkt_size_max", f_sz.1);
    m.insert("bwd_pkt_size_max", b_sz.1);
    m.insert("total_packets", pkts.len() as f64);
    m.insert("pkt_size_min", a_sz.0);
    m.insert("pkt_size_max", a_sz.1);
    m.insert("pkt_size_mean", a_sz.2);
    m.insert("pkt_size_variance", a_sz.4);

    let syn = rs.packets.iter().map(|p| &p.0).find(|p| {
        (p.src_ip, p.src_port) == initiator
            && p.tcp_flags.contains(TcpFlags::SYN)
            && !p.tcp_flags.contains(TcpFlags::ACK)
    });
    m.insert("tcp_init_window", syn.map_or(0.0, |p| f64::from(p.window)));
    m.insert("tcp_window_scale", syn.and_then(|p| p.opt_window_scale).map_or(0.0, f64::from));
    m.insert("tcp_mss", syn.and_then(|p| p.opt_mss).map_or(0.0, f64::from));

    let hello = rs.hello.as_ref().filter(|_| initiator == rs.client);
    m.insert("ssl_compression_methods", hello.map_or(0.0, |h| f64::from(h.compression_methods)));
    m.insert("ssl_extension_count", hello.map_or(0.0, |h| h.extensions.len() as f64));
    m.insert("ssl_cipher_methods", hello.map_or(0.0, |h| h.cipher_suites.len() as f64));
    m.insert("ssl_session_id_len", hello.map_or(0.0, |h| f64::from(h.session_id_len)));
    m.insert("ssl_version", hello.map_or(0.0, |h| f64::from(h.client_version)));

    for (prefix, v, sizes) in [("fwd", &fwd, &fs), ("bwd", &bwd, &bs)] {
        let (bursts, tput, iat) = peak_values(&ns(v), sizes, gap, min_peak);
        let t = stats(&tput);
        let g = stats(&iat);
        let key = |s: &str| -> &'static str { Box::leak(format!("{prefix}_{s}").into_boxed_str()) };
        m.insert(key("bursts"), bursts);
        m.insert(key("peak_tput_min"), t.0);
        m.insert(key("peak_tput_max"), t.1);
        m.insert(key("peak_tput_mean"), t.2);
        m.insert(key("peak_tput_std"), t.3);
        m.insert(key("peak_iat_min"), g.0);
        m.insert(key("peak_iat_max"), g.1);
        m.insert(key("peak_iat_mean"), g.2);
        m.insert(key("peak_iat_std"), g.3);
    }

    // keepalives: <= 1 payload byte, seq one below the highest ACK the
    // sender had received strictly earlier
    let mut keepalives = 0.0;
    for p in &pkts {
        if p.payload_len > 1 {
            continue;
        }
        let from_init = (p.src_ip, p.src_port) == initiator;
        let best = pkts
            .iter()
            .filter(|q| ((q.src_ip, q.src_port) == initiator) != from_init)
            .filter(|q| q.tcp_flags.contains(TcpFlags::ACK) && q.timestamp.0 < p.timestamp.0)
            .map(|q| q.ack)
            .max();
        if best.is_some_and(|a| p.seq == a.wrapping_sub(1)) {
            keepalives += 1.0;
        }
    }
    m.insert("keepalive_packets", keepalives);
    m
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
