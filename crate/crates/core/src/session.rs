//! Bidirectional sessions keyed on the TCP 5-tuple.
//!
//! One 5-tuple is one session for the whole capture; there is no idle
//! timeout. The initiator is the source of the first connection-opening SYN
//! seen on the tuple, or the source of the first packet when the capture
//! starts mid-connection.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::net::IpAddr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capture;
use crate::packet::{decode_with_payload, DecodeCounters, DecodedPacket, Timestamp};
use crate::tls::{self, ClientHelloSummary};
use crate::{Error, Result};

pub type Endpoint = (IpAddr, u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// Which side of the connection counts as the forward flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DirectionConvention {
    /// Forward = initiator to responder (client to server).
    #[default]
    InitiatorForward,
    /// Forward = responder to initiator.
    ResponderForward,
}

/// TCP 5-tuple in canonical orientation, initiator first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub ip_a: IpAddr,
    pub port_a: u16,
    pub ip_b: IpAddr,
    pub port_b: u16,
}

impl FlowKey {
    pub fn initiator(&self) -> Endpoint {
        (self.ip_a, self.port_a)
    }

    pub fn responder(&self) -> Endpoint {
        (self.ip_b, self.port_b)
    }

    /// True when `packet` travels along this key in either orientation.
    pub fn matches(&self, packet: &DecodedPacket) -> bool {
        let (s, d) = (packet.src(), packet.dst());
        (s == self.initiator() && d == self.responder()) || (s == self.responder() && d == self.initiator())
    }

    pub fn has_port(&self, port: u16) -> bool {
        self.port_a == port || self.port_b == port
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPacket {
    pub packet: DecodedPacket,
    pub direction: Direction,
}

/// Initiator payload bytes kept for the ClientHello scan.
#[derive(Debug, Clone, PartialEq, Eq)]
struct HelloChunk {
    timestamp: Timestamp,
    bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub key: FlowKey,
    /// The initiator endpoint.
    pub client: Endpoint,
    /// Time ordered, ties in capture order.
    pub packets: Vec<SessionPacket>,
    pub first_ts: Timestamp,
    pub last_ts: Timestamp,
    pub client_hello: Option<ClientHelloSummary>,
    /// A ClientHello was present but its length fields were inconsistent.
    pub tls_parse_failed: bool,
    hello_chunks: Vec<HelloChunk>,
}

impl Session {
    pub fn duration_secs(&self) -> f64 {
        self.last_ts.secs_since(self.first_ts)
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn in_direction(&self, direction: Direction) -> impl Iterator<Item = &DecodedPacket> {
        self.packets.iter().filter(move |p| p.direction == direction).map(|p| &p.packet)
    }

    /// Initiator payload prefix, as scanned for the ClientHello.
    pub fn hello_bytes(&self) -> Vec<u8> {
        self.hello_chunks.iter().flat_map(|c| c.bytes.iter().copied()).collect()
    }

    /// Replaces the ClientHello summary, e.g. for perturbation experiments.
    pub fn set_client_hello(&mut self, hello: Option<ClientHelloSummary>) {
        self.client_hello = hello;
        self.tls_parse_failed = false;
    }

    fn rescan_hello(&mut self) {
        let (hello, failed) = scan_hello(&self.hello_bytes());
        self.client_hello = hello;
        self.tls_parse_failed = failed;
    }
}

fn scan_hello(bytes: &[u8]) -> (Option<ClientHelloSummary>, bool) {
    match tls::parse_client_hello(bytes) {
        Ok(hello) => (hello, false),
        Err(_) => (None, true),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitConfig {
    /// Keep only sessions with either port equal to this; `None` keeps all.
    pub port_filter: Option<u16>,
    pub convention: DirectionConvention,
    pub hello_scan_limit: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            port_filter: Some(443),
            convention: DirectionConvention::InitiatorForward,
            hello_scan_limit: tls::DEFAULT_SCAN_LIMIT,
        }
    }
}

struct Pending {
    /// Source of the first packet seen on the tuple.
    first_src: Endpoint,
    other: Endpoint,
    syn_src: Option<Endpoint>,
    packets: Vec<DecodedPacket>,
    /// Payload chunks per endpoint, `[first_src, other]`, each capped at the scan limit.
    chunks: [Vec<HelloChunk>; 2],
    chunk_bytes: [usize; 2],
}

/// Incremental session assembly for one capture, fed in file order.
pub struct SessionSplitter {
    config: SplitConfig,
    index: HashMap<(Endpoint, Endpoint), usize>,
    pending: Vec<Pending>,
}

fn canonical(a: Endpoint, b: Endpoint) -> (Endpoint, Endpoint) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SessionSplitter {
    pub fn new(config: SplitConfig) -> Self {
        SessionSplitter { config, index: HashMap::new(), pending: Vec::new() }
    }

    pub fn push(&mut self, packet: DecodedPacket, payload: &[u8]) {
        if let Some(port) = self.config.port_filter {
            if packet.src_port != port && packet.dst_port != port {
                return;
            }
        }
        let (src, dst) = (packet.src(), packet.dst());
        let next = self.pending.len();
        let slot = *self.index.entry(canonical(src, dst)).or_insert(next);
        if slot == next {
            self.pending.push(Pending {
                first_src: src,
                other: dst,
                syn_src: None,
                packets: Vec::new(),
                chunks: [Vec::new(), Vec::new()],
                chunk_bytes: [0, 0],
            });
        }
        let p = &mut self.pending[slot];
        if p.syn_src.is_none() && packet.tcp_flags.is_syn_only() {
            p.syn_src = Some(src);
        }
        let side = usize::from(src != p.first_src);
        let room = self.config.hello_scan_limit.saturating_sub(p.chunk_bytes[side]);
        if room > 0 && !payload.is_empty() {
            let take = payload.len().min(room);
            p.chunks[side].push(HelloChunk { timestamp: packet.timestamp, bytes: payload[..take].to_vec() });
            p.chunk_bytes[side] += take;
        }
        p.packets.push(packet);
    }

    /// Sessions in order of their first packet.
    pub fn finish(self) -> Vec<Session> {
        let convention = self.config.convention;
        self.pending.into_iter().map(|p| finish_one(p, convention)).collect()
    }
}

fn finish_one(p: Pending, convention: DirectionConvention) -> Session {
    let initiator = p.syn_src.unwrap_or(p.first_src);
    let responder = if initiator == p.first_src { p.other } else { p.first_src };
    let forward_src = match convention {
        DirectionConvention::InitiatorForward => initiator,
        DirectionConvention::ResponderForward => responder,
    };
    let mut packets: Vec<SessionPacket> = p
        .packets
        .into_iter()
        .map(|packet| {
            let direction = if packet.src() == forward_src { Direction::Forward } else { Direction::Backward };
            SessionPacket { packet, direction }
        })
        .collect();
    packets.sort_by_key(|sp| sp.packet.timestamp);

    let [first_chunks, other_chunks] = p.chunks;
    let mut hello_chunks = if initiator == p.first_src { first_chunks } else { other_chunks };
    hello_chunks.sort_by_key(|c| c.timestamp);

    let mut session = Session {
        key: FlowKey { ip_a: initiator.0, port_a: initiator.1, ip_b: responder.0, port_b: responder.1 },
        client: initiator,
        first_ts: packets.first().map(|p| p.packet.timestamp).unwrap_or_default(),
        last_ts: packets.last().map(|p| p.packet.timestamp).unwrap_or_default(),
        packets,
        client_hello: None,
        tls_parse_failed: false,
        hello_chunks,
    };
    session.rescan_hello();
    session
}

/// Header-only splitting; without payload bytes no ClientHello is found.
pub fn split_sessions(packets: impl IntoIterator<Item = DecodedPacket>, config: SplitConfig) -> Vec<Session> {
    let mut splitter = SessionSplitter::new(config);
    for packet in packets {
        splitter.push(packet, &[]);
    }
    splitter.finish()
}

/// As [`split_sessions`], with each packet's TCP payload.
pub fn split_sessions_with_payload(
    packets: impl IntoIterator<Item = (DecodedPacket, Vec<u8>)>,
    config: SplitConfig,
) -> Vec<Session> {
    let mut splitter = SessionSplitter::new(config);
    for (packet, payload) in packets {
        splitter.push(packet, &payload);
    }
    splitter.finish()
}

/// Decodes a pcap file and splits it into sessions.
pub fn sessions_from_pcap(path: &Path, config: SplitConfig) -> Result<(Vec<Session>, DecodeCounters)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut splitter = SessionSplitter::new(config);
    let mut counters = DecodeCounters::default();
    capture::for_each_frame(BufReader::new(file), path, |frame| match decode_with_payload(&frame) {
        Ok((packet, payload)) => {
            counters.record(Ok(()));
            splitter.push(packet, payload);
        }
        Err(skip) => counters.record(Err(skip)),
    })?;
    Ok((splitter.finish(), counters))
}

/// Keeps packets with `timestamp <= first_ts + horizon` and rescans the
/// ClientHello from what remains.
pub fn truncate_session(session: &Session, horizon_secs: f64) -> Session {
    let cutoff = Timestamp(session.first_ts.0 + Timestamp::from_secs_f64(horizon_secs).0);
    let mut out = session.clone();
    out.packets.retain(|p| p.packet.timestamp <= cutoff);
    out.hello_chunks.retain(|c| c.timestamp <= cutoff);
    out.last_ts = out.packets.last().map(|p| p.packet.timestamp).unwrap_or(out.first_ts);
    out.rescan_hello();
    out
}

/// Collapses sessions into one tunnel-like session.
///
/// Packets are merged by timestamp (ties keep input order) and rewritten onto
/// the tunnel 5-tuple; each packet keeps its original direction. The
/// ClientHello is taken from the earliest-starting input session.
pub fn aggregate_vpn(sessions: &[Session], tunnel: Endpoint) -> Result<Session> {
    let earliest = sessions.iter().min_by_key(|s| s.first_ts).ok_or(Error::NothingToAggregate)?;
    let client = earliest.client;
    let mut packets: Vec<SessionPacket> = sessions
        .iter()
        .flat_map(|s| s.packets.iter().cloned())
        .map(|mut sp| {
            let (src, dst) = match sp.direction {
                Direction::Forward => (client, tunnel),
                Direction::Backward => (tunnel, client),
            };
            (sp.packet.src_ip, sp.packet.src_port) = src;
            (sp.packet.dst_ip, sp.packet.dst_port) = dst;
            sp
        })
        .collect();
    packets.sort_by_key(|sp| sp.packet.timestamp);

    Ok(Session {
        key: FlowKey { ip_a: client.0, port_a: client.1, ip_b: tunnel.0, port_b: tunnel.1 },
        client,
        first_ts: packets.first().map(|p| p.packet.timestamp).unwrap_or_default(),
        last_ts: packets.last().map(|p| p.packet.timestamp).unwrap_or_default(),
        packets,
        client_hello: earliest.client_hello.clone(),
        tls_parse_failed: earliest.tls_parse_failed,
        hello_chunks: earliest.hello_chunks.clone(),
    })
}
