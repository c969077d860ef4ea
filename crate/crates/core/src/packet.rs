//! Link, IP and TCP header decoding.
//!
//! Decoding is stateless: [`decode_frame`] maps bytes to a [`DecodedPacket`] or
//! to nothing. Frames that are not IPv4/IPv6 carrying TCP, truncated frames and
//! non-first IP fragments are skipped; [`DecodeCounters`] tallies why.

use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86DD;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_QINQ: u16 = 0x88A8;
const IPPROTO_TCP: u8 = 6;

const ETHERNET_HEADER_LEN: usize = 14;
const IPV4_MIN_HEADER_LEN: usize = 20;
const IPV6_HEADER_LEN: usize = 40;
const TCP_MIN_HEADER_LEN: usize = 20;

/// Capture time in nanoseconds since the epoch.
///
/// Integer time keeps inter-arrival differences exact, so shifting a whole
/// capture never changes a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const NANOS_PER_SEC: i64 = 1_000_000_000;

    pub fn from_secs_f64(secs: f64) -> Self {
        Timestamp((secs * Self::NANOS_PER_SEC as f64).round() as i64)
    }

    pub fn from_micros(micros: i64) -> Self {
        Timestamp(micros * 1_000)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / Self::NANOS_PER_SEC as f64
    }

    /// `self - earlier` in seconds.
    pub fn secs_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / Self::NANOS_PER_SEC as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkType {
    Ethernet,
    RawIp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    pub timestamp: Timestamp,
    pub link_type: LinkType,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TcpFlags(u8);

impl TcpFlags {
    pub const FIN: TcpFlags = TcpFlags(0x01);
    pub const SYN: TcpFlags = TcpFlags(0x02);
    pub const RST: TcpFlags = TcpFlags(0x04);
    pub const PSH: TcpFlags = TcpFlags(0x08);
    pub const ACK: TcpFlags = TcpFlags(0x10);

    const KNOWN: u8 = 0x1F;

    pub const fn empty() -> Self {
        TcpFlags(0)
    }

    /// Keeps only the flags this crate models; ECN/URG bits are dropped.
    pub const fn from_bits_truncate(bits: u8) -> Self {
        TcpFlags(bits & Self::KNOWN)
    }

    pub const fn bits(self) -> u8 {
        self.0
    }

    pub const fn contains(self, other: TcpFlags) -> bool {
        self.0 & other.0 == other.0
    }

    /// A connection-opening SYN (SYN set, ACK clear).
    pub const fn is_syn_only(self) -> bool {
        self.contains(Self::SYN) && !self.contains(Self::ACK)
    }
}

impl std::ops::BitOr for TcpFlags {
    type Output = TcpFlags;
    fn bitor(self, rhs: TcpFlags) -> TcpFlags {
        TcpFlags(self.0 | rhs.0)
    }
}

impl fmt::Display for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names =
            [(Self::SYN, "SYN"), (Self::ACK, "ACK"), (Self::FIN, "FIN"), (Self::RST, "RST"), (Self::PSH, "PSH")];
        let set: Vec<&str> = names.iter().filter(|(flag, _)| self.contains(*flag)).map(|(_, name)| *name).collect();
        write!(f, "{{{}}}", set.join(","))
    }
}

/// Header fields of one TCP segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedPacket {
    pub timestamp: Timestamp,
    pub src_ip: IpAddr,
    pub dst_ip: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    /// IPv4 TTL or IPv6 hop limit.
    pub ttl: u8,
    /// Whole IP datagram length as declared by the IP header.
    pub total_ip_len: u32,
    /// TCP payload only.
    pub payload_len: u32,
    pub tcp_flags: TcpFlags,
    pub seq: u32,
    pub ack: u32,
    pub window: u16,
    pub opt_mss: Option<u16>,
    pub opt_window_scale: Option<u8>,
}

impl DecodedPacket {
    pub fn src(&self) -> (IpAddr, u16) {
        (self.src_ip, self.src_port)
    }

    pub fn dst(&self) -> (IpAddr, u16) {
        (self.dst_ip, self.dst_port)
    }
}

/// Why a frame produced no packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Skip {
    NotIp,
    NotTcp,
    Truncated,
    Fragment,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DecodeCounters {
    pub decoded: u64,
    pub not_ip: u64,
    pub not_tcp: u64,
    pub truncated: u64,
    pub fragments: u64,
}

impl DecodeCounters {
    pub fn record(&mut self, outcome: Result<(), Skip>) {
        match outcome {
            Ok(()) => self.decoded += 1,
            Err(Skip::NotIp) => self.not_ip += 1,
            Err(Skip::NotTcp) => self.not_tcp += 1,
            Err(Skip::Truncated) => self.truncated += 1,
            Err(Skip::Fragment) => self.fragments += 1,
        }
    }

    pub fn skipped(&self) -> u64 {
        self.not_ip + self.not_tcp + self.truncated + self.fragments
    }
}

pub fn decode_frame(frame: &RawFrame) -> Option<DecodedPacket> {
    decode_with_payload(frame).ok().map(|(packet, _)| packet)
}

/// Decodes a frame and returns the TCP payload bytes alongside the header.
pub fn decode_with_payload(frame: &RawFrame) -> Result<(DecodedPacket, &[u8]), Skip> {
    let bytes = frame.bytes.as_slice();
    let ip = match frame.link_type {
        LinkType::Ethernet => strip_ethernet(bytes)?,
        LinkType::RawIp => bytes,
    };
    match ip.first().map(|b| b >> 4) {
        Some(4) => decode_ipv4(frame.timestamp, ip),
        Some(6) => decode_ipv6(frame.timestamp, ip),
        Some(_) => Err(Skip::NotIp),
        None => Err(Skip::Truncated),
    }
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

fn be32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn strip_ethernet(bytes: &[u8]) -> Result<&[u8], Skip> {
    if bytes.len() < ETHERNET_HEADER_LEN {
        return Err(Skip::Truncated);
    }
    let mut ethertype = be16(bytes, 12);
    let mut offset = ETHERNET_HEADER_LEN;
    while ethertype == ETHERTYPE_VLAN || ethertype == ETHERTYPE_QINQ {
        if bytes.len() < offset + 4 {
            return Err(Skip::Truncated);
        }
        ethertype = be16(bytes, offset + 2);
        offset += 4;
    }
    match ethertype {
        ETHERTYPE_IPV4 | ETHERTYPE_IPV6 => Ok(&bytes[offset..]),
        _ => Err(Skip::NotIp),
    }
}

fn decode_ipv4(timestamp: Timestamp, ip: &[u8]) -> Result<(DecodedPacket, &[u8]), Skip> {
    if ip.len() < IPV4_MIN_HEADER_LEN {
        return Err(Skip::Truncated);
    }
    let header_len = usize::from(ip[0] & 0x0F) * 4;
    let total_len = usize::from(be16(ip, 2));
    if header_len < IPV4_MIN_HEADER_LEN || total_len < header_len || ip.len() < total_len {
        return Err(Skip::Truncated);
    }
    let fragment_offset = be16(ip, 6) & 0x1FFF;
    if fragment_offset != 0 {
        return Err(Skip::Fragment);
    }
    if ip[9] != IPPROTO_TCP {
        return Err(Skip::NotTcp);
    }
    let src = IpAddr::V4(Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]));
    let dst = IpAddr::V4(Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]));
    let ttl = ip[8];
    decode_tcp(timestamp, src, dst, ttl, total_len, &ip[header_len..total_len])
}

fn decode_ipv6(timestamp: Timestamp, ip: &[u8]) -> Result<(DecodedPacket, &[u8]), Skip> {
    if ip.len() < IPV6_HEADER_LEN {
        return Err(Skip::Truncated);
    }
    let total_len = IPV6_HEADER_LEN + usize::from(be16(ip, 4));
    if ip.len() < total_len {
        return Err(Skip::Truncated);
    }
    let mut next_header = ip[6];
    let hop_limit = ip[7];
    let mut src = [0u8; 16];
    let mut dst = [0u8; 16];
    src.copy_from_slice(&ip[8..24]);
    dst.copy_from_slice(&ip[24..40]);

    let mut offset = IPV6_HEADER_LEN;
    loop {
        match next_header {
            IPPROTO_TCP => break,
            // hop-by-hop, routing, destination options
            0 | 43 | 60 => {
                if total_len < offset + 8 {
                    return Err(Skip::Truncated);
                }
                next_header = ip[offset];
                offset += (usize::from(ip[offset + 1]) + 1) * 8;
            }
            44 => {
                if total_len < offset + 8 {
                    return Err(Skip::Truncated);
                }
                if be16(ip, offset + 2) >> 3 != 0 {
                    return Err(Skip::Fragment);
                }
                next_header = ip[offset];
                offset += 8;
            }
            _ => return Err(Skip::NotTcp),
        }
        if offset > total_len {
            return Err(Skip::Truncated);
        }
    }
    decode_tcp(
        timestamp,
        IpAddr::V6(Ipv6Addr::from(src)),
        IpAddr::V6(Ipv6Addr::from(dst)),
        hop_limit,
        total_len,
        &ip[offset..total_len],
    )
}

fn decode_tcp(
    timestamp: Timestamp,
    src_ip: IpAddr,
    dst_ip: IpAddr,
    ttl: u8,
    total_ip_len: usize,
    tcp: &[u8],
) -> Result<(DecodedPacket, &[u8]), Skip> {
    if tcp.len() < TCP_MIN_HEADER_LEN {
        return Err(Skip::Truncated);
    }
    let header_len = usize::from(tcp[12] >> 4) * 4;
    if header_len < TCP_MIN_HEADER_LEN || tcp.len() < header_len {
        return Err(Skip::Truncated);
    }
    let (opt_mss, opt_window_scale) = parse_tcp_options(&tcp[TCP_MIN_HEADER_LEN..header_len]);
    let payload = &tcp[header_len..];
    let packet = DecodedPacket {
        timestamp,
        src_ip,
        dst_ip,
        src_port: be16(tcp, 0),
        dst_port: be16(tcp, 2),
        ttl,
        total_ip_len: total_ip_len as u32,
        payload_len: payload.len() as u32,
        tcp_flags: TcpFlags::from_bits_truncate(tcp[13]),
        seq: be32(tcp, 4),
        ack: be32(tcp, 8),
        window: be16(tcp, 14),
        opt_mss,
        opt_window_scale,
    };
    Ok((packet, payload))
}

/// Reads MSS (kind 2) and window scale (kind 3). Malformed option lists stop
/// the scan and keep whatever was read before.
fn parse_tcp_options(mut options: &[u8]) -> (Option<u16>, Option<u8>) {
    let mut mss = None;
    let mut window_scale = None;
    while let Some(&kind) = options.first() {
        match kind {
            0 => break,
            1 => {
                options = &options[1..];
                continue;
            }
            _ => {}
        }
        let Some(&len) = options.get(1) else { break };
        let len = usize::from(len);
        if len < 2 || options.len() < len {
            break;
        }
        match (kind, len) {
            (2, 4) => mss = Some(be16(options, 2)),
            // shifts above 14 are treated as 14
            (3, 3) => window_scale = Some(options[2].min(14)),
            _ => {}
        }
        options = &options[len..];
    }
    (mss, window_scale)
}

/// Builds an Ethernet frame carrying `packet`. `payload` is padded with
/// zeros (or cut) to `packet.payload_len`; `total_ip_len` is recomputed from
/// the headers written, so decoding returns `packet` with that field set.
pub fn encode_frame(packet: &DecodedPacket, payload: &[u8]) -> RawFrame {
    let mut tcp = Vec::with_capacity(28 + packet.payload_len as usize);
    tcp.extend_from_slice(&packet.src_port.to_be_bytes());
    tcp.extend_from_slice(&packet.dst_port.to_be_bytes());
    tcp.extend_from_slice(&packet.seq.to_be_bytes());
    tcp.extend_from_slice(&packet.ack.to_be_bytes());
    let mut options = Vec::new();
    if let Some(mss) = packet.opt_mss {
        options.extend_from_slice(&[2, 4]);
        options.extend_from_slice(&mss.to_be_bytes());
    }
    if let Some(shift) = packet.opt_window_scale {
        options.extend_from_slice(&[1, 3, 3, shift]);
    }
    let data_offset = (20 + options.len()) / 4;
    tcp.push((data_offset as u8) << 4);
    tcp.push(packet.tcp_flags.bits());
    tcp.extend_from_slice(&packet.window.to_be_bytes());
    tcp.extend_from_slice(&[0, 0, 0, 0]);
    tcp.extend_from_slice(&options);
    let n = packet.payload_len as usize;
    tcp.extend_from_slice(&payload[..payload.len().min(n)]);
    tcp.resize(data_offset * 4 + n, 0);

    let mut frame = vec![0x02, 0, 0, 0, 0, 0x01, 0x02, 0, 0, 0, 0, 0x02];
    match (packet.src_ip, packet.dst_ip) {
        (IpAddr::V4(src), IpAddr::V4(dst)) => {
            frame.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
            let total = (IPV4_MIN_HEADER_LEN + tcp.len()) as u16;
            let mut ip = vec![0x45, 0];
            ip.extend_from_slice(&total.to_be_bytes());
            ip.extend_from_slice(&[0, 0, 0x40, 0, packet.ttl, IPPROTO_TCP, 0, 0]);
            ip.extend_from_slice(&src.octets());
            ip.extend_from_slice(&dst.octets());
            let sum = ip.chunks(2).map(|w| u32::from(u16::from_be_bytes([w[0], w[1]]))).sum::<u32>();
            let folded = (sum & 0xFFFF) + (sum >> 16);
            let checksum = !((folded & 0xFFFF) + (folded >> 16)) as u16;
            ip[10..12].copy_from_slice(&checksum.to_be_bytes());
            frame.extend_from_slice(&ip);
        }
        (src, dst) => {
            let as_v6 = |a: IpAddr| match a {
                IpAddr::V4(v4) => v4.to_ipv6_mapped(),
                IpAddr::V6(v6) => v6,
            };
            frame.extend_from_slice(&ETHERTYPE_IPV6.to_be_bytes());
            frame.extend_from_slice(&[0x60, 0, 0, 0]);
            frame.extend_from_slice(&(tcp.len() as u16).to_be_bytes());
            frame.extend_from_slice(&[IPPROTO_TCP, packet.ttl]);
            frame.extend_from_slice(&as_v6(src).octets());
            frame.extend_from_slice(&as_v6(dst).octets());
        }
    }
    frame.extend_from_slice(&tcp);
    RawFrame { timestamp: packet.timestamp, link_type: LinkType::Ethernet, bytes: frame }
}
