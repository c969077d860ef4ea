//! Synthetic labelled HTTPS traffic.
//!
//! Each OS has its own TCP stack fingerprint (initial TTL, SYN window, window
//! scale), each browser its own ClientHello shape, and each application its
//! own burst pattern. Per-session jitter keeps the classes overlapping a
//! little without erasing the margins.

use std::net::{IpAddr, Ipv4Addr};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Application, Browser, LabelTuple, LabeledSample, LabeledSession, Os};
use crate::features::{session_features, FeatureSetId, PeakConfig};
use crate::packet::{encode_frame, DecodedPacket, RawFrame, TcpFlags, Timestamp};
use crate::session::{Endpoint, Session, SessionSplitter, SplitConfig};
use crate::tls::{encode_client_hello, HelloTemplate};

pub const OSES: [Os; 3] = [Os::Windows, Os::Ubuntu, Os::Osx];
pub const BROWSERS: [Browser; 3] = [Browser::Chrome, Browser::Firefox, Browser::IExplorer];
pub const APPLICATIONS: [Application; 3] = [Application::Twitter, Application::Youtube, Application::Facebook];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub sessions: usize,
    pub seed: u64,
    /// Client machines per (OS, browser) pair.
    pub hosts_per_pair: u8,
    /// Window over which session start times are spread.
    pub span_secs: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { sessions: 3000, seed: 1, hosts_per_pair: 3, span_secs: 3600.0 }
    }
}

/// One generated session: packets in wire order with their TCP payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSession {
    pub label: LabelTuple,
    pub client: Endpoint,
    pub server: Endpoint,
    pub packets: Vec<(DecodedPacket, Vec<u8>)>,
}

impl SynthSession {
    pub fn id(&self) -> String {
        format!("{}:{}-{}:{}", self.client.0, self.client.1, self.server.0, self.server.1)
    }

    /// Assembles the session through the regular splitter.
    pub fn to_session(&self) -> Session {
        let mut splitter = SessionSplitter::new(SplitConfig::default());
        for (p, payload) in &self.packets {
            splitter.push(p.clone(), payload);
        }
        splitter.finish().pop().expect("synthetic session has packets")
    }

    pub fn frames(&self) -> Vec<RawFrame> {
        self.packets.iter().map(|(p, payload)| encode_frame(p, payload)).collect()
    }
}

struct OsProfile {
    ttl: u8,
    syn_window: u16,
    window_scale: u8,
    mss: u16,
    /// Post-handshake advertised window range.
    window: (u16, u16),
}

fn os_profile(os: Os) -> OsProfile {
    match os {
        Os::Windows => OsProfile { ttl: 128, syn_window: 64240, window_scale: 8, mss: 1460, window: (250, 1030) },
        Os::Ubuntu => OsProfile { ttl: 64, syn_window: 29200, window_scale: 7, mss: 1460, window: (220, 2000) },
        Os::Osx => OsProfile { ttl: 64, syn_window: 65535, window_scale: 6, mss: 1460, window: (2000, 4120) },
    }
}

struct BrowserProfile {
    suites: usize,
    extensions: usize,
    session_id_len: u8,
    client_version: u16,
}

fn browser_profile(browser: Browser) -> BrowserProfile {
    match browser {
        Browser::Chrome => BrowserProfile { suites: 16, extensions: 16, session_id_len: 32, client_version: 0x0303 },
        Browser::Firefox => BrowserProfile { suites: 18, extensions: 12, session_id_len: 32, client_version: 0x0303 },
        _ => BrowserProfile { suites: 22, extensions: 8, session_id_len: 0, client_version: 0x0303 },
    }
}

struct AppProfile {
    peaks: (u32, u32),
    packets_per_peak: (u32, u32),
    size: (u32, u32),
    silence_secs: (f64, f64),
    keepalive_chance: f64,
}

fn app_profile(app: Application) -> AppProfile {
    match app {
        Application::Twitter => AppProfile {
            peaks: (6, 10),
            packets_per_peak: (3, 6),
            size: (150, 600),
            silence_secs: (1.5, 5.0),
            keepalive_chance: 0.4,
        },
        Application::Youtube => AppProfile {
            peaks: (3, 5),
            packets_per_peak: (25, 40),
            size: (1300, 1460),
            silence_secs: (2.0, 8.0),
            keepalive_chance: 0.1,
        },
        _ => AppProfile {
            peaks: (4, 7),
            packets_per_peak: (8, 14),
            size: (600, 1100),
            silence_secs: (1.5, 4.0),
            keepalive_chance: 0.25,
        },
    }
}

struct Flow {
    client: Endpoint,
    server: Endpoint,
    client_ttl: u8,
    server_ttl: u8,
    client_seq: u32,
    server_seq: u32,
    client_window: (u16, u16),
    packets: Vec<(DecodedPacket, Vec<u8>)>,
}

impl Flow {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        t: f64,
        from_client: bool,
        flags: TcpFlags,
        payload_len: u32,
        window: u16,
        options: (Option<u16>, Option<u8>),
        payload: Vec<u8>,
    ) {
        let (src, dst, ttl, seq, ack) = if from_client {
            (self.client, self.server, self.client_ttl, self.client_seq, self.server_seq)
        } else {
            (self.server, self.client, self.server_ttl, self.server_seq, self.client_seq)
        };
        let header = 40 + options.0.map_or(0, |_| 4) + options.1.map_or(0, |_| 4);
        let packet = DecodedPacket {
            timestamp: Timestamp::from_secs_f64(t),
            src_ip: src.0,
            dst_ip: dst.0,
            src_port: src.1,
            dst_port: dst.1,
            ttl,
            total_ip_len: header + payload_len,
            payload_len,
            tcp_flags: flags,
            seq,
            ack: if flags.contains(TcpFlags::ACK) { ack } else { 0 },
            window,
            opt_mss: options.0,
            opt_window_scale: options.1,
        };
        let consumed =
            payload_len + u32::from(flags.contains(TcpFlags::SYN)) + u32::from(flags.contains(TcpFlags::FIN));
        if from_client {
            self.client_seq = self.client_seq.wrapping_add(consumed);
        } else {
            self.server_seq = self.server_seq.wrapping_add(consumed);
        }
        self.packets.push((packet, payload));
    }

    fn client_data(&mut self, rng: &mut ChaCha8Rng, t: f64, len: u32) {
        let w = rng.gen_range(self.client_window.0..=self.client_window.1);
        self.push(t, true, TcpFlags::ACK | TcpFlags::PSH, len, w, (None, None), Vec::new());
    }

    fn server_data(&mut self, rng: &mut ChaCha8Rng, t: f64, len: u32) {
        let w = rng.gen_range(500..=520);
        self.push(t, false, TcpFlags::ACK, len, w, (None, None), Vec::new());
    }
}

/// Generates one session with the given label.
pub fn generate_session(
    rng: &mut ChaCha8Rng,
    label: LabelTuple,
    client: Endpoint,
    server: Endpoint,
    start: f64,
    hops: u8,
) -> SynthSession {
    let os = os_profile(label.os);
    let br = browser_profile(label.browser);
    let app = app_profile(label.application);
    let mut flow = Flow {
        client,
        server,
        client_ttl: os.ttl - hops,
        server_ttl: 52 + (rng.gen_range(0..4u8)),
        client_seq: rng.gen(),
        server_seq: rng.gen(),
        client_window: os.window,
        packets: Vec::new(),
    };
    let rtt = rng.gen_range(0.01..0.08);
    let mut t = start;

    // handshake; a few hosts sit behind links that clamp the MSS
    let mss = if rng.gen_bool(0.05) { os.mss - 40 } else { os.mss };
    flow.push(t, true, TcpFlags::SYN, 0, os.syn_window, (Some(mss), Some(os.window_scale)), Vec::new());
    t += rtt;
    flow.push(t, false, TcpFlags::SYN | TcpFlags::ACK, 0, 65535, (Some(1460), Some(7)), Vec::new());
    t += 0.0005;
    let w = rng.gen_range(os.window.0..=os.window.1);
    flow.push(t, true, TcpFlags::ACK, 0, w, (None, None), Vec::new());

    // ClientHello
    let suites = br.suites + rng.gen_range(0..=1);
    let extensions = br.extensions + rng.gen_range(0..=1);
    let hello = encode_client_hello(&HelloTemplate {
        record_version: 0x0301,
        client_version: br.client_version,
        cipher_suites: (0..suites as u16).map(|i| 0xC000 | i).collect(),
        compression_methods: 1,
        session_id_len: if rng.gen_bool(0.9) { br.session_id_len } else { 32 - br.session_id_len },
        extensions: (0..extensions as u16).map(|i| (i, rng.gen_range(0..24))).collect(),
    });
    t += 0.001;
    let len = hello.len() as u32;
    let window = rng.gen_range(os.window.0..=os.window.1);
    flow.push(t, true, TcpFlags::ACK | TcpFlags::PSH, len, window, (None, None), hello);
    t += rtt;
    let len = rng.gen_range(2800..4200);
    flow.server_data(rng, t, len);
    t += 0.002;
    let len = rng.gen_range(90..140);
    flow.client_data(rng, t, len);

    let peaks = rng.gen_range(app.peaks.0..=app.peaks.1);
    for _ in 0..peaks {
        let silence = rng.gen_range(app.silence_secs.0..app.silence_secs.1);
        if silence > 2.5 && rng.gen_bool(app.keepalive_chance) {
            // probe one byte below the acknowledged edge
            let w = rng.gen_range(os.window.0..=os.window.1);
            flow.client_seq = flow.client_seq.wrapping_sub(1);
            let payload_len = rng.gen_range(0..=1);
            let payload = vec![0; payload_len as usize];
            flow.push(t + silence / 2.0, true, TcpFlags::ACK, payload_len, w, (None, None), payload);
            flow.client_seq = flow.client_seq.wrapping_add(1).wrapping_sub(payload_len);
            flow.push(t + silence / 2.0 + rtt, false, TcpFlags::ACK, 0, 510, (None, None), Vec::new());
        }
        t += silence;
        let len = rng.gen_range(150..600);
        flow.client_data(rng, t, len);
        t += rtt;
        let n = rng.gen_range(app.packets_per_peak.0..=app.packets_per_peak.1);
        for k in 0..n {
            let size = rng.gen_range(app.size.0..=app.size.1).min(u32::from(mss));
            flow.server_data(rng, t, size);
            if k % 2 == 1 {
                t += 0.0003;
                flow.client_data(rng, t, 0);
            }
            t += rng.gen_range(0.002..0.06);
        }
    }

    t += rng.gen_range(0.5..2.0);
    flow.push(t, true, TcpFlags::FIN | TcpFlags::ACK, 0, w, (None, None), Vec::new());
    t += rtt;
    flow.push(t, false, TcpFlags::FIN | TcpFlags::ACK, 0, 510, (None, None), Vec::new());
    t += 0.0005;
    flow.push(t, true, TcpFlags::ACK, 0, w, (None, None), Vec::new());

    SynthSession { label, client, server, packets: flow.packets }
}

/// Balanced corpus over every OS × browser × application combination.
pub fn generate(config: &SynthConfig) -> Vec<SynthSession> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let combos: Vec<LabelTuple> = OSES
        .iter()
        .flat_map(|&os| {
            BROWSERS.iter().flat_map(move |&b| APPLICATIONS.iter().map(move |&a| LabelTuple::new(os, b, a)))
        })
        .collect();
    let hosts = config.hosts_per_pair.max(1);
    (0..config.sessions)
        .map(|i| {
            let label = combos[i % combos.len()];
            let os_i = OSES.iter().position(|&o| o == label.os).unwrap() as u8;
            let br_i = BROWSERS.iter().position(|&b| b == label.browser).unwrap() as u8;
            let app_i = APPLICATIONS.iter().position(|&a| a == label.application).unwrap() as u8;
            let host = rng.gen_range(0..hosts);
            let client_ip = IpAddr::V4(Ipv4Addr::new(10, os_i + 1, br_i + 1, host + 1));
            let client_port = 1024 + (i % 64000) as u16;
            let server_ip = IpAddr::V4(Ipv4Addr::new(198, 51, 100, 10 * app_i + rng.gen_range(1..=5)));
            let start = rng.gen_range(0.0..config.span_secs.max(1.0));
            generate_session(&mut rng, label, (client_ip, client_port), (server_ip, 443), start, host % 3)
        })
        .collect()
}

/// Generated sessions assembled and labelled.
pub fn labeled_sessions(config: &SynthConfig) -> Vec<LabeledSession> {
    generate(config)
        .iter()
        .map(|s| LabeledSession { session_id: s.id(), label: s.label, session: s.to_session() })
        .collect()
}

/// Generated sessions reduced to `set` features.
pub fn labeled_features(config: &SynthConfig, set: FeatureSetId, peaks: &PeakConfig) -> Vec<LabeledSample> {
    labeled_sessions(config)
        .into_iter()
        .map(|s| LabeledSample {
            features: session_features(&s.session, set, peaks),
            session_id: s.session_id,
            label: s.label,
        })
        .collect()
}
