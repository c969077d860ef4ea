//! TLS ClientHello parsing from the first bytes a client sends.

use serde::{Deserialize, Serialize};

/// Forward payload bytes scanned for a ClientHello.
pub const DEFAULT_SCAN_LIMIT: usize = 8192;

const CONTENT_HANDSHAKE: u8 = 22;
const HANDSHAKE_CLIENT_HELLO: u8 = 1;
const RECORD_HEADER_LEN: usize = 5;
const MAX_SESSION_ID_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientHelloSummary {
    /// `client_version` from the handshake body (0x0303 for TLS 1.2).
    pub tls_version: u16,
    pub cipher_suite_count: usize,
    pub cipher_suite_values: Vec<u16>,
    pub extension_count: usize,
    pub compression_method_count: usize,
    pub session_id_len: usize,
}

/// A ClientHello was found but its length fields do not fit.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed ClientHello: {0}")]
pub struct MalformedHello(pub &'static str);

/// Walks TLS records from the start of `prefix` and summarizes the first
/// ClientHello.
///
/// `Ok(None)` means no TLS handshake was seen (plain text, other record
/// types, or not enough bytes for a record header).
pub fn parse_client_hello(prefix: &[u8]) -> Result<Option<ClientHelloSummary>, MalformedHello> {
    let mut offset = 0;
    while prefix.len() >= offset + RECORD_HEADER_LEN {
        let header = &prefix[offset..offset + RECORD_HEADER_LEN];
        let content_type = header[0];
        if !(20..=23).contains(&content_type) || header[1] != 3 || header[2] > 4 {
            return Ok(None);
        }
        let record_len = usize::from(u16::from_be_bytes([header[3], header[4]]));
        let body_start = offset + RECORD_HEADER_LEN;
        if content_type == CONTENT_HANDSHAKE && prefix.get(body_start) == Some(&HANDSHAKE_CLIENT_HELLO) {
            let Some(record) = prefix.get(body_start..body_start + record_len) else {
                return Err(MalformedHello("record extends past captured bytes"));
            };
            return parse_hello_body(record).map(Some);
        }
        offset = body_start + record_len;
    }
    Ok(None)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], MalformedHello> {
        let slice = self.bytes.get(self.at..self.at + n).ok_or(MalformedHello(what))?;
        self.at += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, MalformedHello> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, MalformedHello> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.at
    }
}

fn parse_hello_body(record: &[u8]) -> Result<ClientHelloSummary, MalformedHello> {
    let mut r = Reader { bytes: record, at: 0 };
    r.u8("handshake type")?;
    let len = r.take(3, "handshake length")?;
    let body_len = usize::from(len[0]) << 16 | usize::from(len[1]) << 8 | usize::from(len[2]);
    let body = r.take(body_len, "handshake length exceeds record")?;

    let mut r = Reader { bytes: body, at: 0 };
    let tls_version = r.u16("client version")?;
    r.take(32, "random")?;
    let session_id_len = usize::from(r.u8("session id length")?);
    if session_id_len > MAX_SESSION_ID_LEN {
        return Err(MalformedHello("session id longer than 32 bytes"));
    }
    r.take(session_id_len, "session id")?;

    let suites_len = usize::from(r.u16("cipher suites length")?);
    if suites_len % 2 != 0 {
        return Err(MalformedHello("odd cipher suites length"));
    }
    let suites = r.take(suites_len, "cipher suites exceed record")?;
    let cipher_suite_values: Vec<u16> = suites.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();

    let compression_len = usize::from(r.u8("compression methods length")?);
    r.take(compression_len, "compression methods exceed record")?;

    let mut extension_count = 0;
    if r.remaining() > 0 {
        let ext_len = usize::from(r.u16("extensions length")?);
        let exts = r.take(ext_len, "extensions exceed record")?;
        let mut e = Reader { bytes: exts, at: 0 };
        while e.remaining() > 0 {
            e.u16("extension type")?;
            let n = usize::from(e.u16("extension length")?);
            e.take(n, "extension body exceeds extensions block")?;
            extension_count += 1;
        }
    }

    Ok(ClientHelloSummary {
        tls_version,
        cipher_suite_count: cipher_suite_values.len(),
        cipher_suite_values,
        extension_count,
        compression_method_count: compression_len,
        session_id_len,
    })
}

/// Parameters for [`encode_client_hello`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelloTemplate {
    pub record_version: u16,
    pub client_version: u16,
    pub cipher_suites: Vec<u16>,
    pub compression_methods: u8,
    pub session_id_len: u8,
    /// (type, body length) per extension; bodies are zero-filled.
    pub extensions: Vec<(u16, u16)>,
}

/// Serializes a single-record ClientHello.
pub fn encode_client_hello(t: &HelloTemplate) -> Vec<u8> {
    let mut body = Vec::new();
    body.extend_from_slice(&t.client_version.to_be_bytes());
    body.extend((0..32u8).map(|i| i.wrapping_mul(37)));
    body.push(t.session_id_len);
    body.extend(std::iter::repeat_n(0xAB, usize::from(t.session_id_len)));
    body.extend_from_slice(&((t.cipher_suites.len() * 2) as u16).to_be_bytes());
    for suite in &t.cipher_suites {
        body.extend_from_slice(&suite.to_be_bytes());
    }
    body.push(t.compression_methods);
    body.extend(0..t.compression_methods);
    if !t.extensions.is_empty() {
        let ext_total: usize = t.extensions.iter().map(|(_, n)| 4 + usize::from(*n)).sum();
        body.extend_from_slice(&(ext_total as u16).to_be_bytes());
        for (kind, n) in &t.extensions {
            body.extend_from_slice(&kind.to_be_bytes());
            body.extend_from_slice(&n.to_be_bytes());
            body.extend(std::iter::repeat_n(0, usize::from(*n)));
        }
    }

    let mut handshake = vec![HANDSHAKE_CLIENT_HELLO];
    handshake.extend_from_slice(&(body.len() as u32).to_be_bytes()[1..]);
    handshake.extend_from_slice(&body);

    let mut record = vec![CONTENT_HANDSHAKE];
    record.extend_from_slice(&t.record_version.to_be_bytes());
    record.extend_from_slice(&(handshake.len() as u16).to_be_bytes());
    record.extend_from_slice(&handshake);
    record
}
