//! Classic pcap files (both byte orders, micro- and nanosecond variants).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Duration;

use pcap_file::pcap::{PcapHeader, PcapPacket, PcapReader, PcapWriter};
use pcap_file::{DataLink, TsResolution};

use crate::packet::{LinkType, RawFrame, Timestamp};
use crate::{Error, Result};

fn link_type_of(datalink: DataLink) -> Option<LinkType> {
    match datalink {
        DataLink::ETHERNET => Some(LinkType::Ethernet),
        DataLink::RAW | DataLink::IPV4 | DataLink::IPV6 => Some(LinkType::RawIp),
        _ => None,
    }
}

/// Calls `f` for every frame in file order.
pub fn for_each_frame<R: Read>(reader: R, source: &Path, mut f: impl FnMut(RawFrame)) -> Result<()> {
    let capture_err = |message: String| Error::Capture { path: source.to_path_buf(), message };
    let mut pcap = PcapReader::new(reader).map_err(|e| capture_err(e.to_string()))?;
    let datalink = pcap.header().datalink;
    let link_type = link_type_of(datalink).ok_or_else(|| capture_err(format!("unsupported link type {datalink:?}")))?;
    while let Some(packet) = pcap.next_packet() {
        let packet = packet.map_err(|e| capture_err(e.to_string()))?;
        f(RawFrame {
            timestamp: Timestamp(packet.timestamp.as_nanos() as i64),
            link_type,
            bytes: packet.data.into_owned(),
        });
    }
    Ok(())
}

pub fn read_frames(path: &Path) -> Result<Vec<RawFrame>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut frames = Vec::new();
    for_each_frame(BufReader::new(file), path, |frame| frames.push(frame))?;
    Ok(frames)
}

/// Writes `frames` as a microsecond pcap. All frames must share `link_type`.
pub fn write_frames<W: Write>(writer: W, link_type: LinkType, frames: &[RawFrame]) -> Result<()> {
    let header = PcapHeader {
        datalink: match link_type {
            LinkType::Ethernet => DataLink::ETHERNET,
            LinkType::RawIp => DataLink::RAW,
        },
        ts_resolution: TsResolution::MicroSecond,
        ..Default::default()
    };
    let to_err = |e: pcap_file::PcapError| Error::Capture { path: "<output>".into(), message: e.to_string() };
    let mut pcap = PcapWriter::with_header(writer, header).map_err(to_err)?;
    for frame in frames {
        let ts = Duration::from_nanos(frame.timestamp.0.max(0) as u64);
        let packet = PcapPacket::new(ts, frame.bytes.len() as u32, &frame.bytes);
        pcap.write_packet(&packet).map_err(to_err)?;
    }
    Ok(())
}

pub fn write_pcap(path: &Path, link_type: LinkType, frames: &[RawFrame]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_frames(&mut out, link_type, frames)?;
    out.flush().map_err(|e| Error::io(path, e))
}
