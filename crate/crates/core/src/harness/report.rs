use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::iqfile::{read_iq, IqError};
use crate::params::{PhyFormat, SAMPLE_RATE};
use crate::rx::{ReceivedPacket, Receiver, RxConfig};
use crate::C64;

/// Channel of one subcarrier, `h[rx][tx] = [re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiTone {
    pub k: i32,
    pub h: Vec<Vec<[f64; 2]>>,
}

/// Flat summary of one received packet, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketReport {
    pub format: PhyFormat,
    pub mcs: u8,
    pub crc_ok: bool,
    pub signaled_length: usize,
    pub payload_hex: String,
    pub start: usize,
    pub end: usize,
    pub ltf_start: usize,
    pub cfo_hz: f64,
    pub evm_db: BTreeMap<String, f64>,
    pub csi: Option<Vec<CsiTone>>,
}

impl From<&ReceivedPacket> for PacketReport {
    fn from(p: &ReceivedPacket) -> Self {
        let d = &p.diagnostics;
        let evm_db = d
            .evm_db
            .iter()
            .map(|(f, v)| {
                (serde_json::to_value(f).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(), *v)
            })
            .collect();
        let csi = p.csi.as_ref().map(|est| {
            est.subcarriers
                .iter()
                .map(|&k| CsiTone {
                    k,
                    h: (0..est.n_rx())
                        .map(|r| {
                            (0..est.n_tx())
                                .map(|t| {
                                    let x = est.get(r, t, k);
                                    [x.re, x.im]
                                })
                                .collect()
                        })
                        .collect(),
                })
                .collect()
        });
        PacketReport {
            format: p.format,
            mcs: p.mcs,
            crc_ok: p.crc_ok,
            signaled_length: p.signaled_length,
            payload_hex: p.payload.iter().map(|b| format!("{b:02x}")).collect(),
            start: p.start,
            end: p.end,
            ltf_start: d.ltf_start,
            cfo_hz: d.overall_cfo * SAMPLE_RATE / (2.0 * std::f64::consts::PI),
            evm_db,
            csi,
        }
    }
}

pub fn decode_streams(streams: &[Vec<C64>], config: &RxConfig) -> Vec<PacketReport> {
    let views: Vec<&[C64]> = streams.iter().map(|s| s.as_slice()).collect();
    Receiver::new(*config).receive(&views).iter().map(PacketReport::from).collect()
}

/// Run the receiver over a capture file.
pub fn decode_file(path: impl AsRef<Path>, config: &RxConfig) -> Result<Vec<PacketReport>, IqError> {
    let (_, streams) = read_iq(path)?;
    Ok(decode_streams(&streams, config))
}

pub fn write_json_lines<W: Write>(reports: &[PacketReport], mut out: W) -> std::io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
