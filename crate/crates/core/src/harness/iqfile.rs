//! Binary IQ capture format.
//!
//! Layout, little-endian throughout:
//!
//! | bytes | field |
//! |---|---|
//! | 8 | magic `WIFI-IQ\0` |
//! | 2 | version |
//! | 2 | reserved, zero |
//! | 8 | sample rate (f64, Hz) |
//! | 4 | stream count |
//! | 8 | samples per stream |
//! | 4 | metadata length |
//! | n | metadata, UTF-8 JSON |
//!
//! followed by one block per stream of interleaved f32 (I, Q) pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::C64;

pub const IQ_MAGIC: [u8; 8] = *b"WIFI-IQ\0";
pub const IQ_VERSION: u16 = 1;

const MAX_STREAMS: u32 = 16;
const MAX_META: u32 = 1 << 24;

#[derive(Debug, Error)]
pub enum IqError {
    #[error("not an IQ capture (bad magic)")]
    BadMagic,
    #[error("IQ format version {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("IQ file ends early")]
    TruncatedFile,
    #[error("header does not match the streams: {0}")]
    Inconsistent(String),
    #[error("bad metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error(transparent)]
    Io(std::io::Error),
}

impl From<std::io::Error> for IqError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == ErrorKind::UnexpectedEof {
            IqError::TruncatedFile
        } else {
            IqError::Io(e)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqHeader {
    pub sample_rate: f64,
    pub n_streams: usize,
    /// Samples per stream.
    pub count: usize,
    /// Free-form JSON, typically the transmit configuration and seed.
    pub metadata: serde_json::Value,
}

impl IqHeader {
    pub fn for_streams(streams: &[Vec<C64>], sample_rate: f64, metadata: serde_json::Value) -> Self {
        IqHeader { sample_rate, n_streams: streams.len(), count: streams.first().map_or(0, |s| s.len()), metadata }
    }
}

pub fn write_iq_to<W: Write>(mut out: W, header: &IqHeader, streams: &[Vec<C64>]) -> Result<(), IqError> {
    if header.n_streams != streams.len() || header.n_streams as u32 > MAX_STREAMS {
        return Err(IqError::Inconsistent(format!("{} streams for a header of {}", streams.len(), header.n_streams)));
    }
    if let Some(s) = streams.iter().find(|s| s.len() != header.count) {
        return Err(IqError::Inconsistent(format!("stream of {} samples, header says {}", s.len(), header.count)));
    }
    let meta = serde_json::to_vec(&header.metadata)?;
    out.write_all(&IQ_MAGIC)?;
    out.write_all(&IQ_VERSION.to_le_bytes())?;
    out.write_all(&0u16.to_le_bytes())?;
    out.write_all(&header.sample_rate.to_le_bytes())?;
    out.write_all(&(header.n_streams as u32).to_le_bytes())?;
    out.write_all(&(header.count as u64).to_le_bytes())?;
    out.write_all(&(meta.len() as u32).to_le_bytes())?;
    out.write_all(&meta)?;
    for s in streams {
        for x in s {
            out.write_all(&(x.re as f32).to_le_bytes())?;
            out.write_all(&(x.im as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Write a capture. Samples are stored as f32.
pub fn write_iq(path: impl AsRef<Path>, header: &IqHeader, streams: &[Vec<C64>]) -> Result<(), IqError> {
    write_iq_to(BufWriter::new(File::create(path)?), header, streams)
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], IqError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_iq_from<R: Read>(mut r: R) -> Result<(IqHeader, Vec<Vec<C64>>), IqError> {
    let magic: [u8; 8] = match take(&mut r) {
        Ok(m) => m,
        Err(IqError::TruncatedFile) => return Err(IqError::BadMagic),
        Err(e) => return Err(e),
    };
    if magic != IQ_MAGIC {
        return Err(IqError::BadMagic);
    }
    let version = u16::from_le_bytes(take(&mut r)?);
    if version != IQ_VERSION {
        return Err(IqError::VersionMismatch { found: version, expected: IQ_VERSION });
    }
    let _reserved: [u8; 2] = take(&mut r)?;
    let sample_rate = f64::from_le_bytes(take(&mut r)?);
    let n_streams = u32::from_le_bytes(take(&mut r)?);
    let count = u64::from_le_bytes(take(&mut r)?);
    let meta_len = u32::from_le_bytes(take(&mut r)?);
    if n_streams > MAX_STREAMS || meta_len > MAX_META {
        return Err(IqError::Inconsistent(format!("{n_streams} streams, {meta_len} metadata bytes")));
    }
    let count = usize::try_from(count).map_err(|_| IqError::Inconsistent(format!("{count} samples")))?;
    let mut meta = vec![0u8; meta_len as usize];
    r.read_exact(&mut meta)?;
    let metadata = if meta.is_empty() { serde_json::Value::Null } else { serde_json::from_slice(&meta)? };
    let mut streams = Vec::with_capacity(n_streams as usize);
    for _ in 0..n_streams {
        // Grow as data arrives so a corrupt count cannot force a huge allocation.
        let mut s = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let b: [u8; 8] = take(&mut r)?;
            let re = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            let im = f32::from_le_bytes([b[4], b[5], b[6], b[7]]);
            s.push(C64::new(re as f64, im as f64));
        }
        streams.push(s);
    }
    Ok((IqHeader { sample_rate, n_streams: n_streams as usize, count, metadata }, streams))
}

pub fn read_iq(path: impl AsRef<Path>) -> Result<(IqHeader, Vec<Vec<C64>>), IqError> {
    read_iq_from(BufReader::new(File::open(path)?))
}
