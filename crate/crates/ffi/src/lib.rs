//! C interface to the `wifi-phy` transceiver.
//!
//! Every fallible function returns a [`WifiStatus`]. On failure a message is
//! kept per thread and can be copied out with [`wifi_last_error`]. Objects are
//! opaque handles created by a `*_new` / `*_build` function and released with
//! the matching `*_free`; passing NULL to a `*_free` is a no-op.
//!
//! Complex samples cross the boundary as interleaved I/Q `double` pairs.
//! Enum arguments must hold one of the declared values.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use wifi_phy::harness::{pdr_sweep, write_csv, ChannelModel, SweepError, SweepFormat, SweepSpec};
use wifi_phy::params::PhyFormat;
use wifi_phy::rx::{ReceivedPacket, Receiver, RxConfig};
use wifi_phy::tx::{assemble_packet, PhyConfig, TxFrame};
use wifi_phy::C64;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WifiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The frame description cannot be transmitted.
    Tx = 3,
    Io = 4,
    BufferTooSmall = 5,
    OutOfRange = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WifiFormat {
    Legacy = 0,
    Ht = 1,
    Vht = 2,
    VhtMu = 3,
    VhtNdp = 4,
}

impl From<PhyFormat> for WifiFormat {
    fn from(f: PhyFormat) -> Self {
        match f {
            PhyFormat::Legacy => WifiFormat::Legacy,
            PhyFormat::Ht => WifiFormat::Ht,
            PhyFormat::VhtSu => WifiFormat::Vht,
            PhyFormat::VhtMu => WifiFormat::VhtMu,
            PhyFormat::VhtNdp => WifiFormat::VhtNdp,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WifiChannel {
    Ideal = 0,
    Awgn = 1,
    TgacB = 2,
}

/// Receiver settings; start from [`wifi_rx_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WifiRxOptions {
    pub threshold: f64,
    pub min_plateau: usize,
    pub user_position: usize,
    pub backoff: usize,
}

/// Summary of one decoded packet.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WifiPacketInfo {
    pub format: WifiFormat,
    pub mcs: u8,
    pub crc_ok: bool,
    pub signaled_length: usize,
    /// Octets available from [`wifi_packets_payload`].
    pub payload_len: usize,
    pub start: usize,
    pub end: usize,
    pub cfo_hz: f64,
}

/// PDR sweep description. `mcs` points to `n_mcs` entries.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WifiSweepSpec {
    pub format: WifiFormat,
    pub mcs: *const u8,
    pub n_mcs: usize,
    pub snr_start: f64,
    pub snr_stop: f64,
    pub snr_step: f64,
    pub trials: usize,
    pub payload_octets: usize,
    pub cfo_hz: f64,
    pub channel: WifiChannel,
    pub seed: u64,
}

/// A transmitted frame, one sample stream per antenna.
pub struct WifiFrame {
    frame: TxFrame,
}

pub struct WifiReceiver {
    rx: Receiver,
}

/// Packets found by one [`wifi_receiver_decode`] call.
pub struct WifiPackets {
    packets: Vec<ReceivedPacket>,
}

struct Failure(WifiStatus, String);

impl Failure {
    fn new(status: WifiStatus, msg: impl Into<String>) -> Self {
        Failure(status, msg.into())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

/// Run `f`, record its error message and turn panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WifiStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (WifiStatus::Ok, None),
        Ok(Err(Failure(s, m))) => (s, Some(m)),
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (WifiStatus::Internal, Some(m))
        }
    };
    if msg.is_some() {
        LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    }
    status
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(WifiStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    Ok(std::slice::from_raw_parts(non_null(p, what)?, len))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(WifiStatus::NullPointer, "output handle pointer is NULL"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wifi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length plus one, or 0 when
/// no error has been recorded. `buf` may be NULL to query the length.
#[no_mangle]
pub unsafe extern "C" fn wifi_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_deref() {
        None => 0,
        Some(msg) => {
            if !buf.is_null() && cap > 0 {
                let n = msg.len().min(cap - 1);
                ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
            msg.len() + 1
        }
    })
}

/// Assemble a single-user frame or a sounding NDP. `payload` may be NULL when
/// `payload_len` is 0; it is ignored for NDPs. Multi-user frames need a
/// steering matrix and are not available through this interface.
#[no_mangle]
pub unsafe extern "C" fn wifi_frame_build(
    format: WifiFormat,
    mcs: u8,
    n_tx: usize,
    payload: *const u8,
    payload_len: usize,
    out: *mut *mut WifiFrame,
) -> WifiStatus {
    guard(|| {
        let payload = slice(payload, payload_len, "payload")?.to_vec();
        let config = match format {
            WifiFormat::Legacy => PhyConfig::legacy(mcs, payload),
            WifiFormat::Ht => PhyConfig::ht(mcs, payload),
            WifiFormat::Vht => PhyConfig::vht_su(mcs, payload),
            WifiFormat::VhtNdp => PhyConfig::vht_ndp(),
            WifiFormat::VhtMu => {
                return Err(Failure::new(WifiStatus::InvalidArgument, "multi-user frames need a steering matrix"))
            }
        }
        .with_n_tx(n_tx);
        let frame = assemble_packet(&config, None).map_err(|e| Failure::new(WifiStatus::Tx, e.to_string()))?;
        store(out, WifiFrame { frame })
    })
}

#[no_mangle]
pub unsafe extern "C" fn wifi_frame_free(frame: *mut WifiFrame) {
    free(frame)
}

/// Number of transmit streams, 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn wifi_frame_n_streams(frame: *const WifiFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.frame.streams.len())
}

/// Samples per stream, 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn wifi_frame_len(frame: *const WifiFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.frame.len())
}

/// Copy stream `stream` into `iq` as interleaved I/Q. `cap` counts complex
/// samples, so `iq` must hold `2 * cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn wifi_frame_copy_stream(
    frame: *const WifiFrame,
    stream: usize,
    iq: *mut f64,
    cap: usize,
) -> WifiStatus {
    guard(|| {
        let f = &non_null(frame, "frame")?.frame;
        let s = f
            .streams
            .get(stream)
            .ok_or_else(|| Failure::new(WifiStatus::OutOfRange, format!("stream {stream} of {}", f.streams.len())))?;
        if cap < s.len() {
            return Err(Failure::new(WifiStatus::BufferTooSmall, format!("{} samples needed, {cap} given", s.len())));
        }
        if iq.is_null() {
            return Err(Failure::new(WifiStatus::NullPointer, "iq is NULL"));
        }
        let out = std::slice::from_raw_parts_mut(iq, 2 * s.len());
        for (pair, x) in out.chunks_exact_mut(2).zip(s) {
            pair[0] = x.re;
            pair[1] = x.im;
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn wifi_rx_options_default() -> WifiRxOptions {
    let c = RxConfig::default();
    WifiRxOptions {
        threshold: c.sync.threshold,
        min_plateau: c.sync.min_plateau,
        user_position: c.user_position,
        backoff: c.backoff,
    }
}

/// Create a receiver. `options` may be NULL for the defaults.
#[no_mangle]
pub unsafe extern "C" fn wifi_receiver_new(options: *const WifiRxOptions, out: *mut *mut WifiReceiver) -> WifiStatus {
    guard(|| {
        let o = options.as_ref().copied().unwrap_or_else(|| wifi_rx_options_default());
        if !(o.threshold > 0.0 && o.threshold < 1.0) || o.min_plateau == 0 || o.backoff > 16 || o.user_position > 1 {
            return Err(Failure::new(WifiStatus::InvalidArgument, format!("{o:?}")));
        }
        let mut config = RxConfig { user_position: o.user_position, backoff: o.backoff, ..RxConfig::default() };
        config.sync.threshold = o.threshold;
        config.sync.min_plateau = o.min_plateau;
        store(out, WifiReceiver { rx: Receiver::new(config) })
    })
}

#[no_mangle]
pub unsafe extern "C" fn wifi_receiver_free(rx: *mut WifiReceiver) {
    free(rx)
}

/// Decode every packet in a capture. `streams` points to `n_streams`
/// pointers, each to `n_samples` interleaved I/Q pairs.
#[no_mangle]
pub unsafe extern "C" fn wifi_receiver_decode(
    rx: *const WifiReceiver,
    streams: *const *const f64,
    n_streams: usize,
    n_samples: usize,
    out: *mut *mut WifiPackets,
) -> WifiStatus {
    guard(|| {
        let rx = &non_null(rx, "receiver")?.rx;
        if n_streams == 0 || n_streams > 4 {
            return Err(Failure::new(WifiStatus::InvalidArgument, format!("{n_streams} receive streams")));
        }
        let ptrs = slice(streams, n_streams, "streams")?;
        let samples: Vec<Vec<C64>> = ptrs
            .iter()
            .map(|&p| {
                let iq = slice(p, 2 * n_samples, "stream")?;
                Ok(iq.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect())
            })
            .collect::<Result<_, Failure>>()?;
        let refs: Vec<&[C64]> = samples.iter().map(Vec::as_slice).collect();
        store(out, WifiPackets { packets: rx.receive(&refs) })
    })
}

#[no_mangle]
pub unsafe extern "C" fn wifi_packets_free(packets: *mut WifiPackets) {
    free(packets)
}

/// Number of packets, 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn wifi_packets_count(packets: *const WifiPackets) -> usize {
    packets.as_ref().map_or(0, |p| p.packets.len())
}

unsafe fn packet<'a>(packets: *const WifiPackets, index: usize) -> Result<&'a ReceivedPacket, Failure> {
    let list = &non_null(packets, "packets")?.packets;
    list.get(index).ok_or_else(|| Failure::new(WifiStatus::OutOfRange, format!("packet {index} of {}", list.len())))
}

#[no_mangle]
pub unsafe extern "C" fn wifi_packets_info(
    packets: *const WifiPackets,
    index: usize,
    out: *mut WifiPacketInfo,
) -> WifiStatus {
    guard(|| {
        let p = packet(packets, index)?;
        if out.is_null() {
            return Err(Failure::new(WifiStatus::NullPointer, "out is NULL"));
        }
        *out = WifiPacketInfo {
            format: p.format.into(),
            mcs: p.mcs,
            crc_ok: p.crc_ok,
            signaled_length: p.signaled_length,
            payload_len: p.payload.len(),
            start: p.start,
            end: p.end,
            cfo_hz: p.diagnostics.overall_cfo * wifi_phy::params::SAMPLE_RATE / (2.0 * std::f64::consts::PI),
        };
        Ok(())
    })
}

/// Copy the payload (FCS removed) into `buf`. `written` receives the payload
/// length, also when the buffer is too small.
#[no_mangle]
pub unsafe extern "C" fn wifi_packets_payload(
    packets: *const WifiPackets,
    index: usize,
    buf: *mut u8,
    cap: usize,
    written: *mut usize,
) -> WifiStatus {
    guard(|| {
        let p = packet(packets, index)?;
        if !written.is_null() {
            *written = p.payload.len();
        }
        if cap < p.payload.len() {
            return Err(Failure::new(
                WifiStatus::BufferTooSmall,
                format!("{} octets needed, {cap} given", p.payload.len()),
            ));
        }
        if !p.payload.is_empty() {
            if buf.is_null() {
                return Err(Failure::new(WifiStatus::NullPointer, "buf is NULL"));
            }
            ptr::copy_nonoverlapping(p.payload.as_ptr(), buf, p.payload.len());
        }
        Ok(())
    })
}

/// Run a PDR sweep and write the CSV report to `csv_path`.
#[no_mangle]
pub unsafe extern "C" fn wifi_sweep_to_csv(spec: *const WifiSweepSpec, csv_path: *const c_char) -> WifiStatus {
    guard(|| {
        let s = non_null(spec, "spec")?;
        let path = CStr::from_ptr(non_null(csv_path, "csv_path")?)
            .to_str()
            .map_err(|_| Failure::new(WifiStatus::InvalidArgument, "csv_path is not UTF-8"))?;
        let format = match s.format {
            WifiFormat::Legacy => SweepFormat::Legacy,
            WifiFormat::Ht => SweepFormat::Ht,
            WifiFormat::Vht => SweepFormat::Vht,
            other => return Err(Failure::new(WifiStatus::InvalidArgument, format!("cannot sweep {other:?}"))),
        };
        if !(s.snr_step > 0.0) {
            return Err(Failure::new(WifiStatus::InvalidArgument, "snr_step must be positive"));
        }
        let spec = SweepSpec {
            format,
            mcs: slice(s.mcs, s.n_mcs, "mcs")?.to_vec(),
            snr_db: SweepSpec::snr_range(s.snr_start, s.snr_stop, s.snr_step),
            trials: s.trials,
            payload_octets: s.payload_octets,
            cfo_hz: s.cfo_hz,
            channel: match s.channel {
                WifiChannel::Ideal => ChannelModel::Ideal,
                WifiChannel::Awgn => ChannelModel::Awgn,
                WifiChannel::TgacB => ChannelModel::TgacB,
            },
            seed: s.seed,
        };
        let rows = pdr_sweep(&spec).map_err(|e| {
            let status = match e {
                SweepError::Tx(_) => WifiStatus::Tx,
                SweepError::Io(_) => WifiStatus::Io,
                SweepError::InvalidSpec(_) => WifiStatus::InvalidArgument,
            };
            Failure::new(status, e.to_string())
        })?;
        let io = |e: std::io::Error| Failure::new(WifiStatus::Io, format!("{path}: {e}"));
        let mut w = std::io::BufWriter::new(std::fs::File::create(Path::new(path)).map_err(io)?);
        write_csv(&rows, &mut w).map_err(io)?;
        w.flush().map_err(io)
    })
}
