use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use wifi_phy_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { wifi_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

/// Build a frame and return its streams padded with `lead` zero samples,
/// interleaved I/Q.
fn transmit(format: WifiFormat, mcs: u8, n_tx: usize, payload: &[u8], lead: usize) -> Vec<Vec<f64>> {
    let mut frame = ptr::null_mut();
    let st = unsafe { wifi_frame_build(format, mcs, n_tx, payload.as_ptr(), payload.len(), &mut frame) };
    assert_eq!(st, WifiStatus::Ok);
    let (n, len) = unsafe { (wifi_frame_n_streams(frame), wifi_frame_len(frame)) };
    assert_eq!(n, n_tx);
    let streams = (0..n)
        .map(|s| {
            let mut iq = vec![0.0; 2 * (lead + len + 100)];
            let st = unsafe { wifi_frame_copy_stream(frame, s, iq[2 * lead..].as_mut_ptr(), len) };
            assert_eq!(st, WifiStatus::Ok);
            iq
        })
        .collect();
    unsafe { wifi_frame_free(frame) };
    streams
}

fn decode(streams: &[Vec<f64>], options: Option<&WifiRxOptions>) -> *mut WifiPackets {
    let mut rx = ptr::null_mut();
    let opts = options.map_or(ptr::null(), |o| o as *const _);
    assert_eq!(unsafe { wifi_receiver_new(opts, &mut rx) }, WifiStatus::Ok);
    let ptrs: Vec<*const f64> = streams.iter().map(|s| s.as_ptr()).collect();
    let mut packets = ptr::null_mut();
    let st = unsafe { wifi_receiver_decode(rx, ptrs.as_ptr(), ptrs.len(), streams[0].len() / 2, &mut packets) };
    assert_eq!(st, WifiStatus::Ok);
    unsafe { wifi_receiver_free(rx) };
    packets
}

#[test]
fn round_trip_through_the_c_interface() {
    let payload: Vec<u8> = (0..300u32).map(|i| (i * 37 % 251) as u8).collect();
    for (format, mcs, n_tx) in [(WifiFormat::Legacy, 5, 1), (WifiFormat::Ht, 12, 2), (WifiFormat::Vht, 8, 1)] {
        let streams = transmit(format, mcs, n_tx, &payload, 77);
        let packets = decode(&streams, None);
        assert_eq!(unsafe { wifi_packets_count(packets) }, 1);

        let mut info = std::mem::MaybeUninit::<WifiPacketInfo>::uninit();
        assert_eq!(unsafe { wifi_packets_info(packets, 0, info.as_mut_ptr()) }, WifiStatus::Ok);
        let info = unsafe { info.assume_init() };
        assert_eq!(info.format, format);
        assert_eq!(info.mcs, mcs);
        assert!(info.crc_ok);
        assert_eq!(info.payload_len, payload.len());
        assert!(info.cfo_hz.abs() < 1.0);

        let mut written = 0;
        let mut small = [0u8; 10];
        let st = unsafe { wifi_packets_payload(packets, 0, small.as_mut_ptr(), small.len(), &mut written) };
        assert_eq!(st, WifiStatus::BufferTooSmall);
        assert_eq!(written, payload.len());
        let mut out = vec![0u8; written];
        let st = unsafe { wifi_packets_payload(packets, 0, out.as_mut_ptr(), out.len(), &mut written) };
        assert_eq!(st, WifiStatus::Ok);
        assert_eq!(out, payload);
        unsafe { wifi_packets_free(packets) };
    }
}

#[test]
fn errors_carry_status_and_message() {
    let mut frame = ptr::null_mut();
    let st = unsafe { wifi_frame_build(WifiFormat::Legacy, 8, 1, ptr::null(), 0, &mut frame) };
    assert_eq!(st, WifiStatus::Tx);
    assert!(frame.is_null());
    assert!(last_error().to_lowercase().contains("mcs"), "{}", last_error());

    let st = unsafe { wifi_frame_build(WifiFormat::Legacy, 0, 1, ptr::null(), 5, &mut frame) };
    assert_eq!(st, WifiStatus::NullPointer);
    assert_eq!(last_error(), "payload is NULL");

    let st = unsafe { wifi_frame_build(WifiFormat::VhtMu, 0, 2, ptr::null(), 0, &mut frame) };
    assert_eq!(st, WifiStatus::InvalidArgument);

    let mut packets = ptr::null_mut();
    let st = unsafe { wifi_receiver_decode(ptr::null(), ptr::null(), 1, 0, &mut packets) };
    assert_eq!(st, WifiStatus::NullPointer);

    let bad = WifiRxOptions { threshold: 1.5, ..wifi_rx_options_default() };
    let mut rx = ptr::null_mut();
    assert_eq!(unsafe { wifi_receiver_new(&bad, &mut rx) }, WifiStatus::InvalidArgument);

    let mut info = std::mem::MaybeUninit::<WifiPacketInfo>::uninit();
    assert_eq!(unsafe { wifi_packets_info(ptr::null(), 0, info.as_mut_ptr()) }, WifiStatus::NullPointer);

    // Length query without a buffer.
    let n = unsafe { wifi_last_error(ptr::null_mut(), 0) };
    assert_eq!(n, last_error().len() + 1);

    unsafe {
        wifi_frame_free(ptr::null_mut());
        wifi_receiver_free(ptr::null_mut());
        wifi_packets_free(ptr::null_mut());
    }
}

#[test]
fn out_of_range_indices_are_rejected() {
    let streams = transmit(WifiFormat::Legacy, 0, 1, &[1, 2, 3], 10);
    let packets = decode(&streams, Some(&wifi_rx_options_default()));
    let mut info = std::mem::MaybeUninit::<WifiPacketInfo>::uninit();
    assert_eq!(unsafe { wifi_packets_info(packets, 1, info.as_mut_ptr()) }, WifiStatus::OutOfRange);
    unsafe { wifi_packets_free(packets) };

    let mut frame = ptr::null_mut();
    unsafe { wifi_frame_build(WifiFormat::Legacy, 0, 1, [0u8].as_ptr(), 1, &mut frame) };
    let mut iq = vec![0.0; 2 * 4000];
    assert_eq!(unsafe { wifi_frame_copy_stream(frame, 1, iq.as_mut_ptr(), 4000) }, WifiStatus::OutOfRange);
    assert_eq!(unsafe { wifi_frame_copy_stream(frame, 0, iq.as_mut_ptr(), 10) }, WifiStatus::BufferTooSmall);
    unsafe { wifi_frame_free(frame) };
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pdr.csv");
    let mcs = [0u8, 7];
    let spec = WifiSweepSpec {
        format: WifiFormat::Legacy,
        mcs: mcs.as_ptr(),
        n_mcs: mcs.len(),
        snr_start: 0.0,
        snr_stop: 20.0,
        snr_step: 20.0,
        trials: 5,
        payload_octets: 100,
        cfo_hz: 0.0,
        channel: WifiChannel::Awgn,
        seed: 3,
    };
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { wifi_sweep_to_csv(&spec, c_path.as_ptr()) }, WifiStatus::Ok);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("format,mcs,snr_db,trials,pdr,mean_cfo_err,timing_err"));
    assert_eq!(text.lines().count(), 1 + 4);

    let bad = WifiSweepSpec { format: WifiFormat::VhtNdp, ..spec };
    assert_eq!(unsafe { wifi_sweep_to_csv(&bad, c_path.as_ptr()) }, WifiStatus::InvalidArgument);
    let bad = WifiSweepSpec { trials: 0, ..spec };
    assert_eq!(unsafe { wifi_sweep_to_csv(&bad, c_path.as_ptr()) }, WifiStatus::InvalidArgument);
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(wifi_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_declares_the_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/wifi_phy.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "wifi_frame_build",
        "wifi_receiver_decode",
        "wifi_packets_payload",
        "wifi_sweep_to_csv",
        "wifi_last_error",
        "typedef struct WifiFrame WifiFrame",
        "WIFI_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }

    // Compile a small client against the header when a C compiler exists.
    let Ok(cc) = Command::new("cc").arg("--version").output() else { return };
    if !cc.status.success() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let client = dir.path().join("client.c");
    std::fs::write(
        &client,
        r#"#include "wifi_phy.h"
int main(void) {
    WifiFrame *frame = NULL;
    const uint8_t payload[3] = {1, 2, 3};
    WifiStatus st = wifi_frame_build(WIFI_FORMAT_LEGACY, 0, 1, payload, 3, &frame);
    WifiRxOptions opts = wifi_rx_options_default();
    WifiReceiver *rx = NULL;
    st = wifi_receiver_new(&opts, &rx);
    wifi_receiver_free(rx);
    wifi_frame_free(frame);
    return st == WIFI_STATUS_OK ? 0 : 1;
}
"#,
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&client)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
