use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Seek, SeekFrom, Write};
use wifi_phy::channel::complex_gaussian;
use wifi_phy::harness::*;
use wifi_phy::params::{PhyFormat, SAMPLE_RATE};
use wifi_phy::tx::{assemble_packet, PhyConfig};
use wifi_phy::C64;

fn spec(format: SweepFormat, mcs: Vec<u8>, snr_db: Vec<f64>, trials: usize, channel: ChannelModel) -> SweepSpec {
    SweepSpec { format, mcs, snr_db, trials, payload_octets: 500, cfo_hz: 0.0, channel, seed: 42 }
}

fn csv(rows: &[SweepRow]) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(rows, &mut out).unwrap();
    out
}

#[test]
fn ideal_channel_delivers_everything() {
    for (format, mcs) in
        [(SweepFormat::Legacy, vec![0, 7]), (SweepFormat::Ht, vec![8, 15]), (SweepFormat::Vht, vec![0, 8])]
    {
        let rows =
            pdr_sweep(&SweepSpec { cfo_hz: 233e3, ..spec(format, mcs, vec![0.0], 50, ChannelModel::Ideal) }).unwrap();
        for r in rows {
            assert_eq!(r.pdr, 1.0, "{format} mcs {}", r.mcs);
            assert!(r.mean_cfo_err < 1.0, "{}", r.mean_cfo_err);
        }
    }
}

#[test]
fn robust_mcs_beats_fast_mcs_at_mid_snr() {
    let rows = pdr_sweep(&spec(SweepFormat::Legacy, vec![0, 7], vec![8.0], 60, ChannelModel::Awgn)).unwrap();
    assert!(rows[0].pdr >= rows[1].pdr, "{} vs {}", rows[0].pdr, rows[1].pdr);
    assert!(rows[0].pdr > 0.9);
}

#[test]
fn sweep_csv_is_deterministic_across_thread_counts() {
    let s = SweepSpec {
        cfo_hz: 233e3,
        ..spec(SweepFormat::Legacy, vec![2, 5], vec![4.0, 9.0, 14.0], 24, ChannelModel::TgacB)
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| csv(&pdr_sweep(&s).unwrap()))
    };
    let a = run(1);
    assert_eq!(a, run(4));
    assert_eq!(a, run(1));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert_eq!(text.lines().count(), 1 + 6);
}

#[test]
fn invalid_spec_fails_before_running() {
    let bad = spec(SweepFormat::Legacy, vec![9], vec![0.0], 10, ChannelModel::Awgn);
    assert!(matches!(pdr_sweep(&bad), Err(SweepError::Tx(_))));
    let bad = spec(SweepFormat::Legacy, vec![0], vec![0.0], 0, ChannelModel::Awgn);
    assert!(matches!(pdr_sweep(&bad), Err(SweepError::InvalidSpec(_))));
}

fn random_f32_streams(rng: &mut ChaCha8Rng, n_streams: usize, len: usize) -> Vec<Vec<C64>> {
    (0..n_streams)
        .map(|_| {
            (0..len).map(|_| C64::new(rng.random::<f32>() as f64 - 0.5, rng.random::<f32>() as f64 - 0.5)).collect()
        })
        .collect()
}

#[test]
fn iq_file_round_trips_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let streams = random_f32_streams(&mut rng, 2, 50_000);
    let header = IqHeader::for_streams(&streams, SAMPLE_RATE, serde_json::json!({"seed": 1, "note": "round trip"}));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.iq");
    write_iq(&path, &header, &streams).unwrap();
    let (h, back) = read_iq(&path).unwrap();
    assert_eq!(h, header);
    assert_eq!(back.len(), 2);
    for (a, b) in back.iter().zip(&streams) {
        assert!(a.iter().zip(b).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
    }
}

#[test]
fn iq_file_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let streams = random_f32_streams(&mut rng, 1, 100);
    let header = IqHeader::for_streams(&streams, SAMPLE_RATE, serde_json::Value::Null);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.iq");
    write_iq(&path, &header, &streams).unwrap();
    let full = std::fs::read(&path).unwrap();

    std::fs::write(&path, &full[..full.len() - 3]).unwrap();
    assert!(matches!(read_iq(&path), Err(IqError::TruncatedFile)));

    let mut f = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
    f.set_len(0).unwrap();
    f.write_all(&full).unwrap();
    f.seek(SeekFrom::Start(8)).unwrap();
    f.write_all(&2u16.to_le_bytes()).unwrap();
    drop(f);
    assert!(matches!(read_iq(&path), Err(IqError::VersionMismatch { found: 2, expected: 1 })));

    let mut bad = full.clone();
    bad[0] = b'X';
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(read_iq(&path), Err(IqError::BadMagic)));

    let wrong = IqHeader { count: 99, ..header };
    assert!(matches!(write_iq(&path, &wrong, &streams), Err(IqError::Inconsistent(_))));
}

fn capture_with(frames: &[PhyConfig], gap: usize) -> Vec<Vec<C64>> {
    let mut out = vec![vec![C64::new(0.0, 0.0); gap]; 2];
    for cfg in frames {
        let f = assemble_packet(cfg, None).unwrap();
        for (a, s) in out.iter_mut().enumerate() {
            s.extend(&f.streams[a.min(f.streams.len() - 1)]);
            s.extend(vec![C64::new(0.0, 0.0); gap]);
        }
    }
    out
}

#[test]
fn decode_file_reports_each_frame() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("three.iq");
    let frames = [
        PhyConfig::legacy(4, vec![1; 100]),
        PhyConfig::ht(11, vec![2; 300]).with_n_tx(2),
        PhyConfig::vht_su(6, vec![3; 200]),
    ];
    let streams = capture_with(&frames, 300);
    write_iq(&path, &IqHeader::for_streams(&streams, SAMPLE_RATE, serde_json::Value::Null), &streams).unwrap();
    let reports = decode_file(&path, &Default::default()).unwrap();
    assert_eq!(reports.len(), 3);
    assert!(reports.iter().all(|r| r.crc_ok));
    let formats: Vec<PhyFormat> = reports.iter().map(|r| r.format).collect();
    assert_eq!(formats, [PhyFormat::Legacy, PhyFormat::Ht, PhyFormat::VhtSu]);
    assert_eq!(reports[1].payload_hex, "02".repeat(300));

    let mut lines = Vec::new();
    write_json_lines(&reports, &mut lines).unwrap();
    let text = String::from_utf8(lines).unwrap();
    assert_eq!(text.lines().count(), 3);
    let back: PacketReport = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(back.mcs, 4);
}

#[test]
fn noise_only_file_has_no_reports() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let streams: Vec<Vec<C64>> =
        (0..2).map(|_| (0..100_000).map(|_| complex_gaussian(&mut rng, 1.0)).collect()).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noise.iq");
    write_iq(&path, &IqHeader::for_streams(&streams, SAMPLE_RATE, serde_json::Value::Null), &streams).unwrap();
    assert!(decode_file(&path, &Default::default()).unwrap().is_empty());
}

#[test]
fn ndp_file_yields_one_csi_report() {
    let streams = capture_with(&[PhyConfig::vht_ndp()], 200);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ndp.iq");
    write_iq(&path, &IqHeader::for_streams(&streams, SAMPLE_RATE, serde_json::Value::Null), &streams).unwrap();
    let reports = decode_file(&path, &Default::default()).unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].format, PhyFormat::VhtNdp);
    assert!(reports[0].payload_hex.is_empty());
    let csi = reports[0].csi.as_ref().unwrap();
    assert_eq!(csi.len(), 56);
    assert_eq!((csi[0].h.len(), csi[0].h[0].len()), (2, 2));
}

#[test]
fn mu_sessions_are_reproducible() {
    let s = MuSessionSpec { seed: 5, mcs: [2, 4], snr_db: 30.0, payload_octets: 200, sessions: 6, csi_error_db: None };
    let a = mu_sessions(&s).unwrap();
    assert_eq!(a, mu_sessions(&s).unwrap());
    assert_eq!(mu_pdr(&a), 1.0);
    assert!(a.iter().all(|r| r.leakage_db.iter().all(|l| *l < -80.0)));
}
