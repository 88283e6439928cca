use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wifi_phy::channel::MimoChannelTaps;
use wifi_phy::mu::*;
use wifi_phy::params::{ht_csd_ns, SUBCARRIER_SPACING};
use wifi_phy::tx::{assemble_packet, MuUser, PhyConfig};
use wifi_phy::C64;

fn users(rng: &mut ChaCha8Rng, mcs: [u8; 2], len: usize) -> [MuUser; 2] {
    std::array::from_fn(|i| MuUser { mcs: mcs[i], payload: (0..len + 7 * i).map(|_| rng.random()).collect() })
}

#[test]
fn ndp_report_matches_injected_channel_up_to_timing_ramp() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ch = random_flat_channel(&mut rng);
    let s = run_sounding_session(&ch, &SessionConfig::default(), &mut rng).unwrap();
    // A residual timing offset inside the guard interval leaves a linear
    // phase ramp common to both transmit antennas.
    for (i, r) in s.reports.iter().enumerate() {
        let ratio = |k: i32, a: usize| {
            let ramp =
                C64::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 * SUBCARRIER_SPACING * ht_csd_ns(1) * 1e-9);
            let want = [ch.taps[i][0][0] / 2f64.sqrt(), ch.taps[i][1][0] * ramp / 2f64.sqrt()];
            r.row(k)[a] / want[a]
        };
        let step = ratio(2, 0) / ratio(1, 0);
        for &k in &r.subcarriers {
            let q = ratio(k, 0);
            assert!((q.norm() - 1.0).abs() < 1e-9, "station {i} k {k} |ratio| {}", q.norm());
            assert!((ratio(k, 1) - q).norm() < 1e-9, "station {i} k {k}");
            if k > 1 {
                assert!((q / ratio(k - 1, 0) - step).norm() < 1e-9, "station {i} k {k} ramp not linear");
            }
        }
    }
    assert_eq!(s.reports[0].sequence, s.reports[1].sequence);
    assert!((s.feedback_times_s[1] - s.feedback_times_s[0] - 1e-3).abs() < 1e-12);
}

#[test]
fn perfect_csi_nulls_and_decodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let ch = random_flat_channel(&mut rng);
        let s = run_sounding_session(&ch, &SessionConfig::default(), &mut rng).unwrap();
        let u = users(&mut rng, [3, 5], 300);
        let out = run_mu_transmission(u.clone(), &s.steering, &ch, 30.0, 80, &mut rng).unwrap();
        assert!(out.leakage_db.iter().all(|l| *l < -80.0), "{:?}", out.leakage_db);
        let noiseless = run_mu_transmission(u.clone(), &s.steering, &ch, f64::INFINITY, 80, &mut rng).unwrap();
        for i in 0..2 {
            assert!(noiseless.delivered(i, &u[i].payload), "station {i}");
        }
    }
}

#[test]
fn data_frame_is_not_an_ndp() {
    let f = assemble_packet(&PhyConfig::legacy(0, vec![1, 2, 3]), None).unwrap();
    let mut s = vec![C64::new(0.0, 0.0); 50];
    s.extend(&f.streams[0]);
    s.extend(vec![C64::new(0.0, 0.0); 100]);
    assert!(matches!(measure_ndp_channel(&[&s], 0, 0), Err(MuError::NotAnNdp(_))));
}

#[test]
fn dead_channel_fails_sounding() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zero = MimoChannelTaps::flat(&[vec![C64::new(0.0, 0.0); 2], vec![C64::new(0.0, 0.0); 2]]);
    assert!(matches!(
        run_sounding_session(&zero, &SessionConfig::default(), &mut rng),
        Err(MuError::SoundingFailed { .. })
    ));
}

#[test]
fn identical_channels_leak() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let row = vec![C64::new(0.8, 0.1), C64::new(-0.3, 0.5)];
    let ch = MimoChannelTaps::flat(&[row.clone(), row]);
    let s = run_sounding_session(&ch, &SessionConfig::default(), &mut rng).unwrap();
    let leak = cross_user_leakage_db(&ch, &s.steering);
    assert!(leak.iter().all(|l| *l > -10.0), "{leak:?}");
}

#[test]
fn csi_error_raises_leakage() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ch = random_flat_channel(&mut rng);
    let cfg = SessionConfig { csi_error_db: Some(-20.0), ..SessionConfig::default() };
    let s = run_sounding_session(&ch, &cfg, &mut rng).unwrap();
    let leak = cross_user_leakage_db(&ch, &s.steering);
    assert!(leak.iter().all(|l| *l > -60.0 && *l < 0.0), "{leak:?}");
}
