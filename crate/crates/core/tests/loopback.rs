use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wifi_phy::params::PhyFormat;
use wifi_phy::rx::receive;
use wifi_phy::tx::{assemble_packet, PhyConfig};
use wifi_phy::C64;

fn padded(streams: &[Vec<C64>], lead: usize, trail: usize) -> Vec<Vec<C64>> {
    streams
        .iter()
        .map(|s| {
            let mut v = vec![C64::new(0.0, 0.0); lead];
            v.extend_from_slice(s);
            v.extend(vec![C64::new(0.0, 0.0); trail]);
            v
        })
        .collect()
}

fn payload(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random()).collect()
}

fn check(config: PhyConfig, lead: usize) {
    let frame = assemble_packet(&config, None).unwrap();
    let rx = receive(&padded(&frame.streams, lead, 200));
    assert_eq!(rx.len(), 1, "{:?} mcs {}", config.format, config.mcs);
    let p = &rx[0];
    assert!(p.crc_ok, "{:?} mcs {}: {:?}", config.format, config.mcs, p.diagnostics.evm_db);
    assert_eq!(p.format, config.format);
    assert_eq!(p.mcs, config.mcs);
    assert_eq!(p.payload, config.payload);
    assert_eq!(p.signaled_length, config.payload.len());
}

#[test]
fn legacy_every_mcs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for mcs in 0..8 {
        let lead = rng.random_range(0..200);
        check(PhyConfig::legacy(mcs, payload(&mut rng, 500)), lead);
        check(PhyConfig::legacy(mcs, payload(&mut rng, 37)).with_n_tx(2), lead);
    }
}

#[test]
fn ht_every_mcs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for mcs in 8..16 {
        let lead = rng.random_range(0..200);
        check(PhyConfig::ht(mcs, payload(&mut rng, 500)), lead);
    }
}

#[test]
fn vht_su_every_mcs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for mcs in 0..9 {
        let lead = rng.random_range(0..200);
        check(PhyConfig::vht_su(mcs, payload(&mut rng, 500)), lead);
        check(PhyConfig::vht_su(mcs, payload(&mut rng, 1)).with_n_tx(2), lead);
    }
}

#[test]
fn ndp_reports_csi() {
    let frame = assemble_packet(&PhyConfig::vht_ndp(), None).unwrap();
    let rx = receive(&padded(&frame.streams, 50, 200));
    assert_eq!(rx.len(), 1);
    assert_eq!(rx[0].format, PhyFormat::VhtNdp);
    assert!(rx[0].csi.is_some());
    assert!(rx[0].payload.is_empty());
}
