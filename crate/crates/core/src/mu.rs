//! Two-user downlink MU-MIMO: NDP sounding, CSI feedback, zero-forcing
//! weights and precoded transmission.
//!
//! Reported CSI includes the transmitter's cyclic shift and 1/sqrt(2)
//! scaling, since the NDP passes through the same per-antenna chain as the
//! precoded data. Weights computed from it therefore null exactly.

use crate::channel::{complex_gaussian, propagate, ChannelError, MimoChannelTaps};
use crate::ofdm::apply_cyclic_shift;
use crate::params::{bin, ht_csd_ns, PhyFormat, SubcarrierMap, FFT_SIZE, SAMPLE_RATE};
use crate::rx::{ChannelEstimate, ReceivedPacket, Receiver, RxConfig};
use crate::tx::{assemble_packet, MuUser, PhyConfig, SteeringMatrix, TxError};
use crate::C64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MuError {
    #[error("received frame is a {0}, not a null data packet")]
    NotAnNdp(PhyFormat),
    #[error("no packet detected")]
    NothingDetected,
    #[error("station {station} failed NDP detection: {reason}")]
    SoundingFailed { station: usize, reason: String },
    #[error("channel norm below threshold on subcarriers {0:?}")]
    DegenerateChannel(Vec<i32>),
    #[error("CSI reports cover different subcarriers or soundings")]
    CsiMismatch,
    #[error(transparent)]
    Tx(#[from] TxError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Uncompressed CSI from one station: `[H1, H2]` per subcarrier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsiReport {
    pub station_id: usize,
    pub sequence: u32,
    pub subcarriers: Vec<i32>,
    /// Indexed by FFT bin; zero off the occupied set.
    pub h: Vec<[C64; 2]>,
}

impl CsiReport {
    /// Report from receive antenna 0 of a sounding estimate.
    pub fn from_estimate(est: &ChannelEstimate, station_id: usize, sequence: u32) -> Self {
        let h = (0..FFT_SIZE).map(|b| [est.h[0][0][b], est.h[0][1][b]]).collect();
        CsiReport { station_id, sequence, subcarriers: est.subcarriers.clone(), h }
    }

    pub fn row(&self, k: i32) -> [C64; 2] {
        self.h[bin(k)]
    }
}

/// Decode the first packet in a station capture and return its sounding
/// report.
pub fn measure_ndp_channel(station_rx: &[&[C64]], station_id: usize, sequence: u32) -> Result<CsiReport, MuError> {
    let pkt =
        Receiver::new(RxConfig::default()).receive(station_rx).into_iter().next().ok_or(MuError::NothingDetected)?;
    match (&pkt.format, &pkt.csi) {
        (PhyFormat::VhtNdp, Some(est)) => Ok(CsiReport::from_estimate(est, station_id, sequence)),
        (f, _) => Err(MuError::NotAnNdp(*f)),
    }
}

/// Norm below which a station's channel row is treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ZfWeights {
    pub steering: SteeringMatrix,
    /// Subcarriers whose weights were zeroed.
    pub degenerate: Vec<i32>,
}

/// Zero-forcing columns: column 1 = [-H2, H1] of station 2, column 2 =
/// [-H2, H1] of station 1, each normalized. Subcarriers where a station's
/// channel vanishes get zero weights and are listed in `degenerate`.
pub fn zf_weights_flagged(csi_sta1: &CsiReport, csi_sta2: &CsiReport) -> Result<ZfWeights, MuError> {
    if csi_sta1.subcarriers != csi_sta2.subcarriers || csi_sta1.sequence != csi_sta2.sequence {
        return Err(MuError::CsiMismatch);
    }
    let zero = C64::new(0.0, 0.0);
    let mut steering = SteeringMatrix { q: vec![[[zero; 2]; 2]; FFT_SIZE] };
    let mut degenerate = Vec::new();
    for &k in &csi_sta1.subcarriers {
        let mut cols = [[zero; 2]; 2];
        let mut bad = false;
        for (u, other) in [(0, csi_sta2), (1, csi_sta1)] {
            let [h1, h2] = other.row(k);
            let norm = (h1.norm_sqr() + h2.norm_sqr()).sqrt();
            if norm < DEGENERATE_NORM {
                bad = true;
            } else {
                cols[u] = [-h2 / norm, h1 / norm];
            }
        }
        if bad {
            degenerate.push(k);
            continue;
        }
        let q = &mut steering.q[bin(k)];
        for a in 0..2 {
            for u in 0..2 {
                q[a][u] = cols[u][a];
            }
        }
    }
    Ok(ZfWeights { steering, degenerate })
}

/// Zero-forcing steering matrix; fails if any subcarrier is degenerate.
pub fn compute_zf_weights(csi_sta1: &CsiReport, csi_sta2: &CsiReport) -> Result<SteeringMatrix, MuError> {
    let w = zf_weights_flagged(csi_sta1, csi_sta2)?;
    if !w.degenerate.is_empty() {
        return Err(MuError::DegenerateChannel(w.degenerate));
    }
    Ok(w.steering)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    /// SNR at the stations during sounding; infinity for noiseless CSI.
    pub sounding_snr_db: f64,
    /// Wait before each station's feedback, seconds.
    pub feedback_delay_s: [f64; 2],
    /// Relative power of Gaussian error added to the fed-back CSI, dB.
    pub csi_error_db: Option<f64>,
    pub sequence: u32,
    /// Idle samples before the frame in each capture.
    pub lead: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            sounding_snr_db: f64::INFINITY,
            feedback_delay_s: [0.0, 1e-3],
            csi_error_db: None,
            sequence: 0,
            lead: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundingReport {
    pub steering: SteeringMatrix,
    pub reports: [CsiReport; 2],
    pub degenerate: Vec<i32>,
    /// Arrival time of each feedback message after the NDP starts, seconds.
    pub feedback_times_s: [f64; 2],
}

/// Sound the channel with an NDP, collect CSI from both stations after
/// their feedback delays and compute zero-forcing weights.
pub fn run_sounding_session<R: Rng + ?Sized>(
    channel: &MimoChannelTaps,
    config: &SessionConfig,
    rng: &mut R,
) -> Result<SoundingReport, MuError> {
    let ndp = assemble_packet(&PhyConfig::vht_ndp(), None)?;
    let rx = propagate(&ndp.streams, channel, config.lead, 200, 0.0, config.sounding_snr_db, rng)?;
    let ndp_duration = ndp.len() as f64 / SAMPLE_RATE;
    let mut reports = Vec::with_capacity(2);
    for (station, capture) in rx.iter().take(2).enumerate() {
        let mut r = measure_ndp_channel(&[capture.as_slice()], station, config.sequence)
            .map_err(|e| MuError::SoundingFailed { station, reason: e.to_string() })?;
        if let Some(db) = config.csi_error_db {
            perturb_csi(&mut r, db, rng);
        }
        reports.push(r);
    }
    let reports: [CsiReport; 2] = reports.try_into().map_err(|_| MuError::SoundingFailed {
        station: 1,
        reason: "channel has fewer than two receive antennas".into(),
    })?;
    let w = zf_weights_flagged(&reports[0], &reports[1])?;
    Ok(SoundingReport {
        steering: w.steering,
        reports,
        degenerate: w.degenerate,
        feedback_times_s: [ndp_duration + config.feedback_delay_s[0], ndp_duration + config.feedback_delay_s[1]],
    })
}

fn perturb_csi<R: Rng + ?Sized>(r: &mut CsiReport, error_db: f64, rng: &mut R) {
    let n = r.subcarriers.len().max(1) as f64;
    let p: f64 =
        r.subcarriers.iter().map(|&k| r.row(k).iter().map(|x| x.norm_sqr()).sum::<f64>()).sum::<f64>() / (2.0 * n);
    let var = p * 10f64.powf(error_db / 10.0);
    for &k in &r.subcarriers.clone() {
        for x in r.h[bin(k)].iter_mut() {
            *x += complex_gaussian(rng, var);
        }
    }
}

/// Equivalent channel of each (station, user stream) on subcarrier k with
/// the transmitter's cyclic shift and antenna scaling: `g[station][user]`.
pub fn equivalent_channel(channel: &MimoChannelTaps, steering: &SteeringMatrix, k: i32) -> [[C64; 2]; 2] {
    let mut ramp = [[C64::new(0.0, 0.0); FFT_SIZE]; 2];
    for (a, r) in ramp.iter_mut().enumerate() {
        r[bin(k)] = C64::new(1.0 / 2f64.sqrt(), 0.0);
        apply_cyclic_shift(r, ht_csd_ns(a));
    }
    let q = steering.at(k);
    std::array::from_fn(|i| {
        std::array::from_fn(|u| (0..2).map(|a| channel.frequency_response(i, a, k) * ramp[a][bin(k)] * q[a][u]).sum())
    })
}

/// Interference-to-signal ratio at each station over the data subcarriers,
/// from the true channel and the applied weights.
pub fn cross_user_leakage_db(channel: &MimoChannelTaps, steering: &SteeringMatrix) -> [f64; 2] {
    let mut own = [0.0; 2];
    let mut other = [0.0; 2];
    for &k in &SubcarrierMap::ht().data_indices {
        let g = equivalent_channel(channel, steering, k);
        for i in 0..2 {
            own[i] += g[i][i].norm_sqr();
            other[i] += g[i][1 - i].norm_sqr();
        }
    }
    std::array::from_fn(|i| if own[i] > 0.0 { 10.0 * (other[i] / own[i]).max(1e-300).log10() } else { f64::INFINITY })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuOutcome {
    /// Packet decoded by each station, if any.
    pub packets: [Option<ReceivedPacket>; 2],
    pub leakage_db: [f64; 2],
}

impl MuOutcome {
    /// Whether station `i` recovered `payload` with a passing FCS.
    pub fn delivered(&self, i: usize, payload: &[u8]) -> bool {
        self.packets[i].as_ref().is_some_and(|p| p.crc_ok && p.payload == payload)
    }
}

/// Transmit one precoded MU frame and decode it at both stations.
pub fn run_mu_transmission<R: Rng + ?Sized>(
    users: [MuUser; 2],
    steering: &SteeringMatrix,
    channel: &MimoChannelTaps,
    snr_db: f64,
    lead: usize,
    rng: &mut R,
) -> Result<MuOutcome, MuError> {
    let frame = assemble_packet(&PhyConfig::vht_mu(users), Some(steering))?;
    let rx = propagate(&frame.streams, channel, lead, 200, 0.0, snr_db, rng)?;
    let packets: [Option<ReceivedPacket>; 2] = std::array::from_fn(|i| {
        let receiver = Receiver::new(RxConfig { user_position: i, ..RxConfig::default() });
        receiver.receive(&[rx[i].as_slice()]).into_iter().find(|p| p.format == PhyFormat::VhtMu)
    });
    Ok(MuOutcome { packets, leakage_db: cross_user_leakage_db(channel, steering) })
}

/// Random flat 2x2 channel with unit-variance Rayleigh entries.
pub fn random_flat_channel<R: Rng + ?Sized>(rng: &mut R) -> MimoChannelTaps {
    let h: Vec<Vec<C64>> = (0..2).map(|_| (0..2).map(|_| complex_gaussian(rng, 1.0)).collect()).collect();
    MimoChannelTaps::flat(&h)
}
