use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{propagate, static_mimo_mixing, tgac_model_b_taps, MimoChannelTaps};
use crate::params::{PhyFormat, SAMPLE_RATE};
use crate::rx::Receiver;
use crate::tx::{assemble_packet, PhyConfig, TxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepFormat {
    Legacy,
    /// Two streams on two transmit and two receive antennas.
    Ht,
    /// Single-user, one stream.
    Vht,
}

impl SweepFormat {
    pub fn name(self) -> &'static str {
        match self {
            SweepFormat::Legacy => "legacy",
            SweepFormat::Ht => "ht",
            SweepFormat::Vht => "vht",
        }
    }

    fn phy_format(self) -> PhyFormat {
        match self {
            SweepFormat::Legacy => PhyFormat::Legacy,
            SweepFormat::Ht => PhyFormat::Ht,
            SweepFormat::Vht => PhyFormat::VhtSu,
        }
    }

    /// Transmit and receive antennas used by the sweep.
    pub fn antennas(self) -> usize {
        match self {
            SweepFormat::Ht => 2,
            _ => 1,
        }
    }

    pub fn config(self, mcs: u8, payload: Vec<u8>) -> PhyConfig {
        match self {
            SweepFormat::Legacy => PhyConfig::legacy(mcs, payload),
            SweepFormat::Ht => PhyConfig::ht(mcs, payload).with_n_tx(2),
            SweepFormat::Vht => PhyConfig::vht_su(mcs, payload),
        }
    }
}

impl fmt::Display for SweepFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepFormat {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "legacy" => Ok(SweepFormat::Legacy),
            "ht" => Ok(SweepFormat::Ht),
            "vht" => Ok(SweepFormat::Vht),
            other => Err(SweepError::InvalidSpec(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelModel {
    /// No noise, no multipath.
    Ideal,
    /// White noise; HT frames also pass a fixed 2x2 coupling matrix.
    Awgn,
    /// Two-tap TGac model B, a fresh realization per trial, plus noise.
    TgacB,
}

impl FromStr for ChannelModel {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ideal" => Ok(ChannelModel::Ideal),
            "awgn" => Ok(ChannelModel::Awgn),
            "tgac-b" | "tgac_b" => Ok(ChannelModel::TgacB),
            other => Err(SweepError::InvalidSpec(format!("unknown channel model {other:?}"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Tx(#[from] TxError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub format: SweepFormat,
    pub mcs: Vec<u8>,
    /// Sorted SNR grid in dB.
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub payload_octets: usize,
    pub cfo_hz: f64,
    pub channel: ChannelModel,
    pub seed: u64,
}

impl SweepSpec {
    /// Evenly spaced grid from `start` to `stop` inclusive.
    pub fn snr_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
        if step <= 0.0 || stop < start {
            return vec![start];
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + step * i as f64).collect()
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.trials == 0 {
            return Err(SweepError::InvalidSpec("trials must be at least 1".into()));
        }
        if self.mcs.is_empty() || self.snr_db.is_empty() {
            return Err(SweepError::InvalidSpec("empty MCS list or SNR grid".into()));
        }
        if self.snr_db.iter().any(|s| s.is_nan()) || self.snr_db.windows(2).any(|w| w[1] < w[0]) {
            return Err(SweepError::InvalidSpec("SNR grid must be sorted".into()));
        }
        if !self.cfo_hz.is_finite() {
            return Err(SweepError::InvalidSpec("CFO must be finite".into()));
        }
        for &m in &self.mcs {
            assemble_packet(&self.format.config(m, vec![0; self.payload_octets]), None)?;
        }
        Ok(())
    }
}

/// One (MCS, SNR) point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub format: SweepFormat,
    pub mcs: u8,
    pub snr_db: f64,
    pub trials: usize,
    pub delivered: usize,
    pub pdr: f64,
    /// Mean absolute CFO error in Hz over detected packets.
    pub mean_cfo_err: f64,
    /// Mean absolute fine-timing error in samples over detected packets.
    pub timing_err: f64,
}

pub const CSV_HEADER: &str = "format,mcs,snr_db,trials,pdr,mean_cfo_err,timing_err";

pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.format, r.mcs, r.snr_db, r.trials, r.pdr, r.mean_cfo_err, r.timing_err
        )?;
    }
    Ok(())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one trial, derived from its coordinates only.
pub fn trial_seed(master: u64, mcs: u8, snr_index: usize, trial: usize) -> u64 {
    let mut h = splitmix64(master);
    for v in [mcs as u64, snr_index as u64, trial as u64] {
        h = splitmix64(h ^ v);
    }
    h
}

struct TrialOutcome {
    delivered: bool,
    /// (|CFO error| in Hz, |timing error| in samples) when a packet was found.
    detected: Option<(f64, f64)>,
}

fn run_trial(spec: &SweepSpec, mcs: u8, snr_db: f64, seed: u64, rx: &Receiver) -> Result<TrialOutcome, SweepError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let payload: Vec<u8> = (0..spec.payload_octets).map(|_| rng.random()).collect();
    let frame = assemble_packet(&spec.format.config(mcs, payload.clone()), None)?;
    let n = spec.format.antennas();
    let (channel, snr) = match spec.channel {
        ChannelModel::Ideal => (MimoChannelTaps::identity(n), f64::INFINITY),
        ChannelModel::Awgn if n == 2 => (static_mimo_mixing(), snr_db),
        ChannelModel::Awgn => (MimoChannelTaps::identity(1), snr_db),
        ChannelModel::TgacB => (tgac_model_b_taps(rng.random(), n, n), snr_db),
    };
    let lead = rng.random_range(100..300);
    let streams = propagate(&frame.streams, &channel, lead, 200, spec.cfo_hz, snr, &mut rng)
        .map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
    let views: Vec<&[crate::C64]> = streams.iter().map(|s| s.as_slice()).collect();
    let packets = rx.receive(&views);
    let Some(p) = packets.first() else {
        return Ok(TrialOutcome { delivered: false, detected: None });
    };
    let cfo_err = (p.diagnostics.overall_cfo * SAMPLE_RATE / (2.0 * std::f64::consts::PI) - spec.cfo_hz).abs();
    let timing_err = (p.diagnostics.ltf_start as f64 - (lead + frame.lltf_symbol_start()) as f64).abs();
    let delivered = p.format == spec.format.phy_format() && p.crc_ok && p.payload == payload;
    Ok(TrialOutcome { delivered, detected: Some((cfo_err, timing_err)) })
}

/// Run every (MCS, SNR) point. Trials run in parallel but each draws from
/// its own seed, so the result does not depend on the thread count.
pub fn pdr_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, SweepError> {
    spec.validate()?;
    let rx = Receiver::default();
    let mut rows = Vec::with_capacity(spec.mcs.len() * spec.snr_db.len());
    for &mcs in &spec.mcs {
        for (si, &snr) in spec.snr_db.iter().enumerate() {
            let outcomes = (0..spec.trials)
                .into_par_iter()
                .map(|t| run_trial(spec, mcs, snr, trial_seed(spec.seed, mcs, si, t), &rx))
                .collect::<Result<Vec<_>, _>>()?;
            let delivered = outcomes.iter().filter(|o| o.delivered).count();
            let found: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o.detected).collect();
            let mean = |f: fn(&(f64, f64)) -> f64| {
                if found.is_empty() {
                    f64::NAN
                } else {
                    found.iter().map(f).sum::<f64>() / found.len() as f64
                }
            };
            rows.push(SweepRow {
                format: spec.format,
                mcs,
                snr_db: snr,
                trials: spec.trials,
                delivered,
                pdr: delivered as f64 / spec.trials as f64,
                mean_cfo_err: mean(|x| x.0),
                timing_err: mean(|x| x.1),
            });
        }
    }
    Ok(rows)
}

/// Wilson score interval of `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Rows of one MCS, sorted by SNR, never fall significantly: no later
/// point's 95% upper bound lies below an earlier point's lower bound.
pub fn pdr_non_decreasing(rows: &[&SweepRow]) -> bool {
    let ci: Vec<(f64, f64)> = rows.iter().map(|r| wilson_interval(r.delivered, r.trials, 1.96)).collect();
    (0..ci.len()).all(|i| (i + 1..ci.len()).all(|j| ci[j].1 >= ci[i].0))
}

/// First SNR at which the PDR reaches `target`, linearly interpolated from
/// the point before. `None` when the target is never reached.
pub fn snr_at_pdr(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let i = points.iter().position(|&(_, p)| p >= target)?;
    if i == 0 {
        return Some(points[0].0);
    }
    let (s0, p0) = points[i - 1];
    let (s1, p1) = points[i];
    Some(s0 + (target - p0) / (p1 - p0) * (s1 - s0))
}
