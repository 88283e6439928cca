//! Seedable impairments: AWGN, carrier frequency offset and MIMO FIR channels.

use crate::params::{FFT_SIZE, SAMPLE_RATE};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("channel expects {expected} transmit streams, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub fn mean_power(samples: &[C64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|x| x.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Circular complex Gaussian sample with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// Noise variance giving `snr_db` against `signal_power_ref`.
pub fn noise_variance(snr_db: f64, signal_power_ref: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        signal_power_ref / 10f64.powf(snr_db / 10.0)
    }
}

/// Add noise in place. `snr_db = f64::INFINITY` leaves the samples untouched
/// and draws nothing from `rng`.
pub fn awgn_in_place<R: Rng + ?Sized>(samples: &mut [C64], snr_db: f64, signal_power_ref: f64, rng: &mut R) {
    let var = noise_variance(snr_db, signal_power_ref);
    if var == 0.0 {
        return;
    }
    for x in samples.iter_mut() {
        *x += complex_gaussian(rng, var);
    }
}

pub fn awgn<R: Rng + ?Sized>(samples: &[C64], snr_db: f64, signal_power_ref: f64, rng: &mut R) -> Vec<C64> {
    let mut out = samples.to_vec();
    awgn_in_place(&mut out, snr_db, signal_power_ref, rng);
    out
}

/// Rotate by exp(j 2 pi f n / fs), n counted from the first sample.
pub fn apply_cfo(samples: &[C64], f_hz: f64) -> Vec<C64> {
    let w = 2.0 * PI * f_hz / SAMPLE_RATE;
    samples.iter().enumerate().map(|(n, x)| x * C64::from_polar(1.0, w * n as f64)).collect()
}

/// Sample-spaced FIR taps for every (rx, tx) pair: `taps[rx][tx][delay]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoChannelTaps {
    pub taps: Vec<Vec<Vec<C64>>>,
    pub seed: Option<u64>,
}

impl MimoChannelTaps {
    /// Antenna i connected to antenna i, nothing else.
    pub fn identity(n: usize) -> Self {
        Self::flat(
            &(0..n).map(|r| (0..n).map(|t| C64::new((r == t) as u8 as f64, 0.0)).collect()).collect::<Vec<Vec<C64>>>(),
        )
    }

    /// Single-tap channel with gains `h[rx][tx]`.
    pub fn flat(h: &[Vec<C64>]) -> Self {
        MimoChannelTaps { taps: h.iter().map(|row| row.iter().map(|&g| vec![g]).collect()).collect(), seed: None }
    }

    pub fn n_rx(&self) -> usize {
        self.taps.len()
    }

    pub fn n_tx(&self) -> usize {
        self.taps.first().map_or(0, |r| r.len())
    }

    /// Frequency response of one pair on subcarrier `k`.
    pub fn frequency_response(&self, rx: usize, tx: usize, k: i32) -> C64 {
        self.taps[rx][tx]
            .iter()
            .enumerate()
            .map(|(d, h)| h * C64::from_polar(1.0, -2.0 * PI * k as f64 * d as f64 / FFT_SIZE as f64))
            .sum()
    }

    /// Sum of tap powers of one pair.
    pub fn pair_power(&self, rx: usize, tx: usize) -> f64 {
        self.taps[rx][tx].iter().map(|h| h.norm_sqr()).sum()
    }
}

/// Convolve each transmit stream with its taps and sum per receive antenna.
/// Outputs have the input length; the channel tail past the end is dropped.
pub fn apply_mimo_fir(streams: &[Vec<C64>], taps: &MimoChannelTaps) -> Result<Vec<Vec<C64>>, ChannelError> {
    if streams.len() != taps.n_tx() {
        return Err(ChannelError::DimensionMismatch { expected: taps.n_tx(), got: streams.len() });
    }
    let len = streams.iter().map(|s| s.len()).max().unwrap_or(0);
    let mut out = vec![vec![C64::new(0.0, 0.0); len]; taps.n_rx()];
    for (r, row) in taps.taps.iter().enumerate() {
        for (t, h) in row.iter().enumerate() {
            let x = &streams[t];
            for (d, g) in h.iter().enumerate() {
                if *g == C64::new(0.0, 0.0) {
                    continue;
                }
                for n in d..x.len() {
                    out[r][n] += g * x[n - d];
                }
            }
        }
    }
    Ok(out)
}

/// Power-delay profile of the Model B approximation: an exponential profile
/// sampled at 50 ns and truncated at 80 ns excess delay. With two taps the
/// rms delay spread is 50 ns * sqrt(0.9 * 0.1) = 15 ns.
pub const MODEL_B_PDP: [f64; 2] = [0.9, 0.1];

/// RMS delay spread in seconds of a sample-spaced power-delay profile.
pub fn rms_delay_spread(pdp: &[f64]) -> f64 {
    let ts = 1.0 / SAMPLE_RATE;
    let total: f64 = pdp.iter().sum();
    let mean: f64 = pdp.iter().enumerate().map(|(d, p)| p * d as f64 * ts).sum::<f64>() / total;
    let second: f64 = pdp.iter().enumerate().map(|(d, p)| p * (d as f64 * ts).powi(2)).sum::<f64>() / total;
    (second - mean * mean).sqrt()
}

/// Independent Rayleigh taps per (rx, tx) pair following [`MODEL_B_PDP`].
/// Unit expected power per pair.
pub fn tgac_model_b_taps(seed: u64, n_rx: usize, n_tx: usize) -> MimoChannelTaps {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let taps = (0..n_rx)
        .map(|_| (0..n_tx).map(|_| MODEL_B_PDP.iter().map(|&p| complex_gaussian(&mut rng, p)).collect()).collect())
        .collect();
    MimoChannelTaps { taps, seed: Some(seed) }
}

/// Fixed 2x2 coupling used for the "awgn" MIMO sweeps: unit row power with
/// partial cross-coupling, so two-stream detection sees real inter-stream
/// interference instead of two isolated SISO links.
pub fn static_mimo_mixing() -> MimoChannelTaps {
    let a = 0.8f64.sqrt();
    let b = 0.2f64.sqrt();
    MimoChannelTaps::flat(&[
        vec![C64::new(a, 0.0), C64::from_polar(b, 0.9)],
        vec![C64::from_polar(b, -2.1), C64::new(a, 0.0)],
    ])
}

/// Pad with `lead` and `trail` zeros, pass through the channel, rotate by
/// `cfo_hz` and add noise. Returns one capture per receive antenna; noise is
/// scaled to each antenna's own frame power.
pub fn propagate<R: Rng + ?Sized>(
    streams: &[Vec<C64>],
    channel: &MimoChannelTaps,
    lead: usize,
    trail: usize,
    cfo_hz: f64,
    snr_db: f64,
    rng: &mut R,
) -> Result<Vec<Vec<C64>>, ChannelError> {
    let padded: Vec<Vec<C64>> = streams
        .iter()
        .map(|s| {
            let mut v = vec![C64::new(0.0, 0.0); lead];
            v.extend_from_slice(s);
            v.resize(lead + s.len() + trail, C64::new(0.0, 0.0));
            v
        })
        .collect();
    let frame_len = streams.first().map_or(0, |s| s.len());
    let mut out = apply_mimo_fir(&padded, channel)?;
    for rx in out.iter_mut() {
        if cfo_hz != 0.0 {
            *rx = apply_cfo(rx, cfo_hz);
        }
        let p = mean_power(&rx[lead..lead + frame_len]);
        if p > 0.0 {
            awgn_in_place(rx, snr_db, p, rng);
        }
    }
    Ok(out)
}
