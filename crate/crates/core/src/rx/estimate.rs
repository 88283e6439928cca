//! Channel estimation, pilot phase tracking and zero-forcing detection.

use crate::ofdm::Spectrum;
use crate::params::{bin, htltf_value, lltf_value, SubcarrierMap, FFT_SIZE, PILOT_INDICES, P_INVERSE, P_MATRIX};
use crate::C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    /// Sum of all transmit paths as seen through the legacy preamble.
    LegacyEquivalent,
    /// Full rx x stream matrix from the HT-LTF.
    HtMimo,
    /// One user's equivalent channel from the VHT-LTF.
    VhtEquivalent,
    /// Per-antenna channel measured from a null data packet.
    Sounding,
}

/// Frequency response per (rx, tx stream, subcarrier). Values are stored
/// for all 64 bins and are zero outside `subcarriers`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub kind: EstimateKind,
    pub subcarriers: Vec<i32>,
    /// `h[rx][tx][bin]`.
    pub h: Vec<Vec<Vec<C64>>>,
}

impl ChannelEstimate {
    fn zeros(kind: EstimateKind, subcarriers: Vec<i32>, n_rx: usize, n_tx: usize) -> Self {
        ChannelEstimate { kind, subcarriers, h: vec![vec![vec![C64::new(0.0, 0.0); FFT_SIZE]; n_tx]; n_rx] }
    }

    pub fn n_rx(&self) -> usize {
        self.h.len()
    }

    pub fn n_tx(&self) -> usize {
        self.h.first().map_or(0, |r| r.len())
    }

    pub fn get(&self, rx: usize, tx: usize, k: i32) -> C64 {
        self.h[rx][tx][bin(k)]
    }

    /// 2x2 matrix `[rx][tx]` on subcarrier k.
    pub fn matrix(&self, k: i32) -> [[C64; 2]; 2] {
        let b = bin(k);
        [[self.h[0][0][b], self.h[0][1][b]], [self.h[1][0][b], self.h[1][1][b]]]
    }
}

fn ht_subcarriers() -> Vec<i32> {
    SubcarrierMap::ht().occupied()
}

/// Two-symbol L-LTF average per receive antenna:
/// H[k] = (Y1[k] + Y2[k]) / (2 L[k]).
pub fn estimate_legacy_channel(ltf1: &[Spectrum], ltf2: &[Spectrum]) -> ChannelEstimate {
    let ks = SubcarrierMap::legacy().occupied();
    let mut est = ChannelEstimate::zeros(EstimateKind::LegacyEquivalent, ks.clone(), ltf1.len(), 1);
    for (r, (y1, y2)) in ltf1.iter().zip(ltf2).enumerate() {
        for &k in &ks {
            let b = bin(k);
            est.h[r][0][b] = (y1[b] + y2[b]) / (2.0 * lltf_value(k));
        }
    }
    est
}

/// Per-tone noise variance from the difference of the two L-LTF symbols,
/// averaged over occupied tones and receive antennas.
pub fn legacy_noise_variance(ltf1: &[Spectrum], ltf2: &[Spectrum]) -> f64 {
    let ks = SubcarrierMap::legacy().occupied();
    let mut acc = 0.0;
    for (y1, y2) in ltf1.iter().zip(ltf2) {
        acc += ks.iter().map(|&k| (y1[bin(k)] - y2[bin(k)]).norm_sqr()).sum::<f64>();
    }
    acc / (2.0 * (ks.len() * ltf1.len()) as f64)
}

/// MIMO estimate from two HT/VHT-LTF symbols: `ltf[symbol][rx]`,
/// H = Z P^-1 / S on each subcarrier.
pub fn estimate_ht_mimo_channel(ltf: &[Vec<Spectrum>]) -> ChannelEstimate {
    mimo_estimate(ltf, EstimateKind::HtMimo)
}

/// Sounding estimate `[H1, H2]` per receive antenna from an NDP's LTFs.
pub fn estimate_sounding_channel(ltf: &[Vec<Spectrum>]) -> ChannelEstimate {
    mimo_estimate(ltf, EstimateKind::Sounding)
}

fn mimo_estimate(ltf: &[Vec<Spectrum>], kind: EstimateKind) -> ChannelEstimate {
    let ks = ht_subcarriers();
    let n_rx = ltf[0].len();
    let mut est = ChannelEstimate::zeros(kind, ks.clone(), n_rx, 2);
    for r in 0..n_rx {
        for s in 0..2 {
            for &k in &ks {
                let b = bin(k);
                let z: C64 = (0..2).map(|n| ltf[n][r][b] * P_INVERSE[n][s]).sum();
                est.h[r][s][b] = z / htltf_value(k);
            }
        }
    }
    est
}

/// Single-stream equivalent channel from the VHT-LTF.
///
/// With one LTF symbol this is Y / S. With two, user `user` despreads with
/// its row of P: H = sum_n P[user][n] Y_n / (2 S), which cancels the other
/// stream exactly.
pub fn estimate_vht_channel(ltf: &[Vec<Spectrum>], user: usize) -> ChannelEstimate {
    let ks = ht_subcarriers();
    let n_rx = ltf[0].len();
    let mut est = ChannelEstimate::zeros(EstimateKind::VhtEquivalent, ks.clone(), n_rx, 1);
    for r in 0..n_rx {
        for &k in &ks {
            let b = bin(k);
            let z = if ltf.len() == 1 {
                ltf[0][r][b]
            } else {
                (0..ltf.len()).map(|n| ltf[n][r][b] * P_MATRIX[user][n]).sum::<C64>() / ltf.len() as f64
            };
            est.h[r][0][b] = z / htltf_value(k);
        }
    }
    est
}

/// Common phase of a symbol: arg sum_r sum_p Y_r[p] conj(E_r[p]) where
/// `expected[r][p]` is the pilot each receive antenna should see.
pub fn common_phase(sym: &[Spectrum], expected: &[[C64; 4]]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for (y, e) in sym.iter().zip(expected) {
        for (j, &k) in PILOT_INDICES.iter().enumerate() {
            acc += y[bin(k)] * e[j].conj();
        }
    }
    acc.arg()
}

/// Remove the common pilot phase from a single-antenna symbol. Returns the
/// corrected spectrum and the removed phase.
pub fn pilot_phase_track(sym: &Spectrum, pilot_refs: &[f64; 4], estimate: &ChannelEstimate) -> (Spectrum, f64) {
    let expected: [C64; 4] = std::array::from_fn(|j| estimate.get(0, 0, PILOT_INDICES[j]) * pilot_refs[j]);
    let phi = common_phase(std::slice::from_ref(sym), &[expected]);
    let mut out = *sym;
    rotate(&mut out, -phi);
    (out, phi)
}

pub fn rotate(sym: &mut Spectrum, phase: f64) {
    if phase == 0.0 {
        return;
    }
    let r = C64::from_polar(1.0, phase);
    for x in sym.iter_mut() {
        *x *= r;
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("channel condition number {0:.3e} exceeds the limit")]
pub struct SingularChannel(pub f64);

pub const MAX_CONDITION: f64 = 1e8;

/// Precomputed 2x2 zero-forcing equalizer for one subcarrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZfMatrix {
    pub inverse: [[C64; 2]; 2],
    /// diag((H^H H)^-1): noise amplification per stream.
    pub noise_gain: [f64; 2],
}

/// Condition number (ratio of singular values) of a 2x2 matrix.
pub fn condition_number(h: &[[C64; 2]; 2]) -> f64 {
    let fro: f64 = h.iter().flatten().map(|x| x.norm_sqr()).sum();
    let det = (h[0][0] * h[1][1] - h[0][1] * h[1][0]).norm_sqr();
    let disc = (fro * fro / 4.0 - det).max(0.0).sqrt();
    let hi = fro / 2.0 + disc;
    let lo = fro / 2.0 - disc;
    if lo <= 0.0 || hi <= 0.0 {
        return f64::INFINITY;
    }
    (hi / lo).sqrt()
}

impl ZfMatrix {
    pub fn new(h: &[[C64; 2]; 2]) -> Result<Self, SingularChannel> {
        let cond = condition_number(h);
        if !(cond <= MAX_CONDITION) {
            return Err(SingularChannel(cond));
        }
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let inverse = [[h[1][1] / det, -h[0][1] / det], [-h[1][0] / det, h[0][0] / det]];
        let noise_gain =
            [inverse[0][0].norm_sqr() + inverse[0][1].norm_sqr(), inverse[1][0].norm_sqr() + inverse[1][1].norm_sqr()];
        Ok(ZfMatrix { inverse, noise_gain })
    }

    pub fn apply(&self, y: [C64; 2]) -> [C64; 2] {
        let m = &self.inverse;
        [m[0][0] * y[0] + m[0][1] * y[1], m[1][0] * y[0] + m[1][1] * y[1]]
    }
}

/// Zero-forcing solution (H^H H)^-1 H^H y and the per-stream noise
/// amplification.
pub fn detect_zf(y: [C64; 2], h: &[[C64; 2]; 2]) -> Result<([C64; 2], [f64; 2]), SingularChannel> {
    let z = ZfMatrix::new(h)?;
    Ok((z.apply(y), z.noise_gain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zf_identity_and_exact_inverse() {
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        let y = [c(0.3, -1.0), c(2.0, 0.5)];
        let (s, g) = detect_zf(y, &[[one, zero], [zero, one]]).unwrap();
        assert_eq!(s, y);
        assert_eq!(g, [1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let h: [[C64; 2]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| complex_gaussian(&mut rng, 1.0)));
            if condition_number(&h) > 100.0 {
                continue;
            }
            let x = [complex_gaussian(&mut rng, 1.0), complex_gaussian(&mut rng, 1.0)];
            let y = [h[0][0] * x[0] + h[0][1] * x[1], h[1][0] * x[0] + h[1][1] * x[1]];
            let (s, _) = detect_zf(y, &h).unwrap();
            assert!((s[0] - x[0]).norm() < 1e-9 && (s[1] - x[1]).norm() < 1e-9);
        }
    }

    #[test]
    fn zf_noise_gain_matches_gram_inverse() {
        let h = [[c(1.0, 0.5), c(-0.2, 0.3)], [c(0.4, -0.1), c(0.9, 0.0)]];
        let z = ZfMatrix::new(&h).unwrap();
        // Gram matrix and its inverse computed directly.
        let g = |i: usize, j: usize| h[0][i].conj() * h[0][j] + h[1][i].conj() * h[1][j];
        let det = (g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0)).re;
        assert!((z.noise_gain[0] - g(1, 1).re / det).abs() < 1e-12);
        assert!((z.noise_gain[1] - g(0, 0).re / det).abs() < 1e-12);
    }

    #[test]
    fn rank_one_is_singular() {
        let a = c(0.7, 0.2);
        let b = c(-0.1, 1.1);
        let h = [[a, b], [a * 2.0, b * 2.0]];
        assert!(detect_zf([a, b], &h).is_err());
        assert_eq!(condition_number(&[[c(0.0, 0.0); 2]; 2]), f64::INFINITY);
    }

    #[test]
    fn common_rotation_removed() {
        let est = estimate_legacy_channel(&[legacy_ltf()], &[legacy_ltf()]);
        let mut sym = crate::tx::data_symbol_spectrum(&[c(1.0, 0.0); 48], crate::params::PilotPattern::Legacy, 5, 0);
        let clean = sym;
        rotate(&mut sym, 0.1);
        let refs = crate::params::pilot_values(crate::params::PilotPattern::Legacy, 5, 0);
        let (out, phi) = pilot_phase_track(&sym, &refs, &est);
        assert!((phi - 0.1).abs() < 1e-12);
        for (a, b) in out.iter().zip(clean.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
        let (_, phi0) = pilot_phase_track(&clean, &refs, &est);
        assert!(phi0.abs() < 1e-12);
    }

    fn legacy_ltf() -> Spectrum {
        std::array::from_fn(|b| {
            let k = if b < 32 { b as i32 } else { b as i32 - 64 };
            c(lltf_value(k), 0.0)
        })
    }

    #[test]
    fn identity_legacy_estimate() {
        let est = estimate_legacy_channel(&[legacy_ltf()], &[legacy_ltf()]);
        for &k in &est.subcarriers {
            assert!((est.get(0, 0, k) - c(1.0, 0.0)).norm() < 1e-15);
        }
        assert_eq!(est.get(0, 0, 0), c(0.0, 0.0));
        assert_eq!(legacy_noise_variance(&[legacy_ltf()], &[legacy_ltf()]), 0.0);
    }

    #[test]
    fn two_symbol_average_halves_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 4000;
        let sigma2 = 0.1;
        let mut v1 = 0.0;
        let mut v2 = 0.0;
        for _ in 0..trials {
            let noisy = |rng: &mut ChaCha8Rng| -> Spectrum {
                let mut s = legacy_ltf();
                for x in s.iter_mut() {
                    *x += complex_gaussian(rng, sigma2);
                }
                s
            };
            let a = noisy(&mut rng);
            let b = noisy(&mut rng);
            let two = estimate_legacy_channel(&[a], &[b]);
            let one = estimate_legacy_channel(&[a], &[a]);
            v2 += (two.get(0, 0, 5) - c(1.0, 0.0)).norm_sqr();
            v1 += (one.get(0, 0, 5) - c(1.0, 0.0)).norm_sqr();
        }
        let ratio = v2 / v1;
        assert!((ratio - 0.5).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn mimo_estimate_inverts_spreading() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h: [[C64; 2]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| complex_gaussian(&mut rng, 1.0)));
        let ltf = crate::tx::build_mimo_ltf(2);
        // Received symbol n at rx r: sum_s h[r][s] X_s,n.
        let rx: Vec<Vec<Spectrum>> = (0..2)
            .map(|n| (0..2).map(|r| std::array::from_fn(|b| h[r][0] * ltf[n][0][b] + h[r][1] * ltf[n][1][b])).collect())
            .collect();
        let est = estimate_ht_mimo_channel(&rx);
        for &k in &est.subcarriers {
            for r in 0..2 {
                for s in 0..2 {
                    assert!((est.get(r, s, k) - h[r][s]).norm() < 1e-9);
                }
            }
        }
        // Each user's P-row despread isolates its own stream.
        for u in 0..2 {
            let e = estimate_vht_channel(&rx, u);
            assert!((e.get(0, 0, 9) - h[0][u]).norm() < 1e-9);
        }
        let noise: Vec<Vec<Spectrum>> = (0..2)
            .map(|_| (0..2).map(|_| std::array::from_fn(|_| complex_gaussian(&mut rng, 1.0))).collect())
            .collect();
        assert!(estimate_ht_mimo_channel(&noise).h.iter().flatten().flatten().all(|x| x.re.is_finite()));
    }
}
