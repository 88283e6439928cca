//! 64-point OFDM modulation and demodulation.
//!
//! Spectra are `[C64; 64]` in FFT bin order (see [`crate::params::bin`]).
//! The transmitter scales each field by `1/sqrt(n_tones)` so a field with
//! unit-energy tones has unit mean sample power; the receiver undoes exactly
//! that factor, so an ideal channel returns the transmitted tone values.

use crate::params::{FFT_SIZE, GI_SAMPLES, SUBCARRIER_SPACING, SYMBOL_SAMPLES};
use crate::C64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

pub type Spectrum = [C64; FFT_SIZE];

pub const ZERO_SPECTRUM: Spectrum = [C64::new(0.0, 0.0); FFT_SIZE];

/// Largest cyclic shift magnitude accepted, one FFT period.
pub const MAX_SHIFT_NS: f64 = 3200.0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("cyclic shift {0} ns outside (-3200, 3200)")]
pub struct BadShift(pub f64);

#[derive(Clone)]
pub struct Ofdm {
    ifft: Arc<dyn Fft<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl Default for Ofdm {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for Ofdm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Ofdm")
    }
}

/// Multiply tone k by exp(-j 2 pi k dF T_cs), the frequency-domain form of a
/// cyclic delay of `shift_ns`.
pub fn apply_cyclic_shift(spectrum: &mut Spectrum, shift_ns: f64) {
    if shift_ns == 0.0 {
        return;
    }
    for (b, x) in spectrum.iter_mut().enumerate() {
        let k = if b < FFT_SIZE / 2 { b as f64 } else { b as f64 - FFT_SIZE as f64 };
        let phase = -2.0 * PI * k * SUBCARRIER_SPACING * shift_ns * 1e-9;
        *x *= C64::from_polar(1.0, phase);
    }
}

impl Ofdm {
    pub fn new() -> Self {
        let mut planner = FftPlanner::new();
        Ofdm { ifft: planner.plan_fft_inverse(FFT_SIZE), fft: planner.plan_fft_forward(FFT_SIZE) }
    }

    /// Time-domain body (64 samples) of `spectrum` after a cyclic shift,
    /// scaled by `scale / sqrt(n_tones)`.
    pub fn body(&self, spectrum: &Spectrum, shift_ns: f64, n_tones: usize, scale: f64) -> Result<Spectrum, BadShift> {
        if !(shift_ns.abs() < MAX_SHIFT_NS) {
            return Err(BadShift(shift_ns));
        }
        let mut buf = *spectrum;
        apply_cyclic_shift(&mut buf, shift_ns);
        self.ifft.process(&mut buf);
        let g = scale / (n_tones as f64).sqrt();
        for x in buf.iter_mut() {
            *x *= g;
        }
        Ok(buf)
    }

    /// One 80-sample OFDM symbol: the body with its last 16 samples prepended.
    pub fn modulate(
        &self,
        spectrum: &Spectrum,
        shift_ns: f64,
        n_tones: usize,
        scale: f64,
    ) -> Result<Vec<C64>, BadShift> {
        let body = self.body(spectrum, shift_ns, n_tones, scale)?;
        let mut out = Vec::with_capacity(SYMBOL_SAMPLES);
        out.extend_from_slice(&body[FFT_SIZE - GI_SAMPLES..]);
        out.extend_from_slice(&body);
        Ok(out)
    }

    /// Spectrum of the 64 samples starting at `body[0]`, normalized for a
    /// field transmitted with `n_tones` occupied tones.
    pub fn demodulate(&self, body: &[C64], n_tones: usize) -> Spectrum {
        let mut buf = [C64::new(0.0, 0.0); FFT_SIZE];
        buf.copy_from_slice(&body[..FFT_SIZE]);
        self.fft.process(&mut buf);
        let g = (n_tones as f64).sqrt() / FFT_SIZE as f64;
        for x in buf.iter_mut() {
            *x *= g;
        }
        buf
    }
}

/// Convenience wrapper around [`Ofdm::modulate`] with a fresh plan.
pub fn ofdm_modulate(spectrum: &Spectrum, cyclic_shift_ns: f64, n_tones: usize) -> Result<Vec<C64>, BadShift> {
    Ofdm::new().modulate(spectrum, cyclic_shift_ns, n_tones, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{bin, shift_ns_to_samples};

    fn random_spectrum(seed: u64) -> Spectrum {
        let mut s = ZERO_SPECTRUM;
        let mut x = seed;
        for k in -26i32..=26 {
            if k == 0 {
                continue;
            }
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((x >> 33) as f64 / (1u64 << 31) as f64) * 2.0 * PI;
            s[bin(k)] = C64::from_polar(1.0, a);
        }
        s
    }

    #[test]
    fn zero_spectrum_gives_zero_samples() {
        let out = ofdm_modulate(&ZERO_SPECTRUM, 0.0, 52).unwrap();
        assert_eq!(out.len(), 80);
        assert!(out.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn guard_interval_is_cyclic_prefix() {
        let out = ofdm_modulate(&random_spectrum(1), 0.0, 52).unwrap();
        for i in 0..16 {
            assert_eq!(out[i], out[64 + i]);
        }
    }

    #[test]
    fn shift_equals_circular_rotation() {
        let s = random_spectrum(2);
        let plain = ofdm_modulate(&s, 0.0, 52).unwrap();
        let shifted = ofdm_modulate(&s, -200.0, 52).unwrap();
        let d = -shift_ns_to_samples(-200.0) as usize;
        assert_eq!(d, 4);
        for n in 0..64 {
            let expect = plain[16 + (n + d) % 64];
            assert!((shifted[16 + n] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn demodulate_inverts_modulate_and_shows_ramp() {
        let o = Ofdm::new();
        let s = random_spectrum(3);
        let out = o.modulate(&s, -400.0, 52, 1.0).unwrap();
        let back = o.demodulate(&out[16..], 52);
        for k in -26i32..=26 {
            let ramp = C64::from_polar(1.0, -2.0 * PI * k as f64 * SUBCARRIER_SPACING * -400e-9);
            assert!((back[bin(k)] - s[bin(k)] * ramp).norm() < 1e-9);
        }
    }

    #[test]
    fn unit_power_with_full_tones() {
        let out = ofdm_modulate(&random_spectrum(4), 0.0, 52).unwrap();
        let p: f64 = out[16..].iter().map(|x| x.norm_sqr()).sum::<f64>() / 64.0;
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_shift() {
        assert_eq!(ofdm_modulate(&ZERO_SPECTRUM, -3200.0, 52), Err(BadShift(-3200.0)));
    }
}
