//! Symbol-level decoding: equalization to soft bits, SIG fields and format
//! classification.

use super::estimate::{common_phase, rotate, ChannelEstimate};
use crate::codec::{
    demap_llr_into, descramble_recovering_seed, punctured_len, CodecError, Interleaver, InterleaverKind, ViterbiDecoder,
};
use crate::ofdm::Spectrum;
use crate::params::{bin, pilot_values, CodeRate, Modulation, PilotPattern, SubcarrierMap, PILOT_INDICES};
use crate::signal::{LSig, SigError};
use crate::C64;

/// Equalized data points of one single-stream symbol with the noise
/// variance of each point.
#[derive(Debug, Clone, Default)]
pub struct Equalized {
    pub points: Vec<C64>,
    pub noise: Vec<f64>,
    /// Common phase removed by pilot tracking.
    pub phase: f64,
}

/// Pilot-track and equalize one symbol received on antenna `rx` through the
/// single-stream channel `est` (tx column 0).
pub fn equalize_siso(
    sym: &Spectrum,
    est: &ChannelEstimate,
    rx: usize,
    pilots: &[f64; 4],
    data: &[i32],
    noise_var: f64,
) -> Equalized {
    let h = &est.h[rx][0];
    let expected: [C64; 4] = std::array::from_fn(|j| h[bin(PILOT_INDICES[j])] * pilots[j]);
    let phase = common_phase(std::slice::from_ref(sym), &[expected]);
    let mut y = *sym;
    rotate(&mut y, -phase);
    let mut out = Equalized { points: Vec::with_capacity(data.len()), noise: Vec::with_capacity(data.len()), phase };
    for &k in data {
        let b = bin(k);
        let g = h[b];
        let p = g.norm_sqr();
        if p > 0.0 {
            out.points.push(y[b] / g);
            out.noise.push(noise_var / p);
        } else {
            out.points.push(C64::new(0.0, 0.0));
            out.noise.push(f64::INFINITY);
        }
    }
    out
}

/// Append soft bits of equalized points. Infinite noise erases the point.
pub fn push_llrs(points: &[C64], noise: &[f64], modulation: Modulation, out: &mut Vec<f64>) {
    for (&y, &v) in points.iter().zip(noise) {
        if v.is_finite() && v > 0.0 {
            demap_llr_into(y, modulation, v, out).expect("positive noise variance");
        } else {
            out.extend(std::iter::repeat_n(0.0, modulation.bits()));
        }
    }
}

/// Decode L-SIG from its spectrum on one antenna.
pub fn decode_lsig(
    sym: &Spectrum,
    est: &ChannelEstimate,
    noise_var: f64,
    dec: &mut ViterbiDecoder,
) -> Result<LSig, SigError> {
    let eq = equalize_siso(
        sym,
        est,
        0,
        &pilot_values(PilotPattern::Legacy, 0, 0),
        &SubcarrierMap::legacy().data_indices,
        noise_var,
    );
    let mut llrs = Vec::with_capacity(48);
    push_llrs(&eq.points, &eq.noise, Modulation::Bpsk, &mut llrs);
    let il = Interleaver::new(InterleaverKind::Legacy, 48, 1).expect("legacy SIG interleaver");
    let mut di = Vec::with_capacity(48);
    il.deinterleave_into(&llrs, &mut di).expect("48 soft bits");
    let bits = dec.decode(&di, CodeRate::R1_2, 18).expect("48 soft bits");
    LSig::from_bits(&bits)
}

/// Which axis a SIG symbol's energy lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigAxis {
    /// BPSK.
    Real,
    /// QBPSK.
    Imag,
}

pub fn sig_axis(points: &[C64]) -> SigAxis {
    let re: f64 = points.iter().map(|p| p.re * p.re).sum();
    let im: f64 = points.iter().map(|p| p.im * p.im).sum();
    if im > re {
        SigAxis::Imag
    } else {
        SigAxis::Real
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatGuess {
    Legacy,
    Ht,
    Vht,
}

/// Axis rule on the two symbols after L-SIG: QBPSK twice is HT, BPSK then
/// QBPSK is VHT, anything else legacy.
pub fn classify_format(sym1_eq: &[C64], sym2_eq: &[C64]) -> FormatGuess {
    match (sig_axis(sym1_eq), sig_axis(sym2_eq)) {
        (SigAxis::Imag, SigAxis::Imag) => FormatGuess::Ht,
        (SigAxis::Real, SigAxis::Imag) => FormatGuess::Vht,
        _ => FormatGuess::Legacy,
    }
}

/// Soft-decode the 42 information bits of an HT-SIG or VHT-SIG-A from its two
/// equalized symbols.
pub fn decode_sig_pair(
    syms: [&Equalized; 2],
    axes: [SigAxis; 2],
    dec: &mut ViterbiDecoder,
) -> Result<Vec<u8>, CodecError> {
    let il = Interleaver::new(InterleaverKind::Legacy, 48, 1)?;
    let mut all = Vec::with_capacity(96);
    let mut llrs = Vec::with_capacity(48);
    for (eq, axis) in syms.iter().zip(axes) {
        llrs.clear();
        let derot = C64::new(0.0, -1.0);
        for (&y, &v) in eq.points.iter().zip(&eq.noise) {
            let y = if axis == SigAxis::Imag { y * derot } else { y };
            if v.is_finite() {
                demap_llr_into(y, Modulation::Bpsk, v, &mut llrs)?;
            } else {
                llrs.push(0.0);
            }
        }
        il.deinterleave_into(&llrs, &mut all)?;
    }
    dec.decode(&all, CodeRate::R1_2, 42)
}

/// Soft-decode VHT-SIG-B (20 information bits) from one equalized symbol.
pub fn decode_sigb(eq: &Equalized, dec: &mut ViterbiDecoder) -> Result<Vec<u8>, CodecError> {
    let mut llrs = Vec::with_capacity(52);
    push_llrs(&eq.points, &eq.noise, Modulation::Bpsk, &mut llrs);
    let il = Interleaver::new(InterleaverKind::Ht { stream: 0 }, 52, 1)?;
    let mut di = Vec::with_capacity(52);
    il.deinterleave_into(&llrs, &mut di)?;
    dec.decode(&di, CodeRate::R1_2, 20)
}

/// Viterbi-decode a data field and descramble it. `n_info` counts the bits
/// before the first tail bit; the returned vector starts with the service
/// field. `None` when the recovered scrambler state is invalid.
pub fn decode_data_bits(
    llrs: &[f64],
    rate: CodeRate,
    n_info: usize,
    dec: &mut ViterbiDecoder,
) -> Result<Option<Vec<u8>>, CodecError> {
    let n = punctured_len(n_info + crate::params::TAIL_BITS, rate);
    if llrs.len() < n {
        return Err(CodecError::LengthMismatch { expected: n, got: llrs.len() });
    }
    let bits = dec.decode(&llrs[..n], rate, n_info)?;
    Ok(descramble_recovering_seed(&bits))
}

/// Mean squared distance to the nearest constellation point, in dB.
pub fn evm_db(points: &[C64], modulation: Modulation) -> f64 {
    if points.is_empty() {
        return f64::NAN;
    }
    let e: f64 = points.iter().map(|&p| (p - crate::codec::nearest_point(p, modulation)).norm_sqr()).sum::<f64>()
        / points.len() as f64;
    10.0 * e.max(1e-30).log10()
}
