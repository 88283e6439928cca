use super::CodecError;
use crate::params::Modulation;
use crate::C64;

/// Bits per I or Q axis. BPSK uses only the real axis.
fn axis_bits(m: Modulation) -> usize {
    match m {
        Modulation::Bpsk => 1,
        _ => m.bits() / 2,
    }
}

/// Gray-coded amplitude on the odd-integer grid for `bits` (MSB first).
fn axis_level(bits: &[u8]) -> f64 {
    let n = bits.len();
    let mut gray = 0usize;
    for &b in bits {
        gray = (gray << 1) | (b & 1) as usize;
    }
    let mut idx = gray;
    let mut shift = gray >> 1;
    while shift != 0 {
        idx ^= shift;
        shift >>= 1;
    }
    2.0 * idx as f64 - ((1usize << n) - 1) as f64
}

/// Map coded bits to unit-average-energy constellation points. The first half
/// of each group drives I, the second half Q.
pub fn map_symbols(bits: &[u8], modulation: Modulation) -> Result<Vec<C64>, CodecError> {
    let nb = modulation.bits();
    if !bits.len().is_multiple_of(nb) {
        return Err(CodecError::LengthMismatch { expected: bits.len().div_ceil(nb) * nb, got: bits.len() });
    }
    let norm = modulation.norm();
    let half = axis_bits(modulation);
    Ok(bits
        .chunks_exact(nb)
        .map(|g| match modulation {
            Modulation::Bpsk => C64::new(2.0 * g[0] as f64 - 1.0, 0.0),
            _ => C64::new(axis_level(&g[..half]), axis_level(&g[half..])) * norm,
        })
        .collect())
}

/// BPSK rotated by 90 degrees: 0 -> -j, 1 -> +j.
pub fn map_qbpsk(bits: &[u8]) -> Vec<C64> {
    bits.iter().map(|&b| C64::new(0.0, 2.0 * b as f64 - 1.0)).collect()
}

/// Piecewise-linear max-log LLRs of one axis, `x` in grid units.
#[inline]
fn axis_llrs(x: f64, nbits: usize, scale: f64, out: &mut Vec<f64>) {
    out.push(x * scale);
    let mut t = x.abs();
    let mut a = (1usize << (nbits - 1)) as f64;
    for _ in 1..nbits {
        out.push((a - t) * scale);
        t = (t - a).abs();
        a /= 2.0;
    }
}

/// Append the LLRs of one received point to `out`. Positive favours 1.
#[inline]
pub fn demap_llr_into(y: C64, modulation: Modulation, noise_var: f64, out: &mut Vec<f64>) -> Result<(), CodecError> {
    if noise_var.is_nan() || noise_var <= 0.0 {
        return Err(CodecError::NonPositiveNoiseVar(noise_var));
    }
    let norm = modulation.norm();
    let scale = 4.0 * norm * norm / noise_var;
    match modulation {
        Modulation::Bpsk => out.push(y.re * scale),
        _ => {
            let nb = axis_bits(modulation);
            axis_llrs(y.re / norm, nb, scale, out);
            axis_llrs(y.im / norm, nb, scale, out);
        }
    }
    Ok(())
}

pub fn demap_llr(y: C64, modulation: Modulation, noise_var: f64) -> Result<Vec<f64>, CodecError> {
    let mut out = Vec::with_capacity(modulation.bits());
    demap_llr_into(y, modulation, noise_var, &mut out)?;
    Ok(out)
}

/// Hard bit decisions for one received point.
pub fn hard_decision(y: C64, modulation: Modulation) -> Vec<u8> {
    demap_llr(y, modulation, 1.0).unwrap().iter().map(|&l| (l > 0.0) as u8).collect()
}

/// Closest constellation point to `y`.
pub fn nearest_point(y: C64, modulation: Modulation) -> C64 {
    let norm = modulation.norm();
    let top = ((1usize << axis_bits(modulation)) - 1) as f64;
    let slice = |x: f64| (2.0 * ((x / norm - 1.0) / 2.0).round() + 1.0).clamp(-top, top) * norm;
    match modulation {
        Modulation::Bpsk => C64::new(if y.re >= 0.0 { 1.0 } else { -1.0 }, 0.0),
        _ => C64::new(slice(y.re), slice(y.im)),
    }
}
