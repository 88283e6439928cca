use super::TxError;
use crate::codec::{bcc_encode, map_qbpsk, map_symbols, Interleaver, InterleaverKind};
use crate::ofdm::{Ofdm, Spectrum, ZERO_SPECTRUM};
use crate::params::{
    bin, htltf_value, legacy_csd_ns, lltf_value, pilot_values, stf_value, CodeRate, Modulation, PilotPattern,
    SubcarrierMap, FFT_SIZE, LEGACY_TONES, LSTF_SAMPLES, PILOT_INDICES, P_MATRIX, VHT_SIGB_PILOT_OFFSET,
};
use crate::signal::LSig;
use crate::C64;

/// Per-antenna sample vectors of one field.
pub type AntennaSamples = Vec<Vec<C64>>;

/// L-STF and L-LTF, one sample vector per antenna for each field. Antenna 2
/// carries the legacy cyclic shift; every antenna is scaled by 1/sqrt(n_tx).
pub fn build_legacy_preamble(n_tx: usize) -> Result<(AntennaSamples, AntennaSamples), TxError> {
    let ofdm = Ofdm::new();
    let scale = 1.0 / (n_tx as f64).sqrt();
    let stf_spec: Spectrum = std::array::from_fn(|b| stf_value(signed(b)));
    let ltf_spec: Spectrum = std::array::from_fn(|b| C64::new(lltf_value(signed(b)), 0.0));
    let mut stf = Vec::with_capacity(n_tx);
    let mut ltf = Vec::with_capacity(n_tx);
    for a in 0..n_tx {
        let body = ofdm.body(&stf_spec, legacy_csd_ns(a), LEGACY_TONES, scale)?;
        stf.push((0..LSTF_SAMPLES).map(|n| body[n % FFT_SIZE]).collect());
        let body = ofdm.body(&ltf_spec, legacy_csd_ns(a), LEGACY_TONES, scale)?;
        let mut l = Vec::with_capacity(160);
        l.extend_from_slice(&body[32..]);
        l.extend_from_slice(&body);
        l.extend_from_slice(&body);
        ltf.push(l);
    }
    Ok((stf, ltf))
}

fn signed(b: usize) -> i32 {
    if b < FFT_SIZE / 2 {
        b as i32
    } else {
        b as i32 - FFT_SIZE as i32
    }
}

/// Place data points and pilots of one symbol. 48 points use the legacy
/// layout, 52 points the HT/VHT layout.
pub fn data_symbol_spectrum(points: &[C64], pattern: PilotPattern, polarity_index: usize, rotation: usize) -> Spectrum {
    let map = if points.len() == 48 { SubcarrierMap::legacy() } else { SubcarrierMap::ht() };
    debug_assert_eq!(points.len(), map.data_indices.len());
    let mut s = ZERO_SPECTRUM;
    for (k, p) in map.data_indices.iter().zip(points) {
        s[bin(*k)] = *p;
    }
    let pilots = pilot_values(pattern, polarity_index, rotation);
    for (k, v) in PILOT_INDICES.iter().zip(pilots) {
        s[bin(*k)] = C64::new(v, 0.0);
    }
    s
}

/// Legacy-layout symbol with legacy pilots, as used by L-SIG, HT-SIG and
/// VHT-SIG-A.
pub fn legacy_sig_spectrum(points: &[C64], polarity_index: usize) -> Spectrum {
    data_symbol_spectrum(points, PilotPattern::Legacy, polarity_index, 0)
}

fn encode_sig_symbols(bits: &[u8]) -> Result<Vec<Vec<u8>>, TxError> {
    let coded = bcc_encode(bits, CodeRate::R1_2);
    let il = Interleaver::new(InterleaverKind::Legacy, 48, 1)?;
    coded.chunks_exact(48).map(|c| il.interleave(c).map_err(TxError::from)).collect()
}

/// L-SIG symbol spectrum for a legacy MCS and LENGTH.
pub fn build_lsig(mcs: u8, length: u16) -> Result<Spectrum, TxError> {
    let bits = LSig { mcs, length }.to_bits()?;
    let sym = encode_sig_symbols(&bits)?.remove(0);
    Ok(legacy_sig_spectrum(&map_symbols(&sym, Modulation::Bpsk)?, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigModulation {
    Bpsk,
    Qbpsk,
}

/// Two SIG symbols (HT-SIG or VHT-SIG-A) from 48 field bits, with pilot
/// polarities p1 and p2.
pub fn build_sig_pair(bits: &[u8], modulation: [SigModulation; 2]) -> Result<[Spectrum; 2], TxError> {
    let syms = encode_sig_symbols(bits)?;
    let mut out = [ZERO_SPECTRUM; 2];
    for (i, (sym, m)) in syms.iter().zip(modulation).enumerate() {
        let pts = match m {
            SigModulation::Bpsk => map_symbols(sym, Modulation::Bpsk)?,
            SigModulation::Qbpsk => map_qbpsk(sym),
        };
        out[i] = legacy_sig_spectrum(&pts, i + 1);
    }
    Ok(out)
}

/// VHT-SIG-B symbol spectrum from its 26 bits.
pub fn sigb_spectrum(bits: &[u8]) -> Result<Spectrum, TxError> {
    let coded = bcc_encode(bits, CodeRate::R1_2);
    let il = Interleaver::new(InterleaverKind::Ht { stream: 0 }, 52, 1)?;
    let pts = map_symbols(&il.interleave(&coded)?, Modulation::Bpsk)?;
    Ok(data_symbol_spectrum(&pts, PilotPattern::Vht, VHT_SIGB_PILOT_OFFSET, 0))
}

/// HT-LTF / VHT-LTF symbols (identical at 20 MHz), `[symbol][stream]`:
/// stream s in symbol n carries P[s][n] times the LTF sequence on all 56
/// tones. One stream uses a single symbol.
pub fn build_mimo_ltf(n_sts: usize) -> Vec<Vec<Spectrum>> {
    let base: Spectrum = std::array::from_fn(|b| C64::new(htltf_value(signed(b)), 0.0));
    (0..n_sts)
        .map(|n| {
            (0..n_sts)
                .map(|s| {
                    let p = P_MATRIX[s][n];
                    let mut x = base;
                    for v in x.iter_mut() {
                        *v *= p;
                    }
                    x
                })
                .collect()
        })
        .collect()
}
