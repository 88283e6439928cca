//! OFDM numerology, subcarrier layouts, MCS tables, training sequences and
//! cyclic-shift constants for 20 MHz operation.
//!
//! Everything here is an immutable table; the transmitter and the receiver both
//! read from this module so that they can never disagree about a constant.

use crate::C64;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// 64-point OFDM numerology at 20 Msps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmNumerology {
    pub fft_size: usize,
    pub sample_rate: f64,
    pub subcarrier_spacing: f64,
    pub gi_samples: usize,
    pub symbol_samples: usize,
    pub symbol_duration: f64,
}

pub const NUMEROLOGY: OfdmNumerology = OfdmNumerology {
    fft_size: 64,
    sample_rate: 20e6,
    subcarrier_spacing: 312_500.0,
    gi_samples: 16,
    symbol_samples: 80,
    symbol_duration: 4.0e-6,
};

pub const FFT_SIZE: usize = 64;
pub const GI_SAMPLES: usize = 16;
pub const SYMBOL_SAMPLES: usize = 80;
pub const SAMPLE_RATE: f64 = 20e6;
pub const SUBCARRIER_SPACING: f64 = 312_500.0;

/// L-STF and L-LTF are 160 samples each.
pub const LSTF_SAMPLES: usize = 160;
pub const LLTF_SAMPLES: usize = 160;
/// Short training symbol period.
pub const STF_PERIOD: usize = 16;
/// Long training symbol length.
pub const LTF_PERIOD: usize = 64;

pub const SERVICE_BITS: usize = 16;
pub const TAIL_BITS: usize = 6;

/// FFT bin of a signed subcarrier index.
#[inline]
pub fn bin(k: i32) -> usize {
    k.rem_euclid(FFT_SIZE as i32) as usize
}

/// Frame format carried on the air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhyFormat {
    Legacy,
    Ht,
    VhtSu,
    VhtMu,
    VhtNdp,
}

impl PhyFormat {
    pub fn is_vht(self) -> bool {
        matches!(self, PhyFormat::VhtSu | PhyFormat::VhtMu | PhyFormat::VhtNdp)
    }

    pub fn name(self) -> &'static str {
        match self {
            PhyFormat::Legacy => "legacy",
            PhyFormat::Ht => "ht",
            PhyFormat::VhtSu => "vht",
            PhyFormat::VhtMu => "vht-mu",
            PhyFormat::VhtNdp => "vht-ndp",
        }
    }
}

impl fmt::Display for PhyFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PhyFormat {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "legacy" => Ok(PhyFormat::Legacy),
            "ht" => Ok(PhyFormat::Ht),
            "vht" | "vht-su" => Ok(PhyFormat::VhtSu),
            "vht-mu" => Ok(PhyFormat::VhtMu),
            "vht-ndp" => Ok(PhyFormat::VhtNdp),
            other => Err(ParamError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
}

impl Modulation {
    /// Coded bits carried by one constellation point.
    pub const fn bits(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
        }
    }

    /// Scale that brings the integer grid to unit average energy.
    pub fn norm(self) -> f64 {
        match self {
            Modulation::Bpsk => 1.0,
            Modulation::Qpsk => 1.0 / 2f64.sqrt(),
            Modulation::Qam16 => 1.0 / 10f64.sqrt(),
            Modulation::Qam64 => 1.0 / 42f64.sqrt(),
            Modulation::Qam256 => 1.0 / 170f64.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeRate {
    R1_2,
    R2_3,
    R3_4,
    R5_6,
}

impl CodeRate {
    pub const fn ratio(self) -> (usize, usize) {
        match self {
            CodeRate::R1_2 => (1, 2),
            CodeRate::R2_3 => (2, 3),
            CodeRate::R3_4 => (3, 4),
            CodeRate::R5_6 => (5, 6),
        }
    }

    pub fn value(self) -> f64 {
        let (n, d) = self.ratio();
        n as f64 / d as f64
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("MCS {mcs} is not defined for {format}")]
    UnknownMcs { format: PhyFormat, mcs: u8 },
    #[error("unknown frame format {0:?}")]
    UnknownFormat(String),
}

/// Everything the bit pipeline needs to know about one MCS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsParams {
    pub format: PhyFormat,
    pub mcs_index: u8,
    pub modulation: Modulation,
    pub code_rate: CodeRate,
    pub n_ss: usize,
    /// Data subcarriers per stream (48 legacy, 52 HT/VHT).
    pub n_sd: usize,
    /// Coded bits per subcarrier per stream.
    pub n_bpscs: usize,
    /// Coded bits per OFDM symbol per stream.
    pub n_cbpss: usize,
    /// Coded bits per OFDM symbol, all streams.
    pub n_cbps: usize,
    /// Data bits per OFDM symbol, all streams.
    pub n_dbps: usize,
    /// bit/s with the 0.8 us guard interval.
    pub data_rate: f64,
}

const LEGACY_TABLE: [(Modulation, CodeRate); 8] = [
    (Modulation::Bpsk, CodeRate::R1_2),
    (Modulation::Bpsk, CodeRate::R3_4),
    (Modulation::Qpsk, CodeRate::R1_2),
    (Modulation::Qpsk, CodeRate::R3_4),
    (Modulation::Qam16, CodeRate::R1_2),
    (Modulation::Qam16, CodeRate::R3_4),
    (Modulation::Qam64, CodeRate::R2_3),
    (Modulation::Qam64, CodeRate::R3_4),
];

/// HT MCS 0-7 and 8-15 (EQM) share the per-stream table; VHT extends it with 256-QAM.
const HT_VHT_TABLE: [(Modulation, CodeRate); 9] = [
    (Modulation::Bpsk, CodeRate::R1_2),
    (Modulation::Qpsk, CodeRate::R1_2),
    (Modulation::Qpsk, CodeRate::R3_4),
    (Modulation::Qam16, CodeRate::R1_2),
    (Modulation::Qam16, CodeRate::R3_4),
    (Modulation::Qam64, CodeRate::R2_3),
    (Modulation::Qam64, CodeRate::R3_4),
    (Modulation::Qam64, CodeRate::R5_6),
    (Modulation::Qam256, CodeRate::R3_4),
];

/// Look up the parameters of `mcs` for a frame format.
///
/// Legacy accepts 0-7, HT accepts the two-stream EQM range 8-15 and the VHT
/// formats accept single-stream MCS 0-8.
pub fn mcs_params(format: PhyFormat, mcs: u8) -> Result<McsParams, ParamError> {
    let unknown = ParamError::UnknownMcs { format, mcs };
    let (modulation, code_rate, n_ss, n_sd) = match format {
        PhyFormat::Legacy => {
            let (m, r) = *LEGACY_TABLE.get(mcs as usize).ok_or(unknown)?;
            (m, r, 1, 48)
        }
        PhyFormat::Ht => {
            if !(8..=15).contains(&mcs) {
                return Err(unknown);
            }
            let (m, r) = HT_VHT_TABLE[(mcs - 8) as usize];
            (m, r, 2, 52)
        }
        PhyFormat::VhtSu | PhyFormat::VhtMu | PhyFormat::VhtNdp => {
            let (m, r) = *HT_VHT_TABLE.get(mcs as usize).ok_or(unknown)?;
            (m, r, 1, 52)
        }
    };
    let n_bpscs = modulation.bits();
    let n_cbpss = n_sd * n_bpscs;
    let n_cbps = n_cbpss * n_ss;
    let (num, den) = code_rate.ratio();
    let n_dbps = n_cbps * num / den;
    Ok(McsParams {
        format,
        mcs_index: mcs,
        modulation,
        code_rate,
        n_ss,
        n_sd,
        n_bpscs,
        n_cbpss,
        n_cbps,
        n_dbps,
        data_rate: n_dbps as f64 / NUMEROLOGY.symbol_duration,
    })
}

/// Number of data OFDM symbols needed for `payload_octets` PSDU octets with one
/// BCC encoder: ceil((16 + 8 L + 6) / N_DBPS).
pub fn symbols_for_payload(params: &McsParams, payload_octets: usize) -> usize {
    let bits = SERVICE_BITS + 8 * payload_octets + TAIL_BITS;
    bits.div_ceil(params.n_dbps)
}

/// RATE field of L-SIG (R1..R4, transmitted first to last) for legacy MCS 0-7.
pub const LSIG_RATE_BITS: [[u8; 4]; 8] =
    [[1, 1, 0, 1], [1, 1, 1, 1], [0, 1, 0, 1], [0, 1, 1, 1], [1, 0, 0, 1], [1, 0, 1, 1], [0, 0, 0, 1], [0, 0, 1, 1]];

/// Legacy MCS index for a decoded L-SIG RATE field.
pub fn legacy_mcs_from_rate_bits(bits: [u8; 4]) -> Option<u8> {
    LSIG_RATE_BITS.iter().position(|r| *r == bits).map(|m| m as u8)
}

/// Data and pilot placement of one OFDM symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubcarrierMap {
    pub data_indices: Vec<i32>,
    pub pilot_indices: [i32; 4],
}

pub const PILOT_INDICES: [i32; 4] = [-21, -7, 7, 21];

impl SubcarrierMap {
    /// 48 data + 4 pilots on -26..=26.
    pub fn legacy() -> Self {
        Self::with_edge(26)
    }

    /// 52 data + 4 pilots on -28..=28.
    pub fn ht() -> Self {
        Self::with_edge(28)
    }

    fn with_edge(edge: i32) -> Self {
        let data_indices = (-edge..=edge).filter(|k| *k != 0 && !PILOT_INDICES.contains(k)).collect();
        SubcarrierMap { data_indices, pilot_indices: PILOT_INDICES }
    }

    /// Data and pilot subcarriers together, ascending.
    pub fn occupied(&self) -> Vec<i32> {
        let mut all: Vec<i32> = self.data_indices.iter().copied().chain(self.pilot_indices).collect();
        all.sort_unstable();
        all
    }
}

/// Pilot polarity p_0..p_126: the scrambler output for an all-ones state with
/// 0 -> +1 and 1 -> -1.
pub const PILOT_POLARITY: [i8; 127] = [
    1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, -1, 1, 1, -1, 1, -1, -1, 1, 1, -1, 1, 1, -1, 1, 1, 1, 1, 1, 1, -1, 1, 1, 1,
    -1, 1, 1, -1, -1, 1, 1, 1, -1, 1, -1, -1, -1, 1, -1, 1, -1, -1, 1, -1, -1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, -1, 1,
    -1, 1, -1, 1, 1, -1, -1, -1, 1, 1, -1, -1, -1, -1, 1, -1, -1, 1, -1, 1, 1, 1, 1, -1, 1, -1, 1, -1, 1, -1, -1, -1,
    -1, -1, 1, -1, 1, 1, -1, 1, -1, 1, 1, 1, -1, -1, 1, -1, -1, -1, 1, 1, 1, -1, -1, -1, -1, -1, -1, -1,
];

pub fn pilot_polarity(n: usize) -> f64 {
    PILOT_POLARITY[n % 127] as f64
}

/// Legacy pilot values before polarity, on subcarriers -21, -7, 7, 21.
pub const LEGACY_PILOTS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

/// HT two-stream pilot patterns, one row per stream.
pub const HT_PILOTS_2SS: [[f64; 4]; 2] = [[1.0, 1.0, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];

/// Pilot values for one OFDM symbol, subcarrier order -21, -7, 7, 21.
///
/// `polarity_index` selects p_n; HT/VHT symbols additionally rotate the pattern
/// by the symbol number `rotation`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotPattern {
    /// L-SIG, HT-SIG, VHT-SIG-A and legacy data.
    Legacy,
    /// HT data; the stream selects the row of the two-stream table.
    Ht2ss { stream: usize },
    /// VHT data and SIG-B; identical on every stream.
    Vht,
}

pub fn pilot_values(pattern: PilotPattern, polarity_index: usize, rotation: usize) -> [f64; 4] {
    let p = pilot_polarity(polarity_index);
    let mut out = [0.0; 4];
    for (j, v) in out.iter_mut().enumerate() {
        let base = match pattern {
            PilotPattern::Legacy => LEGACY_PILOTS[j],
            PilotPattern::Ht2ss { stream } => HT_PILOTS_2SS[stream][(rotation + j) % 4],
            PilotPattern::Vht => LEGACY_PILOTS[(rotation + j) % 4],
        };
        *v = p * base;
    }
    out
}

/// Polarity offsets of the first data symbol in each format.
pub const HT_DATA_PILOT_OFFSET: usize = 3;
pub const VHT_SIGB_PILOT_OFFSET: usize = 3;
pub const VHT_DATA_PILOT_OFFSET: usize = 4;

/// Per-antenna cyclic shifts in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CyclicShiftTable {
    pub legacy_portion: [f64; 2],
    pub ht_vht_portion: [f64; 2],
}

pub const CYCLIC_SHIFTS: CyclicShiftTable =
    CyclicShiftTable { legacy_portion: [0.0, -200.0], ht_vht_portion: [0.0, -400.0] };

/// Shift in samples (negative = advance) for a shift in nanoseconds.
pub fn shift_ns_to_samples(shift_ns: f64) -> f64 {
    shift_ns * 1e-9 * SAMPLE_RATE
}

/// Legacy-portion shift of transmit antenna `antenna`.
pub fn legacy_csd_ns(antenna: usize) -> f64 {
    CYCLIC_SHIFTS.legacy_portion[antenna]
}

/// HT/VHT-portion shift of transmit chain `chain`.
pub fn ht_csd_ns(chain: usize) -> f64 {
    CYCLIC_SHIFTS.ht_vht_portion[chain]
}

/// Orthogonal LTF mapping matrix, rows = streams, columns = LTF symbols.
pub const P_MATRIX: [[f64; 2]; 2] = [[1.0, -1.0], [1.0, 1.0]];

/// P^-1 = P^T / 2.
pub const P_INVERSE: [[f64; 2]; 2] = [[0.5, 0.5], [-0.5, 0.5]];

const STF_SCALE: f64 = 1.471_960_144_387_974_8; // sqrt(13/6)

/// L-STF (and HT/VHT-STF) frequency values on -26..=26.
pub fn stf_value(k: i32) -> C64 {
    let one = C64::new(STF_SCALE, STF_SCALE);
    match k {
        -24 | -16 | -4 | 12 | 16 | 20 | 24 => one,
        -20 | -12 | -8 | 4 | 8 => -one,
        _ => C64::new(0.0, 0.0),
    }
}

/// L-LTF values for -26..=26 (index 0 is k = -26).
pub const LTF_LEGACY: [i8; 53] = [
    1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 0, 1, -1, -1, 1, 1, -1, 1,
    -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1,
];

/// L-LTF value on subcarrier k.
pub fn lltf_value(k: i32) -> f64 {
    if (-26..=26).contains(&k) {
        LTF_LEGACY[(k + 26) as usize] as f64
    } else {
        0.0
    }
}

/// HT/VHT-LTF value on subcarrier k: the legacy sequence extended to +-28.
pub fn htltf_value(k: i32) -> f64 {
    match k {
        -28 | -27 => 1.0,
        27 | 28 => -1.0,
        _ => lltf_value(k),
    }
}

/// Number of occupied tones used to normalize the time-domain power of a field.
pub const LEGACY_TONES: usize = 52;
pub const HT_TONES: usize = 56;

/// L-SIG LENGTH at 6 Mb/s that covers `symbols_after_lsig` 4 us symbols of an
/// HT or VHT frame.
pub fn spoofed_lsig_length(symbols_after_lsig: usize) -> usize {
    3 * symbols_after_lsig - 3
}

/// Number of 4 us symbols a 6 Mb/s L-SIG LENGTH announces after L-SIG.
pub fn symbols_after_lsig(lsig_length: usize) -> usize {
    (SERVICE_BITS + 8 * lsig_length + TAIL_BITS).div_ceil(24)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerology_invariants() {
        let n = NUMEROLOGY;
        assert_eq!(n.symbol_samples, n.fft_size + n.gi_samples);
        assert_eq!(n.subcarrier_spacing, n.sample_rate / n.fft_size as f64);
        assert!((n.symbol_duration * n.sample_rate - n.symbol_samples as f64).abs() < 1e-9);
    }

    #[test]
    fn subcarrier_maps() {
        let l = SubcarrierMap::legacy();
        assert_eq!(l.data_indices.len(), 48);
        let h = SubcarrierMap::ht();
        assert_eq!(h.data_indices.len(), 52);
        for m in [l, h] {
            assert!(!m.data_indices.contains(&0));
            for p in m.pilot_indices {
                assert!(!m.data_indices.contains(&p));
            }
        }
    }

    #[test]
    fn legacy_rates_match_table() {
        let expect = [6.0, 9.0, 12.0, 18.0, 24.0, 36.0, 48.0, 54.0];
        for (mcs, rate) in expect.iter().enumerate() {
            let p = mcs_params(PhyFormat::Legacy, mcs as u8).unwrap();
            assert_eq!(p.data_rate, rate * 1e6);
        }
        let p0 = mcs_params(PhyFormat::Legacy, 0).unwrap();
        assert_eq!((p0.modulation, p0.code_rate), (Modulation::Bpsk, CodeRate::R1_2));
    }

    #[test]
    fn ht_rates_match_table() {
        let expect = [13.0, 26.0, 39.0, 52.0, 78.0, 104.0, 117.0, 130.0];
        for (i, rate) in expect.iter().enumerate() {
            let p = mcs_params(PhyFormat::Ht, 8 + i as u8).unwrap();
            assert_eq!(p.data_rate, rate * 1e6);
            assert_eq!(p.n_ss, 2);
        }
        let p = mcs_params(PhyFormat::Ht, 15).unwrap();
        assert_eq!((p.modulation, p.code_rate), (Modulation::Qam64, CodeRate::R5_6));
    }

    #[test]
    fn bits_per_symbol_formula() {
        for (fmt, range) in [(PhyFormat::Legacy, 0..=7u8), (PhyFormat::Ht, 8..=15), (PhyFormat::VhtSu, 0..=8)] {
            for mcs in range {
                let p = mcs_params(fmt, mcs).unwrap();
                let expect = p.n_sd as f64 * p.modulation.bits() as f64 * p.code_rate.value() * p.n_ss as f64;
                assert!((p.n_dbps as f64 - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn out_of_range_mcs() {
        assert!(matches!(mcs_params(PhyFormat::Legacy, 8), Err(ParamError::UnknownMcs { .. })));
        assert!(mcs_params(PhyFormat::Ht, 7).is_err());
        assert!(mcs_params(PhyFormat::Ht, 16).is_err());
        assert!(mcs_params(PhyFormat::VhtSu, 9).is_err());
    }

    #[test]
    fn symbol_counts() {
        let l0 = mcs_params(PhyFormat::Legacy, 0).unwrap();
        assert_eq!(symbols_for_payload(&l0, 100), 35);
        assert!(symbols_for_payload(&l0, 0) >= 1);
        let h8 = mcs_params(PhyFormat::Ht, 8).unwrap();
        assert_eq!(symbols_for_payload(&h8, 500), 78);
    }

    #[test]
    fn symbol_count_monotone() {
        let p = mcs_params(PhyFormat::Legacy, 5).unwrap();
        let mut last = 0;
        for len in 0..2000 {
            let n = symbols_for_payload(&p, len);
            assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn pilot_polarity_matches_scrambler() {
        // Independent route: run x^7 + x^4 + 1 from the all-ones state.
        let mut reg = [1u8; 7];
        for (n, p) in PILOT_POLARITY.iter().enumerate() {
            let out = reg[6] ^ reg[3];
            reg.rotate_right(1);
            reg[0] = out;
            let expect = if out == 0 { 1 } else { -1 };
            assert_eq!(*p, expect, "p_{n}");
        }
        assert_eq!(&PILOT_POLARITY[..8], &[1, 1, 1, 1, -1, -1, -1, 1]);
    }

    #[test]
    fn csd_samples() {
        assert_eq!(shift_ns_to_samples(-200.0), -4.0);
        assert_eq!(shift_ns_to_samples(-400.0), -8.0);
    }

    #[test]
    fn p_matrix_orthogonal() {
        for i in 0..2 {
            for j in 0..2 {
                let ppt: f64 = (0..2).map(|n| P_MATRIX[i][n] * P_MATRIX[j][n]).sum();
                assert_eq!(ppt, if i == j { 2.0 } else { 0.0 });
                let pinv: f64 = (0..2).map(|n| P_MATRIX[i][n] * P_INVERSE[n][j]).sum();
                assert_eq!(pinv, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn stf_energy() {
        let e: f64 = (-26..=26).map(|k| stf_value(k).norm_sqr()).sum();
        assert!((e - 52.0).abs() < 1e-12);
    }

    #[test]
    fn spoofed_length_round_trip() {
        // 2 HT-SIG + HT-STF + 2 HT-LTF + 78 data symbols.
        let len = spoofed_lsig_length(5 + 78);
        assert_eq!(len, 246);
        assert_eq!(symbols_after_lsig(len), 83);
        // The spoofed length must decode to the same duration at 6 Mb/s.
        let l0 = mcs_params(PhyFormat::Legacy, 0).unwrap();
        assert_eq!(symbols_for_payload(&l0, len), 83);
    }
}
