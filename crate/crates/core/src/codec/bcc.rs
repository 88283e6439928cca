use super::CodecError;
use crate::params::CodeRate;

/// Generator taps over a 7-bit register whose bit `d` holds the input from
/// `d` steps ago (133 and 171 octal).
const GEN_A: u8 = 0x6D;
const GEN_B: u8 = 0x4F;

const N_STATES: usize = 64;

fn puncture_pattern(rate: CodeRate) -> &'static [u8] {
    match rate {
        CodeRate::R1_2 => &[1, 1],
        CodeRate::R2_3 => &[1, 1, 1, 0],
        CodeRate::R3_4 => &[1, 1, 1, 0, 0, 1],
        CodeRate::R5_6 => &[1, 1, 1, 0, 0, 1, 1, 0, 0, 1],
    }
}

#[inline]
fn parity(x: u8) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Rate-1/2 mother code output for every input bit, interleaved A, B.
fn mother_encode(bits: &[u8]) -> Vec<u8> {
    let mut reg = 0u8;
    let mut out = Vec::with_capacity(bits.len() * 2);
    for &b in bits {
        reg = ((reg << 1) | (b & 1)) & 0x7f;
        out.push(parity(reg & GEN_A));
        out.push(parity(reg & GEN_B));
    }
    out
}

/// Convolutionally encode and puncture. The caller is responsible for the
/// six zero tail bits.
pub fn bcc_encode(bits: &[u8], rate: CodeRate) -> Vec<u8> {
    let mother = mother_encode(bits);
    let pat = puncture_pattern(rate);
    mother.iter().zip(pat.iter().cycle()).filter(|(_, keep)| **keep == 1).map(|(b, _)| *b).collect()
}

/// Number of transmitted coded bits for `n_input` encoder input bits.
pub fn punctured_len(n_input: usize, rate: CodeRate) -> usize {
    let pat = puncture_pattern(rate);
    let kept: usize = pat.iter().map(|&k| k as usize).sum();
    let mother = 2 * n_input;
    let full = mother / pat.len();
    let rem = mother % pat.len();
    full * kept + pat[..rem].iter().map(|&k| k as usize).sum::<usize>()
}

/// Re-insert erased positions (LLR 0) to rebuild the mother-code stream for
/// `n_input` encoder input bits.
pub fn depuncture(llrs: &[f64], rate: CodeRate, n_input: usize) -> Result<Vec<f32>, CodecError> {
    let expected = punctured_len(n_input, rate);
    if llrs.len() != expected {
        return Err(CodecError::LengthMismatch { expected, got: llrs.len() });
    }
    let pat = puncture_pattern(rate);
    let mut out = Vec::with_capacity(2 * n_input);
    let mut it = llrs.iter();
    for i in 0..2 * n_input {
        if pat[i % pat.len()] == 1 {
            out.push(*it.next().unwrap() as f32);
        } else {
            out.push(0.0);
        }
    }
    Ok(out)
}

/// Soft-decision Viterbi decoder with reusable traceback storage.
///
/// Trellis state is the six most recent inputs (bit 0 newest). The encoder
/// starts in state 0 and is driven back to state 0 by the tail, so traceback
/// starts from state 0.
pub struct ViterbiDecoder {
    /// For next state `ns` and the bit leaving the register `x`, index of the
    /// branch output pair (A << 1 | B).
    branch_out: [[u8; 2]; N_STATES],
    decisions: Vec<u64>,
}

impl Default for ViterbiDecoder {
    fn default() -> Self {
        Self::new()
    }
}

impl ViterbiDecoder {
    pub fn new() -> Self {
        let mut branch_out = [[0u8; 2]; N_STATES];
        for (ns, row) in branch_out.iter_mut().enumerate() {
            for x in 0..2 {
                let reg = (ns as u8) | ((x as u8) << 6);
                row[x] = (parity(reg & GEN_A) << 1) | parity(reg & GEN_B);
            }
        }
        ViterbiDecoder { branch_out, decisions: Vec::new() }
    }

    /// Decode `n_info` bits from punctured LLRs covering `n_info + 6` encoder
    /// inputs (information plus tail).
    pub fn decode(&mut self, llrs: &[f64], rate: CodeRate, n_info: usize) -> Result<Vec<u8>, CodecError> {
        let steps = n_info + 6;
        let mother = depuncture(llrs, rate, steps)?;
        self.decisions.clear();
        self.decisions.resize(steps, 0);

        let mut pm = [f32::NEG_INFINITY; N_STATES];
        pm[0] = 0.0;
        let mut next = [0f32; N_STATES];
        for t in 0..steps {
            let la = mother[2 * t];
            let lb = mother[2 * t + 1];
            // Correlation metric: +L when the branch bit is 1, -L when 0.
            let bm = [-la - lb, -la + lb, la - lb, la + lb];
            let mut dec = 0u64;
            let mut best = f32::NEG_INFINITY;
            for ns in 0..N_STATES {
                let p0 = ns >> 1;
                let p1 = p0 | 32;
                let m0 = pm[p0] + bm[self.branch_out[ns][0] as usize];
                let m1 = pm[p1] + bm[self.branch_out[ns][1] as usize];
                let m = if m1 > m0 {
                    dec |= 1 << ns;
                    m1
                } else {
                    m0
                };
                next[ns] = m;
                best = best.max(m);
            }
            for (p, n) in pm.iter_mut().zip(next.iter()) {
                *p = n - best;
            }
            self.decisions[t] = dec;
        }

        let mut bits = vec![0u8; steps];
        let mut ns = 0usize;
        for t in (0..steps).rev() {
            bits[t] = (ns & 1) as u8;
            let x = ((self.decisions[t] >> ns) & 1) as usize;
            ns = (ns >> 1) | (x << 5);
        }
        bits.truncate(n_info);
        Ok(bits)
    }
}

/// One-shot soft Viterbi decode. See [`ViterbiDecoder::decode`].
pub fn viterbi_decode_soft(llrs: &[f64], rate: CodeRate, n_info: usize) -> Result<Vec<u8>, CodecError> {
    ViterbiDecoder::new().decode(llrs, rate, n_info)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const RATES: [CodeRate; 4] = [CodeRate::R1_2, CodeRate::R2_3, CodeRate::R3_4, CodeRate::R5_6];

    fn with_tail(mut bits: Vec<u8>) -> Vec<u8> {
        bits.extend([0; 6]);
        bits
    }

    fn to_llr(coded: &[u8], amp: f64) -> Vec<f64> {
        coded.iter().map(|&b| if b == 1 { amp } else { -amp }).collect()
    }

    #[test]
    fn impulse_response() {
        let out = bcc_encode(&[1, 0, 0, 0, 0, 0, 0], CodeRate::R1_2);
        assert_eq!(out, [1, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1]);
    }

    #[test]
    fn punctured_lengths() {
        assert_eq!(punctured_len(24, CodeRate::R1_2), 48);
        assert_eq!(punctured_len(24, CodeRate::R2_3), 36);
        assert_eq!(punctured_len(24, CodeRate::R3_4), 32);
        assert_eq!(punctured_len(30, CodeRate::R5_6), 36);
        for r in RATES {
            for n in 0..50 {
                assert_eq!(bcc_encode(&vec![0; n], r).len(), punctured_len(n, r));
            }
        }
    }

    #[test]
    fn rate_three_quarters_drops_expected_positions() {
        // Mother stream A0 B0 A1 B1 A2 B2 keeps A0 B0 A1 B2.
        let bits = [1, 0, 1];
        let mother = mother_encode(&bits);
        let p = bcc_encode(&bits, CodeRate::R3_4);
        assert_eq!(p, [mother[0], mother[1], mother[2], mother[5]]);
    }

    #[test]
    fn length_mismatch() {
        let err = viterbi_decode_soft(&[0.0; 10], CodeRate::R1_2, 10).unwrap_err();
        assert_eq!(err, CodecError::LengthMismatch { expected: 32, got: 10 });
    }

    #[test]
    fn corrects_isolated_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let info: Vec<u8> = (0..200).map(|_| rng.random_range(0..2)).collect();
        let coded = bcc_encode(&with_tail(info.clone()), CodeRate::R1_2);
        let mut llr = to_llr(&coded, 1.0);
        for i in (5..llr.len()).step_by(40) {
            llr[i] = -llr[i];
        }
        assert_eq!(viterbi_decode_soft(&llr, CodeRate::R1_2, 200).unwrap(), info);
    }

    #[test]
    fn decodes_noisy_soft_input() {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.7).unwrap();
        let info: Vec<u8> = (0..1000).map(|_| rng.random_range(0..2)).collect();
        let coded = bcc_encode(&with_tail(info.clone()), CodeRate::R1_2);
        let llr: Vec<f64> = to_llr(&coded, 1.0).iter().map(|l| l + noise.sample(&mut rng)).collect();
        let out = viterbi_decode_soft(&llr, CodeRate::R1_2, 1000).unwrap();
        let errors = out.iter().zip(&info).filter(|(a, b)| a != b).count();
        assert!(errors <= 2, "{errors} bit errors");
    }

    proptest! {
        #[test]
        fn noiseless_roundtrip(info in proptest::collection::vec(0u8..2, 1..400), r in 0usize..4) {
            let rate = RATES[r];
            let coded = bcc_encode(&with_tail(info.clone()), rate);
            let out = viterbi_decode_soft(&to_llr(&coded, 2.0), rate, info.len()).unwrap();
            prop_assert_eq!(out, info);
        }
    }
}
