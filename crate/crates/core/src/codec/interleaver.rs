use super::CodecError;

const LEGACY_COLS: usize = 16;
const HT_COLS: usize = 13;
const HT_ROTATION: usize = 11;

/// Block interleaver flavour. `Ht` covers both HT and VHT at 20 MHz; `stream`
/// is the zero-based spatial stream index and selects the frequency rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterleaverKind {
    Legacy,
    Ht { stream: usize },
}

/// Per-symbol permutation: coded bit `k` of a symbol is sent at position
/// `perm[k]`.
#[derive(Debug, Clone)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn new(kind: InterleaverKind, n_cbps: usize, n_bpsc: usize) -> Result<Self, CodecError> {
        let bad = CodecError::BadInterleaverShape { n_cbps, n_bpsc };
        if n_bpsc == 0 || n_cbps == 0 {
            return Err(bad);
        }
        let s = (n_bpsc / 2).max(1);
        let perm = match kind {
            InterleaverKind::Legacy => {
                if !n_cbps.is_multiple_of(LEGACY_COLS) || !n_cbps.is_multiple_of(s) {
                    return Err(bad);
                }
                (0..n_cbps)
                    .map(|k| {
                        let i = (n_cbps / LEGACY_COLS) * (k % LEGACY_COLS) + k / LEGACY_COLS;
                        s * (i / s) + (i + n_cbps - LEGACY_COLS * i / n_cbps) % s
                    })
                    .collect()
            }
            InterleaverKind::Ht { stream } => {
                if n_cbps != 52 * n_bpsc || stream > 3 {
                    return Err(bad);
                }
                let n_row = 4 * n_bpsc;
                let rot = ((2 * stream) % 3 + 3 * (stream / 3)) * HT_ROTATION * n_bpsc;
                (0..n_cbps)
                    .map(|k| {
                        let i = n_row * (k % HT_COLS) + k / HT_COLS;
                        let j = s * (i / s) + (i + n_cbps - HT_COLS * i / n_cbps) % s;
                        (j + n_cbps - rot % n_cbps) % n_cbps
                    })
                    .collect()
            }
        };
        Ok(Interleaver { perm })
    }

    pub fn block_len(&self) -> usize {
        self.perm.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    fn check(&self, len: usize) -> Result<(), CodecError> {
        let n = self.perm.len();
        if !len.is_multiple_of(n) {
            return Err(CodecError::LengthMismatch { expected: len.div_ceil(n) * n, got: len });
        }
        Ok(())
    }

    pub fn interleave(&self, bits: &[u8]) -> Result<Vec<u8>, CodecError> {
        self.check(bits.len())?;
        let n = self.perm.len();
        let mut out = vec![0u8; bits.len()];
        for (src, dst) in bits.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            for (k, &b) in src.iter().enumerate() {
                dst[self.perm[k]] = b;
            }
        }
        Ok(out)
    }

    pub fn deinterleave_llr(&self, llrs: &[f64]) -> Result<Vec<f64>, CodecError> {
        let mut out = Vec::with_capacity(llrs.len());
        self.deinterleave_into(llrs, &mut out)?;
        Ok(out)
    }

    /// Append the deinterleaved LLRs to `out`.
    pub fn deinterleave_into(&self, llrs: &[f64], out: &mut Vec<f64>) -> Result<(), CodecError> {
        self.check(llrs.len())?;
        let n = self.perm.len();
        for block in llrs.chunks_exact(n) {
            out.extend(self.perm.iter().map(|&j| block[j]));
        }
        Ok(())
    }
}

/// Legacy interleave of whole symbols.
pub fn interleave(bits: &[u8], n_cbps: usize, n_bpsc: usize) -> Result<Vec<u8>, CodecError> {
    Interleaver::new(InterleaverKind::Legacy, n_cbps, n_bpsc)?.interleave(bits)
}

/// Legacy deinterleave of whole symbols.
pub fn deinterleave_llr(llrs: &[f64], n_cbps: usize, n_bpsc: usize) -> Result<Vec<f64>, CodecError> {
    Interleaver::new(InterleaverKind::Legacy, n_cbps, n_bpsc)?.deinterleave_llr(llrs)
}
