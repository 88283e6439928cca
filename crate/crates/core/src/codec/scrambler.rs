use super::CodecError;

/// Seed used by the transmitter for every data field.
pub const DEFAULT_SEED: u8 = 0b101_1101;

/// Frame-synchronous scrambler with generator x^7 + x^4 + 1.
///
/// Bit `i` of the state is register cell x_{i+1}; the output of each step is
/// x7 XOR x4, which is also shifted into x1.
#[derive(Debug, Clone, Copy)]
pub struct Scrambler {
    state: u8,
}

impl Scrambler {
    pub fn new(seed: u8) -> Result<Self, CodecError> {
        let state = seed & 0x7f;
        if state == 0 {
            return Err(CodecError::ZeroSeed);
        }
        Ok(Scrambler { state })
    }

    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        let out = ((self.state >> 6) ^ (self.state >> 3)) & 1;
        self.state = ((self.state << 1) | out) & 0x7f;
        out
    }

    pub fn state(&self) -> u8 {
        self.state
    }
}

/// XOR `bits` with the scrambler sequence started from `seed`. Self-inverse.
pub fn scramble(bits: &[u8], seed: u8) -> Result<Vec<u8>, CodecError> {
    let mut s = Scrambler::new(seed)?;
    Ok(bits.iter().map(|b| b ^ s.next_bit()).collect())
}

/// Descramble a data field whose first seven bits were zero before
/// scrambling. The seven received bits are the scrambler output, which is
/// also the register content needed to continue the sequence.
///
/// Returns `None` when the recovered state is zero (not a valid sequence).
pub fn descramble_recovering_seed(bits: &[u8]) -> Option<Vec<u8>> {
    if bits.len() < 7 {
        return None;
    }
    let state = bits[..7].iter().fold(0u8, |acc, b| (acc << 1) | (b & 1));
    let mut s = Scrambler::new(state).ok()?;
    let mut out = vec![0u8; 7];
    out.extend(bits[7..].iter().map(|b| b ^ s.next_bit()));
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Register-array LFSR written independently of `Scrambler`.
    fn reference_sequence(seed: u8, n: usize) -> Vec<u8> {
        // x[0] = x1 ... x[6] = x7
        let mut x: Vec<u8> = (0..7).map(|i| (seed >> i) & 1).collect();
        (0..n)
            .map(|_| {
                let out = x[6] ^ x[3];
                x.rotate_right(1);
                x[0] = out;
                out
            })
            .collect()
    }

    #[test]
    fn zero_input_yields_sequence() {
        let pn = scramble(&[0; 127], 0x7f).unwrap();
        assert_eq!(pn, reference_sequence(0x7f, 127));
        // All-ones state produces 0000 1110 1111 0010 ...
        assert_eq!(&pn[..16], &[0, 0, 0, 0, 1, 1, 1, 0, 1, 1, 1, 1, 0, 0, 1, 0]);
    }

    #[test]
    fn hand_iterated_seed() {
        // Frozen from a separate script run of the register, seed x7..x1 = 1011101.
        let expect = [0u8, 1, 1, 0, 1, 1, 0, 0, 0, 0, 0, 1, 1, 0, 0, 1];
        assert_eq!(reference_sequence(DEFAULT_SEED, 16), expect);
        assert_eq!(scramble(&[0; 16], DEFAULT_SEED).unwrap(), expect);
    }

    #[test]
    fn period_is_127() {
        let pn = scramble(&[0; 254], 0x35).unwrap();
        assert_eq!(&pn[..127], &pn[127..]);
    }

    #[test]
    fn zero_seed_rejected() {
        assert_eq!(scramble(&[0, 1], 0), Err(CodecError::ZeroSeed));
    }

    #[test]
    fn seed_recovery() {
        let mut data = vec![0u8; 7];
        data.extend((0..200).map(|i| ((i * 7 + 3) % 5 == 0) as u8));
        let tx = scramble(&data, 0x2b).unwrap();
        assert_eq!(descramble_recovering_seed(&tx).unwrap(), data);
    }

    proptest! {
        #[test]
        fn involution(seed in 1u8..128, bits in proptest::collection::vec(0u8..2, 0..1000)) {
            let once = scramble(&bits, seed).unwrap();
            prop_assert_eq!(scramble(&once, seed).unwrap(), bits);
        }
    }
}
