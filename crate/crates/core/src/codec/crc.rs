/// CRC-8 (x^8 + x^2 + x + 1, register preset to ones, output complemented)
/// over a bit sequence. Returns c7 first, the order in which it is sent.
pub fn crc8(bits: &[u8]) -> [u8; 8] {
    let mut reg: u8 = 0xff;
    for &b in bits {
        let fb = ((reg >> 7) ^ b) & 1;
        reg <<= 1;
        if fb == 1 {
            reg ^= 0x07;
        }
    }
    let reg = !reg;
    std::array::from_fn(|i| (reg >> (7 - i)) & 1)
}

pub fn crc8_matches(bits: &[u8], received: &[u8]) -> bool {
    received.len() == 8 && crc8(bits)[..] == *received
}

/// IEEE CRC-32 of an octet sequence.
pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

/// Append the 4-octet frame check sequence (least significant octet first).
pub fn append_fcs(payload: &[u8]) -> Vec<u8> {
    let mut out = payload.to_vec();
    out.extend_from_slice(&crc32(payload).to_le_bytes());
    out
}

/// Split a PSDU into payload and FCS verdict. `None` if shorter than the FCS.
pub fn check_fcs(psdu: &[u8]) -> Option<(&[u8], bool)> {
    if psdu.len() < 4 {
        return None;
    }
    let (payload, fcs) = psdu.split_at(psdu.len() - 4);
    let expected = crc32(payload).to_le_bytes();
    Some((payload, fcs == expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reflected bitwise CRC-32 (poly 0xEDB88320).
    fn crc32_bitwise(bytes: &[u8]) -> u32 {
        let mut c = 0xffff_ffffu32;
        for &b in bytes {
            c ^= b as u32;
            for _ in 0..8 {
                c = if c & 1 == 1 { (c >> 1) ^ 0xedb8_8320 } else { c >> 1 };
            }
        }
        !c
    }

    /// CRC-8 as polynomial long division over GF(2) on explicit bit vectors.
    /// Needs at least 8 message bits.
    fn crc8_division(bits: &[u8]) -> [u8; 8] {
        // Preset ones == complement the first 8 message bits.
        let mut msg: Vec<u8> = bits.to_vec();
        for b in msg.iter_mut().take(8) {
            *b ^= 1;
        }
        let n = msg.len();
        msg.extend([0u8; 8]);
        let poly = [1u8, 0, 0, 0, 0, 0, 1, 1, 1];
        for i in 0..n {
            if msg[i] == 1 {
                for (j, p) in poly.iter().enumerate() {
                    msg[i + j] ^= p;
                }
            }
        }
        std::array::from_fn(|i| msg[n + i] ^ 1)
    }

    #[test]
    fn crc32_check_value() {
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn crc8_all_zero_message() {
        // Preset ones shifted through 34 zero bits, computed by the division form.
        assert_eq!(crc8(&[0; 34]), crc8_division(&[0; 34]));
        assert_ne!(crc8(&[0; 34]), [0; 8]);
    }

    #[test]
    fn fcs_roundtrip_and_corruption() {
        let psdu = append_fcs(b"hello world");
        assert_eq!(check_fcs(&psdu), Some((&b"hello world"[..], true)));
        let mut bad = psdu.clone();
        bad[3] ^= 0x10;
        assert!(!check_fcs(&bad).unwrap().1);
        assert_eq!(check_fcs(&[1, 2]), None);
    }

    proptest! {
        #[test]
        fn crc32_matches_bitwise(bytes in proptest::collection::vec(any::<u8>(), 0..300)) {
            prop_assert_eq!(crc32(&bytes), crc32_bitwise(&bytes));
        }

        #[test]
        fn crc8_matches_division(bits in proptest::collection::vec(0u8..2, 8..64)) {
            prop_assert_eq!(crc8(&bits), crc8_division(&bits));
        }
    }
}
