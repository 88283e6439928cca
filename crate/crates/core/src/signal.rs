//! Bit layouts of the SIG fields and the VHT PSDU framing.
//!
//! Builders return bits in transmission order including the six tail bits;
//! parsers take the decoded bits (tail included or not) and validate parity
//! or CRC.

use crate::codec::{crc8, crc8_matches, push_field, read_field};
use crate::params::{legacy_mcs_from_rate_bits, LSIG_RATE_BITS};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SigError {
    #[error("L-SIG parity check failed")]
    ParityFail,
    #[error("L-SIG rate field {0:?} is not a valid rate")]
    BadRate([u8; 4]),
    #[error("L-SIG reserved bit is set")]
    ReservedBitSet,
    #[error("SIG CRC-8 mismatch")]
    CrcFail,
    #[error("{field} value {value} exceeds {max}")]
    FieldOverflow { field: &'static str, value: u64, max: u64 },
    #[error("field needs {expected} bits, got {got}")]
    ShortField { expected: usize, got: usize },
}

fn check_width(field: &'static str, value: u64, width: usize) -> Result<(), SigError> {
    let max = (1u64 << width) - 1;
    if value > max {
        return Err(SigError::FieldOverflow { field, value, max });
    }
    Ok(())
}

fn need(bits: &[u8], n: usize) -> Result<(), SigError> {
    if bits.len() < n {
        return Err(SigError::ShortField { expected: n, got: bits.len() });
    }
    Ok(())
}

/// Legacy SIGNAL field: rate, reserved, 12-bit length, even parity, tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LSig {
    pub mcs: u8,
    pub length: u16,
}

impl LSig {
    pub fn to_bits(&self) -> Result<Vec<u8>, SigError> {
        check_width("L-SIG length", self.length as u64, 12)?;
        let rate = *LSIG_RATE_BITS.get(self.mcs as usize).ok_or(SigError::FieldOverflow {
            field: "L-SIG rate",
            value: self.mcs as u64,
            max: 7,
        })?;
        let mut bits = rate.to_vec();
        bits.push(0);
        push_field(&mut bits, self.length as u64, 12);
        let parity = bits.iter().fold(0, |a, b| a ^ b);
        bits.push(parity);
        bits.extend([0; 6]);
        Ok(bits)
    }

    pub fn from_bits(bits: &[u8]) -> Result<LSig, SigError> {
        need(bits, 18)?;
        let parity = bits[..18].iter().fold(0, |a, b| a ^ b);
        if parity != 0 {
            return Err(SigError::ParityFail);
        }
        if bits[4] != 0 {
            return Err(SigError::ReservedBitSet);
        }
        let rate = [bits[0], bits[1], bits[2], bits[3]];
        let mcs = legacy_mcs_from_rate_bits(rate).ok_or(SigError::BadRate(rate))?;
        Ok(LSig { mcs, length: read_field(bits, 5, 12) as u16 })
    }
}

fn seal_two_symbol_sig(bits: &mut Vec<u8>) {
    debug_assert_eq!(bits.len(), 34);
    let crc = crc8(bits);
    bits.extend(crc);
    bits.extend([0; 6]);
}

fn check_two_symbol_sig(bits: &[u8]) -> Result<(), SigError> {
    need(bits, 42)?;
    if !crc8_matches(&bits[..34], &bits[34..42]) {
        return Err(SigError::CrcFail);
    }
    Ok(())
}

/// HT-SIG (two symbols). Fields other than MCS and length are fixed to the
/// values this transceiver uses: 20 MHz, smoothing recommended, not a
/// sounding frame, no aggregation, no STBC, BCC, long GI, no extension
/// streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HtSig {
    pub mcs: u8,
    pub length: u16,
}

impl HtSig {
    pub fn to_bits(&self) -> Result<Vec<u8>, SigError> {
        check_width("HT-SIG MCS", self.mcs as u64, 7)?;
        let mut bits = Vec::with_capacity(48);
        push_field(&mut bits, self.mcs as u64, 7);
        bits.push(0); // CBW 20
        push_field(&mut bits, self.length as u64, 16);
        bits.push(1); // smoothing
        bits.push(1); // not sounding
        bits.push(1); // reserved
        bits.push(0); // aggregation
        push_field(&mut bits, 0, 2); // STBC
        bits.push(0); // FEC: BCC
        bits.push(0); // short GI
        push_field(&mut bits, 0, 2); // extension spatial streams
        seal_two_symbol_sig(&mut bits);
        Ok(bits)
    }

    pub fn from_bits(bits: &[u8]) -> Result<HtSig, SigError> {
        check_two_symbol_sig(bits)?;
        Ok(HtSig { mcs: read_field(bits, 0, 7) as u8, length: read_field(bits, 8, 16) as u16 })
    }
}

pub const VHT_SU_GROUP_ID: u8 = 63;

/// VHT-SIG-A (two symbols).
///
/// For a single-user frame `nsts[0]` is the stream count and `partial_aid`
/// is carried; for a multi-user frame `nsts[u]` is the stream count of user
/// position `u` and the per-user MCS lives in VHT-SIG-B.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VhtSigA {
    pub group_id: u8,
    pub nsts: [u8; 4],
    pub partial_aid: u16,
    pub su_mcs: u8,
}

impl VhtSigA {
    pub fn single_user(mcs: u8, nsts: u8) -> Self {
        VhtSigA { group_id: VHT_SU_GROUP_ID, nsts: [nsts, 0, 0, 0], partial_aid: 0, su_mcs: mcs }
    }

    pub fn multi_user(group_id: u8, nsts: [u8; 4]) -> Self {
        VhtSigA { group_id, nsts, partial_aid: 0, su_mcs: 0 }
    }

    pub fn is_su(&self) -> bool {
        self.group_id == 0 || self.group_id == VHT_SU_GROUP_ID
    }

    pub fn total_sts(&self) -> usize {
        if self.is_su() {
            self.nsts[0] as usize
        } else {
            self.nsts.iter().map(|&n| n as usize).sum()
        }
    }

    pub fn to_bits(&self) -> Result<Vec<u8>, SigError> {
        check_width("VHT-SIG-A group ID", self.group_id as u64, 6)?;
        let mut bits = Vec::with_capacity(48);
        push_field(&mut bits, 0, 2); // BW 20
        bits.push(1); // reserved
        bits.push(0); // STBC
        push_field(&mut bits, self.group_id as u64, 6);
        if self.is_su() {
            if !(1..=8).contains(&self.nsts[0]) {
                return Err(SigError::FieldOverflow { field: "VHT-SIG-A NSTS", value: self.nsts[0] as u64, max: 8 });
            }
            push_field(&mut bits, (self.nsts[0] - 1) as u64, 3);
            check_width("VHT-SIG-A partial AID", self.partial_aid as u64, 9)?;
            push_field(&mut bits, self.partial_aid as u64, 9);
        } else {
            for &n in &self.nsts {
                check_width("VHT-SIG-A MU NSTS", n as u64, 3)?;
                push_field(&mut bits, n as u64, 3);
            }
        }
        bits.push(0); // TXOP_PS_NOT_ALLOWED
        bits.push(1); // reserved
        bits.push(0); // short GI
        bits.push(0); // short GI disambiguation
        bits.push(0); // coding: BCC
        bits.push(0); // LDPC extra symbol
        if self.is_su() {
            check_width("VHT-SIG-A MCS", self.su_mcs as u64, 4)?;
            push_field(&mut bits, self.su_mcs as u64, 4);
        } else {
            push_field(&mut bits, 0b1000, 4); // users 1..3 BCC, reserved
        }
        bits.push(0); // beamformed
        bits.push(1); // reserved
        seal_two_symbol_sig(&mut bits);
        Ok(bits)
    }

    pub fn from_bits(bits: &[u8]) -> Result<VhtSigA, SigError> {
        check_two_symbol_sig(bits)?;
        let group_id = read_field(bits, 4, 6) as u8;
        let mut out = VhtSigA { group_id, nsts: [0; 4], partial_aid: 0, su_mcs: 0 };
        if out.is_su() {
            out.nsts[0] = read_field(bits, 10, 3) as u8 + 1;
            out.partial_aid = read_field(bits, 13, 9) as u16;
            out.su_mcs = read_field(bits, 28, 4) as u8;
        } else {
            for u in 0..4 {
                out.nsts[u] = read_field(bits, 10 + 3 * u, 3) as u8;
            }
        }
        Ok(out)
    }
}

/// VHT-SIG-B for 20 MHz: 26 bits including tail. The length counts 4-octet
/// words of the PSDU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VhtSigB {
    Su { length_words: u32 },
    Mu { length_words: u16, mcs: u8 },
}

pub const VHT_SIGB_BITS: usize = 26;

impl VhtSigB {
    pub fn length_words(&self) -> usize {
        match *self {
            VhtSigB::Su { length_words } => length_words as usize,
            VhtSigB::Mu { length_words, .. } => length_words as usize,
        }
    }

    pub fn to_bits(&self) -> Result<Vec<u8>, SigError> {
        let mut bits = Vec::with_capacity(VHT_SIGB_BITS);
        match *self {
            VhtSigB::Su { length_words } => {
                check_width("VHT-SIG-B length", length_words as u64, 17)?;
                push_field(&mut bits, length_words as u64, 17);
                push_field(&mut bits, 0b111, 3);
            }
            VhtSigB::Mu { length_words, mcs } => {
                push_field(&mut bits, length_words as u64, 16);
                check_width("VHT-SIG-B MCS", mcs as u64, 4)?;
                push_field(&mut bits, mcs as u64, 4);
            }
        }
        bits.extend([0; 6]);
        Ok(bits)
    }

    pub fn from_bits(bits: &[u8], multi_user: bool) -> Result<VhtSigB, SigError> {
        need(bits, 20)?;
        Ok(if multi_user {
            VhtSigB::Mu { length_words: read_field(bits, 0, 16) as u16, mcs: read_field(bits, 16, 4) as u8 }
        } else {
            VhtSigB::Su { length_words: read_field(bits, 0, 17) as u32 }
        })
    }
}

const DELIMITER_SIGNATURE: u8 = 0x4E;

/// Wrap an MPDU (payload + FCS) into a VHT PSDU: a 4-octet length delimiter,
/// the MPDU, and zero padding to a 4-octet boundary.
pub fn build_vht_psdu(mpdu: &[u8]) -> Result<Vec<u8>, SigError> {
    check_width("MPDU length", mpdu.len() as u64, 16)?;
    let len = (mpdu.len() as u16).to_le_bytes();
    let crc_bits: Vec<u8> = len.iter().flat_map(|b| (0..8).map(move |i| (b >> i) & 1)).collect();
    let crc = crc8(&crc_bits).iter().fold(0u8, |acc, b| (acc << 1) | b);
    let mut psdu = vec![len[0], len[1], crc, DELIMITER_SIGNATURE];
    psdu.extend_from_slice(mpdu);
    psdu.resize(psdu.len().div_ceil(4) * 4, 0);
    Ok(psdu)
}

/// Extract the MPDU from a VHT PSDU. `None` if the delimiter is corrupt or
/// announces more octets than are present.
pub fn parse_vht_psdu(psdu: &[u8]) -> Option<&[u8]> {
    if psdu.len() < 4 || psdu[3] != DELIMITER_SIGNATURE {
        return None;
    }
    let crc_bits: Vec<u8> = psdu[..2].iter().flat_map(|b| (0..8).map(move |i| (b >> i) & 1)).collect();
    let crc = crc8(&crc_bits).iter().fold(0u8, |acc, b| (acc << 1) | b);
    if crc != psdu[2] {
        return None;
    }
    let len = u16::from_le_bytes([psdu[0], psdu[1]]) as usize;
    psdu.get(4..4 + len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lsig_layout() {
        let bits = LSig { mcs: 0, length: 100 }.to_bits().unwrap();
        assert_eq!(bits.len(), 24);
        assert_eq!(&bits[..4], &[1, 1, 0, 1]);
        assert_eq!(read_field(&bits, 5, 12), 100);
        assert_eq!(bits[17], bits[..17].iter().fold(0, |a, b| a ^ b));
        assert_eq!(&bits[18..], &[0; 6]);
        assert_eq!(LSig::from_bits(&bits).unwrap(), LSig { mcs: 0, length: 100 });
    }

    #[test]
    fn lsig_errors() {
        assert!(matches!(LSig { mcs: 0, length: 4096 }.to_bits(), Err(SigError::FieldOverflow { .. })));
        let mut bits = LSig { mcs: 3, length: 7 }.to_bits().unwrap();
        bits[6] ^= 1;
        assert_eq!(LSig::from_bits(&bits), Err(SigError::ParityFail));
    }

    #[test]
    fn ht_sig_roundtrip_and_crc() {
        let sig = HtSig { mcs: 13, length: 504 };
        let mut bits = sig.to_bits().unwrap();
        assert_eq!(bits.len(), 48);
        assert_eq!(HtSig::from_bits(&bits).unwrap(), sig);
        bits[3] ^= 1;
        assert_eq!(HtSig::from_bits(&bits), Err(SigError::CrcFail));
    }

    #[test]
    fn vht_siga_roundtrip() {
        for sig in [VhtSigA::single_user(7, 1), VhtSigA::single_user(0, 2), VhtSigA::multi_user(5, [1, 1, 0, 0])] {
            let bits = sig.to_bits().unwrap();
            assert_eq!(bits.len(), 48);
            assert_eq!(VhtSigA::from_bits(&bits).unwrap(), sig);
        }
        assert_eq!(VhtSigA::multi_user(5, [1, 1, 0, 0]).total_sts(), 2);
    }

    #[test]
    fn vht_sigb_roundtrip() {
        let su = VhtSigB::Su { length_words: 127 };
        let mu = VhtSigB::Mu { length_words: 130, mcs: 4 };
        assert_eq!(VhtSigB::from_bits(&su.to_bits().unwrap(), false).unwrap(), su);
        assert_eq!(VhtSigB::from_bits(&mu.to_bits().unwrap(), true).unwrap(), mu);
        assert_eq!(su.to_bits().unwrap().len(), VHT_SIGB_BITS);
    }

    #[test]
    fn vht_psdu_framing() {
        let mpdu: Vec<u8> = (0..505u32).map(|i| (i * 31) as u8).collect();
        let psdu = build_vht_psdu(&mpdu).unwrap();
        assert_eq!(psdu.len() % 4, 0);
        assert_eq!(psdu.len(), 512);
        assert_eq!(parse_vht_psdu(&psdu).unwrap(), &mpdu[..]);
        let mut bad = psdu.clone();
        bad[0] ^= 1;
        assert_eq!(parse_vht_psdu(&bad), None);
    }
}
