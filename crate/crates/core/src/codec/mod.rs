//! Bit-level processing shared by every frame format.
//!
//! Bits are `u8` values in {0, 1} in transmission order. LLRs are `f64` with
//! the convention used across the crate: a positive LLR favours bit value 1.

mod bcc;
mod crc;
mod interleaver;
mod modulation;
mod parser;
mod scrambler;

pub use bcc::{bcc_encode, depuncture, punctured_len, viterbi_decode_soft, ViterbiDecoder};
pub use crc::{append_fcs, check_fcs, crc32, crc8, crc8_matches};
pub use interleaver::{deinterleave_llr, interleave, Interleaver, InterleaverKind};
pub use modulation::{demap_llr, demap_llr_into, hard_decision, map_qbpsk, map_symbols, nearest_point};
pub use parser::{stream_deparse_into, stream_parse};
pub use scrambler::{descramble_recovering_seed, scramble, Scrambler, DEFAULT_SEED};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("scrambler seed must be non-zero")]
    ZeroSeed,
    #[error("unsupported code rate {0}/{1}")]
    UnsupportedRate(usize, usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoiseVar(f64),
    #[error("invalid interleaver shape: {n_cbps} coded bits with {n_bpsc} bits per subcarrier")]
    BadInterleaverShape { n_cbps: usize, n_bpsc: usize },
}

/// Expand octets to bits, LSB of each octet first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(bytes.len() * 8);
    for b in bytes {
        for i in 0..8 {
            bits.push((b >> i) & 1);
        }
    }
    bits
}

/// Pack bits (LSB first) back into octets. Trailing bits that do not fill an
/// octet are dropped.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks_exact(8).map(|c| c.iter().enumerate().fold(0u8, |acc, (i, b)| acc | ((b & 1) << i))).collect()
}

/// Little-endian unsigned field of `width` bits.
pub fn push_field(bits: &mut Vec<u8>, value: u64, width: usize) {
    for i in 0..width {
        bits.push(((value >> i) & 1) as u8);
    }
}

pub fn read_field(bits: &[u8], offset: usize, width: usize) -> u64 {
    bits[offset..offset + width].iter().enumerate().fold(0, |acc, (i, b)| acc | ((*b as u64 & 1) << i))
}
