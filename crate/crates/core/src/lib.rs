//! 802.11a/g/n/ac 20 MHz baseband transceiver.
//!
//! The crate covers the full chain from payload octets to complex baseband
//! samples and back: legacy, HT (two spatial streams) and VHT (single-user,
//! two-user downlink MU-MIMO and null data packets). A channel simulator and
//! a Monte-Carlo harness sit on top for packet delivery ratio studies.

pub mod channel;
pub mod codec;
pub mod diagnostics;
pub mod harness;
pub mod mu;
pub mod ofdm;
pub mod params;
pub mod rx;
pub mod signal;
pub mod sync;
pub mod tx;

/// Complex baseband sample.
pub type C64 = num_complex::Complex<f64>;
