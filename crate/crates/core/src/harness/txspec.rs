use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::iqfile::IqHeader;
use super::sweep::{ChannelModel, SweepError};
use crate::channel::{propagate, tgac_model_b_taps, MimoChannelTaps};
use crate::params::{PhyFormat, SAMPLE_RATE};
use crate::tx::{assemble_packet, PhyConfig, TxFrame};
use crate::C64;

fn default_payload_bytes() -> usize {
    100
}
fn default_n_tx() -> usize {
    1
}
fn default_pad() -> usize {
    200
}
fn default_channel() -> ChannelModel {
    ChannelModel::Ideal
}
fn default_snr() -> f64 {
    30.0
}

/// Description of a single-frame capture, as read from a JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxSpec {
    pub format: PhyFormat,
    #[serde(default)]
    pub mcs: u8,
    /// Explicit payload; random bytes from `seed` when absent.
    #[serde(default)]
    pub payload_hex: Option<String>,
    #[serde(default = "default_payload_bytes")]
    pub payload_bytes: usize,
    #[serde(default = "default_n_tx")]
    pub n_tx: usize,
    /// Receive antennas in the capture; defaults to `n_tx`.
    #[serde(default)]
    pub n_rx: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pad")]
    pub lead: usize,
    #[serde(default = "default_pad")]
    pub trail: usize,
    #[serde(default = "default_channel")]
    pub channel: ChannelModel,
    /// Ignored for the ideal channel.
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub cfo_hz: f64,
}

fn parse_hex(s: &str) -> Result<Vec<u8>, SweepError> {
    let s = s.trim();
    if !s.len().is_multiple_of(2) {
        return Err(SweepError::InvalidSpec("payload_hex has an odd number of digits".into()));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(|e| SweepError::InvalidSpec(format!("payload_hex: {e}"))))
        .collect()
}

impl TxSpec {
    pub fn payload(&self) -> Result<Vec<u8>, SweepError> {
        match &self.payload_hex {
            Some(h) => parse_hex(h),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok((0..self.payload_bytes).map(|_| rng.random()).collect())
            }
        }
    }

    pub fn phy_config(&self) -> Result<PhyConfig, SweepError> {
        let payload = self.payload()?;
        let cfg = match self.format {
            PhyFormat::Legacy => PhyConfig::legacy(self.mcs, payload),
            PhyFormat::Ht => PhyConfig::ht(self.mcs, payload),
            PhyFormat::VhtSu => PhyConfig::vht_su(self.mcs, payload),
            PhyFormat::VhtNdp => PhyConfig::vht_ndp(),
            PhyFormat::VhtMu => {
                return Err(SweepError::InvalidSpec("MU frames need sounding; use the mu-session command".into()))
            }
        };
        Ok(cfg.with_n_tx(self.n_tx))
    }

    pub fn frame(&self) -> Result<TxFrame, SweepError> {
        Ok(assemble_packet(&self.phy_config()?, None)?)
    }

    /// The frame after the configured channel, CFO and noise.
    pub fn capture(&self) -> Result<(IqHeader, Vec<Vec<C64>>), SweepError> {
        let frame = self.frame()?;
        let n_tx = frame.streams.len();
        let n_rx = self.n_rx.unwrap_or(n_tx);
        if !(1..=4).contains(&n_rx) {
            return Err(SweepError::InvalidSpec("n_rx must be 1-4".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed);
        let direct = || {
            let h: Vec<Vec<C64>> = (0..n_rx)
                .map(|r| (0..n_tx).map(|t| C64::new((t == r.min(n_tx - 1)) as u8 as f64, 0.0)).collect())
                .collect();
            MimoChannelTaps::flat(&h)
        };
        let (channel, snr) = match self.channel {
            ChannelModel::Ideal => (direct(), f64::INFINITY),
            ChannelModel::Awgn => (direct(), self.snr_db),
            ChannelModel::TgacB => (tgac_model_b_taps(rng.random(), n_rx, n_tx), self.snr_db),
        };
        let streams = propagate(&frame.streams, &channel, self.lead, self.trail, self.cfo_hz, snr, &mut rng)
            .map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
        let meta = serde_json::to_value(self).map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
        Ok((IqHeader::for_streams(&streams, SAMPLE_RATE, meta), streams))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(json: &str) -> TxSpec {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let s = spec(r#"{"format": "legacy", "mcs": 3}"#);
        assert_eq!((s.n_tx, s.payload_bytes, s.lead, s.channel), (1, 100, 200, ChannelModel::Ideal));
        assert_eq!(s.payload().unwrap().len(), 100);
        let (h, streams) = s.capture().unwrap();
        assert_eq!(h.n_streams, 1);
        assert_eq!(streams[0].len(), 400 + s.frame().unwrap().len());
    }

    #[test]
    fn explicit_payload_and_unknown_fields() {
        let s = spec(r#"{"format": "ht", "mcs": 9, "n_tx": 2, "payload_hex": "00ff10"}"#);
        assert_eq!(s.payload().unwrap(), vec![0, 255, 16]);
        assert!(serde_json::from_str::<TxSpec>(r#"{"format": "legacy", "bogus": 1}"#).is_err());
        assert!(spec(r#"{"format": "legacy", "payload_hex": "abc"}"#).payload().is_err());
        assert!(spec(r#"{"format": "vht-mu"}"#).frame().is_err());
    }
}
