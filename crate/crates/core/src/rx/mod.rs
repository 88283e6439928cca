//! Receiver: detection, synchronization, L-SIG, format classification and
//! per-format payload decoding.
//!
//! Each detected packet runs through the same sequence: legacy channel
//! estimate from the L-LTF, L-SIG, then (for 6 Mb/s L-SIG) an axis test on
//! the next two symbols confirmed by the SIG CRC. Legacy and VHT single
//! stream paths equalize per subcarrier on the first receive antenna; HT
//! uses 2x2 zero forcing on two antennas.

mod decode;
mod estimate;

pub use decode::{
    classify_format, decode_data_bits, decode_lsig, decode_sig_pair, decode_sigb, equalize_siso, evm_db, push_llrs,
    sig_axis, Equalized, FormatGuess, SigAxis,
};
pub use estimate::{
    common_phase, condition_number, detect_zf, estimate_ht_mimo_channel, estimate_legacy_channel,
    estimate_sounding_channel, estimate_vht_channel, legacy_noise_variance, pilot_phase_track, rotate, ChannelEstimate,
    EstimateKind, SingularChannel, ZfMatrix, MAX_CONDITION,
};

use crate::codec::{
    bits_to_bytes, check_fcs, nearest_point, stream_deparse_into, CodecError, Interleaver, InterleaverKind,
    ViterbiDecoder,
};
use crate::ofdm::{Ofdm, Spectrum};
use crate::params::{
    bin, mcs_params, pilot_values, symbols_after_lsig, symbols_for_payload, Modulation, ParamError, PhyFormat,
    PilotPattern, SubcarrierMap, FFT_SIZE, HT_DATA_PILOT_OFFSET, HT_TONES, LEGACY_TONES, PILOT_INDICES, SERVICE_BITS,
    SYMBOL_SAMPLES, TAIL_BITS, VHT_DATA_PILOT_OFFSET, VHT_SIGB_PILOT_OFFSET,
};
use crate::signal::{parse_vht_psdu, HtSig, LSig, SigError, VhtSigA, VhtSigB};
use crate::sync::{autocorr_stream, synchronize, SyncConfig, SyncError, SyncResult, Trigger};
use crate::tx::FieldKind;
use crate::C64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RxError {
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error(transparent)]
    Sig(#[from] SigError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("packet runs past the end of the capture ({needed} > {len} samples)")]
    Truncated { needed: usize, len: usize },
    #[error("unsupported frame: {0}")]
    Unsupported(String),
    #[error("inconsistent signalling: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxConfig {
    pub sync: SyncConfig,
    /// User position decoded in VHT MU frames.
    pub user_position: usize,
    /// Samples the FFT window is moved back into the guard interval.
    pub backoff: usize,
    /// Lower bound on the per-tone noise variance estimate.
    pub noise_floor: f64,
    /// Record equalized points per field in the diagnostics.
    pub keep_constellation: bool,
}

impl Default for RxConfig {
    fn default() -> Self {
        RxConfig {
            sync: SyncConfig::default(),
            user_position: 0,
            backoff: 6,
            noise_floor: 1e-6,
            keep_constellation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RxDiagnostics {
    pub trigger: usize,
    pub ltf_start: usize,
    /// rad/sample.
    pub coarse_cfo: f64,
    pub fine_cfo: f64,
    pub overall_cfo: f64,
    /// Per-tone noise variance from the L-LTF.
    pub noise_var: f64,
    /// Decision-directed EVM in dB per field.
    pub evm_db: Vec<(FieldKind, f64)>,
    /// Mean sample power of the HT-STF / VHT-STF.
    pub stf_power: Option<f64>,
    /// Data subcarriers erased because the 2x2 channel was singular.
    pub erased_subcarriers: usize,
    /// Estimate used to equalize the payload.
    pub channel: ChannelEstimate,
    /// Equalized points per field, filled when
    /// [`RxConfig::keep_constellation`] is set. SIG points are not derotated.
    pub constellation: Vec<(FieldKind, Vec<C64>)>,
}

impl RxDiagnostics {
    pub fn evm(&self, field: FieldKind) -> Option<f64> {
        self.evm_db.iter().find(|(f, _)| *f == field).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceivedPacket {
    pub format: PhyFormat,
    pub mcs: u8,
    /// MAC payload without FCS.
    pub payload: Vec<u8>,
    pub crc_ok: bool,
    /// Payload octets announced by the SIG fields (FCS excluded).
    pub signaled_length: usize,
    /// Estimated first sample of the L-STF.
    pub start: usize,
    /// Estimated first sample after the packet.
    pub end: usize,
    /// Sounding report of a null data packet.
    pub csi: Option<ChannelEstimate>,
    pub diagnostics: RxDiagnostics,
}

/// A trigger that did not produce a packet.
#[derive(Debug, Clone, PartialEq)]
pub struct RxDrop {
    pub trigger: usize,
    pub error: RxError,
}

// Events are consumed one at a time; boxing the packet buys nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum RxEvent {
    Packet(ReceivedPacket),
    Dropped(RxDrop),
}

/// Samples from the trigger to the point where a dropped packet re-arms.
const DROP_RESUME: usize = 160;

#[derive(Debug, Clone, Default)]
pub struct Receiver {
    config: RxConfig,
    ofdm: Ofdm,
}

/// Receive with the default configuration.
pub fn receive(streams: &[Vec<C64>]) -> Vec<ReceivedPacket> {
    let views: Vec<&[C64]> = streams.iter().map(|s| s.as_slice()).collect();
    Receiver::new(RxConfig::default()).receive(&views)
}

impl Receiver {
    pub fn new(config: RxConfig) -> Self {
        Receiver { config, ofdm: Ofdm::new() }
    }

    pub fn config(&self) -> &RxConfig {
        &self.config
    }

    /// Decode every packet in the capture (one slice per receive antenna).
    pub fn receive(&self, streams: &[&[C64]]) -> Vec<ReceivedPacket> {
        self.receive_events(streams)
            .into_iter()
            .filter_map(|e| match e {
                RxEvent::Packet(p) => Some(p),
                RxEvent::Dropped(_) => None,
            })
            .collect()
    }

    /// Like [`Receiver::receive`] but also reports triggers that were dropped.
    pub fn receive_events(&self, streams: &[&[C64]]) -> Vec<RxEvent> {
        if streams.is_empty() {
            return Vec::new();
        }
        let cfg = &self.config.sync;
        let rho: Vec<f64> = autocorr_stream(streams, cfg.lag, cfg.window, cfg.refresh).iter().map(|a| a.rho).collect();
        let mut trigger = Trigger::new(cfg.threshold, cfg.min_plateau);
        let mut dec = ViterbiDecoder::new();
        let mut events = Vec::new();
        while let Some(t) = trigger.next(&rho) {
            match self.decode_packet(streams, t, &mut dec) {
                Ok(p) => {
                    trigger.release(p.end.saturating_sub(16).max(t + 1), false);
                    events.push(RxEvent::Packet(p));
                }
                Err(error) => {
                    trigger.release(t + DROP_RESUME, true);
                    events.push(RxEvent::Dropped(RxDrop { trigger: t, error }));
                }
            }
        }
        events
    }

    /// Run the full per-packet pipeline for a trigger at `t`.
    pub fn decode_packet(
        &self,
        streams: &[&[C64]],
        t: usize,
        dec: &mut ViterbiDecoder,
    ) -> Result<ReceivedPacket, RxError> {
        let sync = synchronize(streams, t, &self.config.sync)?;
        let ctx = Ctx::new(streams, &sync, self.config.backoff, &self.ofdm);
        let n_rx = streams.len();

        let ltf1 = (0..n_rx).map(|r| ctx.fft(r, ctx.ltf_body(0), LEGACY_TONES)).collect::<Result<Vec<_>, _>>()?;
        let ltf2 = (0..n_rx).map(|r| ctx.fft(r, ctx.ltf_body(1), LEGACY_TONES)).collect::<Result<Vec<_>, _>>()?;
        let est_l = estimate_legacy_channel(&ltf1, &ltf2);
        let noise_l = legacy_noise_variance(&ltf1, &ltf2).max(self.config.noise_floor);
        let legacy_data = SubcarrierMap::legacy().data_indices;

        let lsig_sym = ctx.fft(0, ctx.body(0), LEGACY_TONES)?;
        let lsig = decode_lsig(&lsig_sym, &est_l, noise_l, dec)?;
        let lsig_eq =
            equalize_siso(&lsig_sym, &est_l, 0, &pilot_values(PilotPattern::Legacy, 0, 0), &legacy_data, noise_l);

        let mut diag = RxDiagnostics {
            trigger: t,
            ltf_start: sync.ltf_start,
            coarse_cfo: sync.coarse_cfo,
            fine_cfo: sync.fine_cfo,
            overall_cfo: sync.overall_cfo(),
            noise_var: noise_l,
            evm_db: vec![(FieldKind::LSig, evm_db(&lsig_eq.points, Modulation::Bpsk))],
            stf_power: None,
            erased_subcarriers: 0,
            channel: est_l.clone(),
            constellation: Vec::new(),
        };
        self.keep(&mut diag, FieldKind::LSig, &lsig_eq.points);

        if lsig.mcs == 0 {
            let sig_syms = (ctx.fft(0, ctx.body(1), LEGACY_TONES), ctx.fft(0, ctx.body(2), LEGACY_TONES));
            if let (Ok(s1), Ok(s2)) = sig_syms {
                let e1 =
                    equalize_siso(&s1, &est_l, 0, &pilot_values(PilotPattern::Legacy, 1, 0), &legacy_data, noise_l);
                let e2 =
                    equalize_siso(&s2, &est_l, 0, &pilot_values(PilotPattern::Legacy, 2, 0), &legacy_data, noise_l);
                match classify_format(&e1.points, &e2.points) {
                    FormatGuess::Ht => {
                        let bits = decode_sig_pair([&e1, &e2], [SigAxis::Imag, SigAxis::Imag], dec)?;
                        if let Ok(ht) = HtSig::from_bits(&bits) {
                            diag.evm_db.push((FieldKind::HtSig, sig_evm(&e1, &e2, [SigAxis::Imag; 2])));
                            self.keep(&mut diag, FieldKind::HtSig, &[e1.points, e2.points].concat());
                            return self.decode_ht(&ctx, &lsig, ht, noise_l, diag, dec);
                        }
                    }
                    FormatGuess::Vht => {
                        let bits = decode_sig_pair([&e1, &e2], [SigAxis::Real, SigAxis::Imag], dec)?;
                        if let Ok(siga) = VhtSigA::from_bits(&bits) {
                            diag.evm_db.push((FieldKind::VhtSigA, sig_evm(&e1, &e2, [SigAxis::Real, SigAxis::Imag])));
                            self.keep(&mut diag, FieldKind::VhtSigA, &[e1.points, e2.points].concat());
                            return self.decode_vht(&ctx, &lsig, siga, noise_l, diag, dec);
                        }
                    }
                    FormatGuess::Legacy => {}
                }
            }
        }
        self.decode_legacy(&ctx, &lsig, &est_l, noise_l, diag, dec)
    }

    fn keep(&self, diag: &mut RxDiagnostics, field: FieldKind, points: &[C64]) {
        if self.config.keep_constellation {
            diag.constellation.push((field, points.to_vec()));
        }
    }

    fn evm_acc(&self) -> EvmAcc {
        EvmAcc { keep: self.config.keep_constellation, ..Default::default() }
    }

    fn decode_legacy(
        &self,
        ctx: &Ctx,
        lsig: &LSig,
        est: &ChannelEstimate,
        noise: f64,
        mut diag: RxDiagnostics,
        dec: &mut ViterbiDecoder,
    ) -> Result<ReceivedPacket, RxError> {
        let p = mcs_params(PhyFormat::Legacy, lsig.mcs)?;
        let psdu_len = lsig.length as usize;
        let n_sym = symbols_for_payload(&p, psdu_len);
        ctx.require(ctx.sym_start(1 + n_sym))?;
        let data = SubcarrierMap::legacy().data_indices;
        let il = Interleaver::new(InterleaverKind::Legacy, p.n_cbpss, p.n_bpscs)?;
        let mut llrs = Vec::with_capacity(n_sym * p.n_cbps);
        let mut sym_llrs = Vec::with_capacity(p.n_cbps);
        let mut evm = self.evm_acc();
        for n in 0..n_sym {
            let y = ctx.fft(0, ctx.body(1 + n), LEGACY_TONES)?;
            let eq = equalize_siso(&y, est, 0, &pilot_values(PilotPattern::Legacy, n + 1, 0), &data, noise);
            evm.add(&eq.points, p.modulation);
            sym_llrs.clear();
            push_llrs(&eq.points, &eq.noise, p.modulation, &mut sym_llrs);
            il.deinterleave_into(&sym_llrs, &mut llrs)?;
        }
        let bits = decode_data_bits(&llrs, p.code_rate, SERVICE_BITS + 8 * psdu_len, dec)?;
        let (payload, crc_ok) = split_psdu(bits.as_deref(), psdu_len);
        evm.finish(&mut diag);
        Ok(ReceivedPacket {
            format: PhyFormat::Legacy,
            mcs: lsig.mcs,
            payload,
            crc_ok,
            signaled_length: psdu_len.saturating_sub(4),
            start: ctx.packet_start(),
            end: ctx.sym_start(1 + n_sym),
            csi: None,
            diagnostics: diag,
        })
    }

    fn decode_ht(
        &self,
        ctx: &Ctx,
        lsig: &LSig,
        ht: HtSig,
        noise_l: f64,
        mut diag: RxDiagnostics,
        dec: &mut ViterbiDecoder,
    ) -> Result<ReceivedPacket, RxError> {
        if ctx.streams.len() < 2 {
            return Err(RxError::Unsupported("HT frames need two receive antennas".into()));
        }
        let p = mcs_params(PhyFormat::Ht, ht.mcs)?;
        let psdu_len = ht.length as usize;
        let n_sym = symbols_for_payload(&p, psdu_len);
        let after = 2 + 1 + 2 + n_sym;
        if symbols_after_lsig(lsig.length as usize) != after {
            return Err(RxError::Inconsistent("L-SIG duration disagrees with HT-SIG".into()));
        }
        ctx.require(ctx.sym_start(1 + after))?;
        diag.stf_power = Some(ctx.power(ctx.sym_start(3), SYMBOL_SAMPLES, 2));

        let ltf = (0..2)
            .map(|n| (0..2).map(|r| ctx.fft(r, ctx.body(4 + n), HT_TONES)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let est = estimate_ht_mimo_channel(&ltf);
        let noise = noise_l * HT_TONES as f64 / LEGACY_TONES as f64;
        let data = SubcarrierMap::ht().data_indices;
        let zf: Vec<Option<ZfMatrix>> = data.iter().map(|&k| ZfMatrix::new(&est.matrix(k)).ok()).collect();
        diag.erased_subcarriers = zf.iter().filter(|z| z.is_none()).count();

        let ils = [
            Interleaver::new(InterleaverKind::Ht { stream: 0 }, p.n_cbpss, p.n_bpscs)?,
            Interleaver::new(InterleaverKind::Ht { stream: 1 }, p.n_cbpss, p.n_bpscs)?,
        ];
        let mut llrs = Vec::with_capacity(n_sym * p.n_cbps);
        let mut pts: [Vec<C64>; 2] = Default::default();
        let mut nv: [Vec<f64>; 2] = Default::default();
        let mut sl: [Vec<f64>; 2] = Default::default();
        let mut di: [Vec<f64>; 2] = Default::default();
        let mut evm = self.evm_acc();
        for n in 0..n_sym {
            let mut y = [ctx.fft(0, ctx.body(6 + n), HT_TONES)?, ctx.fft(1, ctx.body(6 + n), HT_TONES)?];
            let pil = [
                pilot_values(PilotPattern::Ht2ss { stream: 0 }, n + HT_DATA_PILOT_OFFSET, n),
                pilot_values(PilotPattern::Ht2ss { stream: 1 }, n + HT_DATA_PILOT_OFFSET, n),
            ];
            let expected: Vec<[C64; 4]> = (0..2)
                .map(|r| {
                    std::array::from_fn(|j| {
                        let k = PILOT_INDICES[j];
                        est.get(r, 0, k) * pil[0][j] + est.get(r, 1, k) * pil[1][j]
                    })
                })
                .collect();
            let phi = common_phase(&y, &expected);
            for s in y.iter_mut() {
                rotate(s, -phi);
            }
            for s in 0..2 {
                pts[s].clear();
                nv[s].clear();
            }
            for (i, &k) in data.iter().enumerate() {
                let b = bin(k);
                match &zf[i] {
                    Some(z) => {
                        let s = z.apply([y[0][b], y[1][b]]);
                        for st in 0..2 {
                            pts[st].push(s[st]);
                            nv[st].push(noise * z.noise_gain[st]);
                        }
                    }
                    None => {
                        for st in 0..2 {
                            pts[st].push(C64::new(0.0, 0.0));
                            nv[st].push(f64::INFINITY);
                        }
                    }
                }
            }
            for s in 0..2 {
                evm.add(&pts[s], p.modulation);
                sl[s].clear();
                push_llrs(&pts[s], &nv[s], p.modulation, &mut sl[s]);
                di[s].clear();
                ils[s].deinterleave_into(&sl[s], &mut di[s])?;
            }
            stream_deparse_into(&[&di[0], &di[1]], p.n_bpscs, &mut llrs);
        }
        let bits = decode_data_bits(&llrs, p.code_rate, SERVICE_BITS + 8 * psdu_len, dec)?;
        let (payload, crc_ok) = split_psdu(bits.as_deref(), psdu_len);
        evm.finish(&mut diag);
        diag.channel = est;
        Ok(ReceivedPacket {
            format: PhyFormat::Ht,
            mcs: ht.mcs,
            payload,
            crc_ok,
            signaled_length: psdu_len.saturating_sub(4),
            start: ctx.packet_start(),
            end: ctx.sym_start(1 + after),
            csi: None,
            diagnostics: diag,
        })
    }

    fn decode_vht(
        &self,
        ctx: &Ctx,
        lsig: &LSig,
        siga: VhtSigA,
        noise_l: f64,
        mut diag: RxDiagnostics,
        dec: &mut ViterbiDecoder,
    ) -> Result<ReceivedPacket, RxError> {
        let n_ltf = siga.total_sts();
        if !(1..=2).contains(&n_ltf) {
            return Err(RxError::Unsupported(format!("{n_ltf} space-time streams")));
        }
        let after = symbols_after_lsig(lsig.length as usize);
        let n_sym = after
            .checked_sub(3 + n_ltf + 1)
            .ok_or_else(|| RxError::Inconsistent("L-SIG duration shorter than the VHT preamble".into()))?;
        ctx.require(ctx.sym_start(1 + after))?;
        let n_rx = ctx.streams.len();
        diag.stf_power = Some(ctx.power(ctx.sym_start(3), SYMBOL_SAMPLES, n_rx));
        let ltf = (0..n_ltf)
            .map(|n| (0..n_rx).map(|r| ctx.fft(r, ctx.body(4 + n), HT_TONES)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let end = ctx.sym_start(1 + after);

        if siga.is_su() && n_ltf == 2 {
            if n_sym != 0 {
                return Err(RxError::Unsupported("two-stream single-user VHT data".into()));
            }
            let csi = estimate_sounding_channel(&ltf);
            diag.channel = csi.clone();
            return Ok(ReceivedPacket {
                format: PhyFormat::VhtNdp,
                mcs: 0,
                payload: Vec::new(),
                crc_ok: true,
                signaled_length: 0,
                start: ctx.packet_start(),
                end,
                csi: Some(csi),
                diagnostics: diag,
            });
        }

        let (format, user) = if siga.is_su() {
            (PhyFormat::VhtSu, 0)
        } else {
            let u = self.config.user_position;
            if siga.nsts.get(u).copied() != Some(1) {
                return Err(RxError::Unsupported(format!("user position {u} carries no single stream")));
            }
            (PhyFormat::VhtMu, u)
        };
        let est = estimate_vht_channel(&ltf, user);
        let noise = noise_l * HT_TONES as f64 / LEGACY_TONES as f64;
        let data = SubcarrierMap::ht().data_indices;

        let y = ctx.fft(0, ctx.body(4 + n_ltf), HT_TONES)?;
        let eq = equalize_siso(&y, &est, 0, &pilot_values(PilotPattern::Vht, VHT_SIGB_PILOT_OFFSET, 0), &data, noise);
        diag.evm_db.push((FieldKind::VhtSigB, evm_db(&eq.points, Modulation::Bpsk)));
        self.keep(&mut diag, FieldKind::VhtSigB, &eq.points);
        let sigb = VhtSigB::from_bits(&decode_sigb(&eq, dec)?, format == PhyFormat::VhtMu)?;
        let mcs = match sigb {
            VhtSigB::Su { .. } => siga.su_mcs,
            VhtSigB::Mu { mcs, .. } => mcs,
        };
        let p = mcs_params(format, mcs)?;
        let psdu_len = sigb.length_words() * 4;
        let n_data_bits = n_sym * p.n_dbps;
        if SERVICE_BITS + 8 * psdu_len + TAIL_BITS > n_data_bits {
            return Err(RxError::Inconsistent("VHT-SIG-B length exceeds the data field".into()));
        }

        let il = Interleaver::new(InterleaverKind::Ht { stream: 0 }, p.n_cbpss, p.n_bpscs)?;
        let mut llrs = Vec::with_capacity(n_sym * p.n_cbps);
        let mut sym_llrs = Vec::with_capacity(p.n_cbps);
        let mut evm = self.evm_acc();
        for n in 0..n_sym {
            let y = ctx.fft(0, ctx.body(5 + n_ltf + n), HT_TONES)?;
            let pilots = pilot_values(PilotPattern::Vht, n + VHT_DATA_PILOT_OFFSET, n);
            let eq = equalize_siso(&y, &est, 0, &pilots, &data, noise);
            evm.add(&eq.points, p.modulation);
            sym_llrs.clear();
            push_llrs(&eq.points, &eq.noise, p.modulation, &mut sym_llrs);
            il.deinterleave_into(&sym_llrs, &mut llrs)?;
        }
        let bits = decode_data_bits(&llrs, p.code_rate, n_data_bits - TAIL_BITS, dec)?;
        let psdu = bits.map(|b| bits_to_bytes(&b[SERVICE_BITS..SERVICE_BITS + 8 * psdu_len]));
        let (payload, crc_ok, signaled_length) = match psdu.as_deref().and_then(parse_vht_psdu) {
            Some(mpdu) => match check_fcs(mpdu) {
                Some((payload, ok)) => (payload.to_vec(), ok, mpdu.len() - 4),
                None => (Vec::new(), false, 0),
            },
            None => (Vec::new(), false, psdu_len.saturating_sub(8)),
        };
        evm.finish(&mut diag);
        diag.channel = est;
        Ok(ReceivedPacket {
            format,
            mcs,
            payload,
            crc_ok,
            signaled_length,
            start: ctx.packet_start(),
            end,
            csi: None,
            diagnostics: diag,
        })
    }
}

/// Payload and FCS verdict from descrambled data bits.
fn split_psdu(bits: Option<&[u8]>, psdu_len: usize) -> (Vec<u8>, bool) {
    let Some(bits) = bits else {
        return (Vec::new(), false);
    };
    let psdu = bits_to_bytes(&bits[SERVICE_BITS..SERVICE_BITS + 8 * psdu_len]);
    match check_fcs(&psdu) {
        Some((payload, ok)) => (payload.to_vec(), ok),
        None => (Vec::new(), false),
    }
}

fn sig_evm(e1: &Equalized, e2: &Equalized, axes: [SigAxis; 2]) -> f64 {
    let mut acc = EvmAcc::default();
    for (e, a) in [e1, e2].into_iter().zip(axes) {
        let pts: Vec<C64> = match a {
            SigAxis::Real => e.points.clone(),
            SigAxis::Imag => e.points.iter().map(|p| p * C64::new(0.0, -1.0)).collect(),
        };
        acc.add(&pts, Modulation::Bpsk);
    }
    acc.db()
}

#[derive(Default)]
struct EvmAcc {
    err: f64,
    n: usize,
    keep: bool,
    points: Vec<C64>,
}

impl EvmAcc {
    fn add(&mut self, points: &[C64], m: Modulation) {
        for &p in points {
            self.err += (p - nearest_point(p, m)).norm_sqr();
        }
        self.n += points.len();
        if self.keep {
            self.points.extend_from_slice(points);
        }
    }

    fn finish(self, diag: &mut RxDiagnostics) {
        diag.evm_db.push((FieldKind::Data, self.db()));
        if self.keep {
            diag.constellation.push((FieldKind::Data, self.points));
        }
    }

    fn db(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        10.0 * (self.err / self.n as f64).max(1e-30).log10()
    }
}

/// Sample access for one synchronized packet.
struct Ctx<'a> {
    streams: &'a [&'a [C64]],
    eps: f64,
    ltf_start: usize,
    backoff: usize,
    /// Undoes the linear phase of the backed-off FFT window.
    ramp: Spectrum,
    ofdm: &'a Ofdm,
}

impl<'a> Ctx<'a> {
    fn new(streams: &'a [&'a [C64]], sync: &SyncResult, backoff: usize, ofdm: &'a Ofdm) -> Self {
        let backoff = backoff.min(sync.ltf_start);
        let ramp = std::array::from_fn(|b| {
            let k = if b < FFT_SIZE / 2 { b as f64 } else { b as f64 - FFT_SIZE as f64 };
            C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k * backoff as f64 / FFT_SIZE as f64)
        });
        Ctx { streams, eps: sync.overall_cfo(), ltf_start: sync.ltf_start, backoff, ramp, ofdm }
    }

    fn len(&self) -> usize {
        self.streams.iter().map(|s| s.len()).min().unwrap_or(0)
    }

    fn require(&self, end: usize) -> Result<(), RxError> {
        let len = self.len();
        if end > len {
            return Err(RxError::Truncated { needed: end, len });
        }
        Ok(())
    }

    fn packet_start(&self) -> usize {
        self.ltf_start.saturating_sub(192)
    }

    /// FFT window of L-LTF symbol `i`.
    fn ltf_body(&self, i: usize) -> usize {
        self.ltf_start - self.backoff + 64 * i
    }

    /// First sample of symbol `j` counted from L-SIG (j = 0).
    fn sym_start(&self, j: usize) -> usize {
        self.ltf_start + 128 + SYMBOL_SAMPLES * j
    }

    /// FFT window of symbol `j` counted from L-SIG.
    fn body(&self, j: usize) -> usize {
        self.sym_start(j) + 16 - self.backoff
    }

    /// CFO-compensated FFT of the 64 samples at `start` on antenna `rx`.
    fn fft(&self, rx: usize, start: usize, n_tones: usize) -> Result<Spectrum, RxError> {
        let s = self.streams[rx];
        if start + FFT_SIZE > s.len() {
            return Err(RxError::Truncated { needed: start + FFT_SIZE, len: s.len() });
        }
        let mut buf = [C64::new(0.0, 0.0); FFT_SIZE];
        for (i, x) in buf.iter_mut().enumerate() {
            let n = start + i;
            *x = s[n] * C64::from_polar(1.0, -self.eps * n as f64);
        }
        let mut y = self.ofdm.demodulate(&buf, n_tones);
        for (v, r) in y.iter_mut().zip(&self.ramp) {
            *v *= r;
        }
        Ok(y)
    }

    fn power(&self, start: usize, len: usize, n_rx: usize) -> f64 {
        let mut acc = 0.0;
        for s in &self.streams[..n_rx.min(self.streams.len())] {
            acc += s[start..start + len].iter().map(|x| x.norm_sqr()).sum::<f64>();
        }
        acc / len as f64
    }
}
