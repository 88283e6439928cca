//! Packet assembly for every supported format.

mod fields;

pub use fields::{
    build_legacy_preamble, build_lsig, build_mimo_ltf, build_sig_pair, data_symbol_spectrum, legacy_sig_spectrum,
    sigb_spectrum, SigModulation,
};

use crate::codec::{
    append_fcs, bcc_encode, bytes_to_bits, map_symbols, scramble, stream_parse, CodecError, Interleaver,
    InterleaverKind, DEFAULT_SEED,
};
use crate::ofdm::{BadShift, Ofdm, Spectrum};
use crate::params::{
    self, bin, ht_csd_ns, legacy_csd_ns, mcs_params, spoofed_lsig_length, symbols_for_payload, McsParams, ParamError,
    PhyFormat, PilotPattern, HT_DATA_PILOT_OFFSET, HT_TONES, LEGACY_TONES, VHT_DATA_PILOT_OFFSET,
};
use crate::signal::{build_vht_psdu, HtSig, SigError, VhtSigA, VhtSigB};
use crate::C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TxError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Sig(#[from] SigError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Shift(#[from] BadShift),
    #[error("multi-user frames need a steering matrix")]
    MissingSteering,
}

/// One user of a two-user downlink MU frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MuUser {
    pub mcs: u8,
    pub payload: Vec<u8>,
}

/// What to transmit.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyConfig {
    pub format: PhyFormat,
    /// Legacy 0-7, HT 8-15, VHT single-user 0-8. Ignored for MU and NDP.
    pub mcs: u8,
    /// MAC payload; the FCS is appended by the framer.
    pub payload: Vec<u8>,
    pub n_tx: usize,
    /// Exactly two users for [`PhyFormat::VhtMu`], empty otherwise.
    pub mu_users: Vec<MuUser>,
    /// Group ID signalled in MU frames (1-62).
    pub group_id: u8,
    pub scrambler_seed: u8,
}

impl PhyConfig {
    fn base(format: PhyFormat, mcs: u8, payload: Vec<u8>, n_tx: usize) -> Self {
        PhyConfig { format, mcs, payload, n_tx, mu_users: Vec::new(), group_id: 1, scrambler_seed: DEFAULT_SEED }
    }

    pub fn legacy(mcs: u8, payload: Vec<u8>) -> Self {
        Self::base(PhyFormat::Legacy, mcs, payload, 1)
    }

    pub fn ht(mcs: u8, payload: Vec<u8>) -> Self {
        Self::base(PhyFormat::Ht, mcs, payload, 2)
    }

    pub fn vht_su(mcs: u8, payload: Vec<u8>) -> Self {
        Self::base(PhyFormat::VhtSu, mcs, payload, 1)
    }

    pub fn vht_mu(users: [MuUser; 2]) -> Self {
        let mut c = Self::base(PhyFormat::VhtMu, 0, Vec::new(), 2);
        c.mu_users = users.to_vec();
        c
    }

    pub fn vht_ndp() -> Self {
        Self::base(PhyFormat::VhtNdp, 0, Vec::new(), 2)
    }

    pub fn with_n_tx(mut self, n_tx: usize) -> Self {
        self.n_tx = n_tx;
        self
    }

    /// Spatial streams carried by the HT/VHT portion.
    pub fn n_ss(&self) -> usize {
        match self.format {
            PhyFormat::Legacy | PhyFormat::VhtSu => 1,
            PhyFormat::Ht | PhyFormat::VhtMu | PhyFormat::VhtNdp => 2,
        }
    }

    pub fn validate(&self) -> Result<(), TxError> {
        let bad = |m: &str| Err(TxError::Config(m.to_string()));
        if !(1..=2).contains(&self.n_tx) {
            return bad("n_tx must be 1 or 2");
        }
        if self.n_ss() > self.n_tx {
            return bad("more spatial streams than transmit antennas");
        }
        if self.scrambler_seed & 0x7f == 0 {
            return Err(CodecError::ZeroSeed.into());
        }
        match self.format {
            PhyFormat::Legacy | PhyFormat::Ht | PhyFormat::VhtSu => {
                mcs_params(self.format, self.mcs)?;
                if !self.mu_users.is_empty() {
                    return bad("mu_users is only valid for VHT MU frames");
                }
            }
            PhyFormat::VhtMu => {
                if self.mu_users.len() != 2 {
                    return bad("VHT MU frames carry exactly two users");
                }
                for u in &self.mu_users {
                    mcs_params(PhyFormat::VhtMu, u.mcs)?;
                }
                if !(1..=62).contains(&self.group_id) {
                    return bad("MU group ID must be 1-62");
                }
            }
            PhyFormat::VhtNdp => {
                if !self.payload.is_empty() || !self.mu_users.is_empty() {
                    return bad("NDP frames carry no payload");
                }
            }
        }
        Ok(())
    }
}

/// Per-subcarrier 2x2 precoder, `q[bin][antenna][stream]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringMatrix {
    pub q: Vec<[[C64; 2]; 2]>,
}

impl SteeringMatrix {
    pub fn identity() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        SteeringMatrix { q: vec![[[one, zero], [zero, one]]; params::FFT_SIZE] }
    }

    pub fn at(&self, k: i32) -> &[[C64; 2]; 2] {
        &self.q[bin(k)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    LStf,
    LLtf,
    LSig,
    HtSig,
    HtStf,
    HtLtf,
    VhtSigA,
    VhtStf,
    VhtLtf,
    VhtSigB,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldSpan {
    pub kind: FieldKind,
    pub start: usize,
    pub len: usize,
}

/// A complete baseband packet, one sample stream per transmit antenna.
#[derive(Debug, Clone)]
pub struct TxFrame {
    pub format: PhyFormat,
    pub streams: Vec<Vec<C64>>,
    pub fields: Vec<FieldSpan>,
    pub n_data_symbols: usize,
}

impl TxFrame {
    pub fn len(&self) -> usize {
        self.streams[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First span of the given kind.
    pub fn field(&self, kind: FieldKind) -> Option<FieldSpan> {
        self.fields.iter().copied().find(|f| f.kind == kind)
    }

    /// Sample index of the first L-LTF symbol body (after GI2).
    pub fn lltf_symbol_start(&self) -> usize {
        self.field(FieldKind::LLtf).map(|f| f.start + 32).unwrap_or(192)
    }

    /// Mean sample power summed over antennas.
    pub fn mean_power(&self) -> f64 {
        let n = self.len().max(1) as f64;
        self.streams.iter().map(|s| s.iter().map(|x| x.norm_sqr()).sum::<f64>()).sum::<f64>() / n
    }
}

/// How HT/VHT-portion streams reach the antennas.
#[derive(Clone, Copy)]
enum Mapping<'a> {
    /// Stream i on antenna i.
    Direct,
    /// One stream copied to every antenna.
    Expand,
    Precoded(&'a SteeringMatrix),
}

struct Builder<'a> {
    ofdm: Ofdm,
    n_tx: usize,
    mapping: Mapping<'a>,
    streams: Vec<Vec<C64>>,
    fields: Vec<FieldSpan>,
}

impl<'a> Builder<'a> {
    fn new(n_tx: usize, mapping: Mapping<'a>) -> Self {
        Builder { ofdm: Ofdm::new(), n_tx, mapping, streams: vec![Vec::new(); n_tx], fields: Vec::new() }
    }

    fn open(&mut self, kind: FieldKind) -> usize {
        let start = self.streams[0].len();
        self.fields.push(FieldSpan { kind, start, len: 0 });
        start
    }

    fn close(&mut self) {
        let n = self.streams[0].len();
        let f = self.fields.last_mut().unwrap();
        f.len = n - f.start;
    }

    fn append(&mut self, per_antenna: Vec<Vec<C64>>) {
        for (s, a) in self.streams.iter_mut().zip(per_antenna) {
            s.extend(a);
        }
    }

    fn legacy_symbol(&mut self, kind: FieldKind, spectrum: &Spectrum) -> Result<(), TxError> {
        self.open(kind);
        let scale = 1.0 / (self.n_tx as f64).sqrt();
        let mut out = Vec::with_capacity(self.n_tx);
        for a in 0..self.n_tx {
            out.push(self.ofdm.modulate(spectrum, legacy_csd_ns(a), LEGACY_TONES, scale)?);
        }
        self.append(out);
        self.close();
        Ok(())
    }

    fn antenna_spectra(&self, stream_spectra: &[Spectrum]) -> Vec<Spectrum> {
        let zero = C64::new(0.0, 0.0);
        match self.mapping {
            Mapping::Direct => stream_spectra.to_vec(),
            Mapping::Expand => vec![stream_spectra[0]; self.n_tx],
            Mapping::Precoded(q) => (0..self.n_tx)
                .map(|a| {
                    let mut s = [zero; params::FFT_SIZE];
                    for (b, x) in s.iter_mut().enumerate() {
                        *x = stream_spectra.iter().enumerate().map(|(u, st)| q.q[b][a][u] * st[b]).sum();
                    }
                    s
                })
                .collect(),
        }
    }

    /// One HT/VHT-portion symbol from per-stream spectra.
    fn mapped_symbol(&mut self, stream_spectra: &[Spectrum], n_tones: usize) -> Result<(), TxError> {
        let scale = 1.0 / (self.n_tx as f64).sqrt();
        let ant = self.antenna_spectra(stream_spectra);
        let mut out = Vec::with_capacity(self.n_tx);
        for (a, spec) in ant.iter().enumerate() {
            out.push(self.ofdm.modulate(spec, ht_csd_ns(a), n_tones, scale)?);
        }
        self.append(out);
        Ok(())
    }

    fn preamble(&mut self) -> Result<(), TxError> {
        let (stf, ltf) = build_legacy_preamble(self.n_tx)?;
        self.open(FieldKind::LStf);
        self.append(stf);
        self.close();
        self.open(FieldKind::LLtf);
        self.append(ltf);
        self.close();
        Ok(())
    }

    fn finish(self, format: PhyFormat, n_data_symbols: usize) -> TxFrame {
        TxFrame { format, streams: self.streams, fields: self.fields, n_data_symbols }
    }
}

/// Service field, PSDU, tail and pad bits, scrambled, with the tail zeroed
/// after scrambling. VHT places the tail at the very end.
pub fn data_field_bits(
    psdu: &[u8],
    n_dbps: usize,
    n_sym: usize,
    tail_at_end: bool,
    seed: u8,
) -> Result<Vec<u8>, CodecError> {
    let total = n_sym * n_dbps;
    let mut bits = vec![0u8; params::SERVICE_BITS];
    bits.extend(bytes_to_bits(psdu));
    let tail_pos = if tail_at_end { total - params::TAIL_BITS } else { bits.len() };
    bits.resize(total, 0);
    let mut bits = scramble(&bits, seed)?;
    bits[tail_pos..tail_pos + params::TAIL_BITS].fill(0);
    Ok(bits)
}

/// Encode data bits into per-stream, per-symbol data-subcarrier points.
pub fn encode_data_points(bits: &[u8], p: &McsParams) -> Result<Vec<Vec<Vec<C64>>>, TxError> {
    let coded = bcc_encode(bits, p.code_rate);
    let legacy = p.format == PhyFormat::Legacy;
    let interleavers: Vec<Interleaver> = (0..p.n_ss)
        .map(|s| {
            let kind = if legacy { InterleaverKind::Legacy } else { InterleaverKind::Ht { stream: s } };
            Interleaver::new(kind, p.n_cbpss, p.n_bpscs)
        })
        .collect::<Result<_, _>>()?;
    let mut out = vec![Vec::new(); p.n_ss];
    for sym in coded.chunks_exact(p.n_cbps) {
        let parsed = if p.n_ss == 1 { vec![sym.to_vec()] } else { stream_parse(sym, p.n_ss, p.n_bpscs) };
        for (s, bits) in parsed.iter().enumerate() {
            let il = interleavers[s].interleave(bits)?;
            out[s].push(map_symbols(&il, p.modulation)?);
        }
    }
    Ok(out)
}

/// Assemble a packet. `steering` is required for VHT MU frames and may be
/// given for HT frames; other formats reject it.
pub fn assemble_packet(config: &PhyConfig, steering: Option<&SteeringMatrix>) -> Result<TxFrame, TxError> {
    config.validate()?;
    match config.format {
        PhyFormat::Legacy => {
            reject_steering(steering)?;
            assemble_legacy(config)
        }
        PhyFormat::Ht => assemble_ht(config, steering),
        PhyFormat::VhtSu => {
            reject_steering(steering)?;
            assemble_vht(config, None)
        }
        PhyFormat::VhtMu => assemble_vht(config, Some(steering.ok_or(TxError::MissingSteering)?)),
        PhyFormat::VhtNdp => {
            reject_steering(steering)?;
            assemble_vht(config, None)
        }
    }
}

fn reject_steering(steering: Option<&SteeringMatrix>) -> Result<(), TxError> {
    match steering {
        Some(_) => Err(TxError::Config("steering is only applied to HT and VHT MU frames".into())),
        None => Ok(()),
    }
}

fn assemble_legacy(config: &PhyConfig) -> Result<TxFrame, TxError> {
    let p = mcs_params(PhyFormat::Legacy, config.mcs)?;
    let psdu = append_fcs(&config.payload);
    let n_sym = symbols_for_payload(&p, psdu.len());
    let length = u16::try_from(psdu.len()).ok().filter(|l| *l <= 4095).ok_or(SigError::FieldOverflow {
        field: "L-SIG length",
        value: psdu.len() as u64,
        max: 4095,
    })?;
    let mut b = Builder::new(config.n_tx, Mapping::Expand);
    b.preamble()?;
    b.legacy_symbol(FieldKind::LSig, &build_lsig(config.mcs, length)?)?;
    let bits = data_field_bits(&psdu, p.n_dbps, n_sym, false, config.scrambler_seed)?;
    let points = encode_data_points(&bits, &p)?;
    b.open(FieldKind::Data);
    for (n, pts) in points[0].iter().enumerate() {
        let spec = data_symbol_spectrum(pts, PilotPattern::Legacy, n + 1, 0);
        let scale = 1.0 / (config.n_tx as f64).sqrt();
        let mut out = Vec::new();
        for a in 0..config.n_tx {
            out.push(b.ofdm.modulate(&spec, legacy_csd_ns(a), LEGACY_TONES, scale)?);
        }
        b.append(out);
    }
    b.close();
    Ok(b.finish(PhyFormat::Legacy, n_sym))
}

fn assemble_ht(config: &PhyConfig, steering: Option<&SteeringMatrix>) -> Result<TxFrame, TxError> {
    let p = mcs_params(PhyFormat::Ht, config.mcs)?;
    let psdu = append_fcs(&config.payload);
    let length = u16::try_from(psdu.len()).map_err(|_| SigError::FieldOverflow {
        field: "HT-SIG length",
        value: psdu.len() as u64,
        max: 65535,
    })?;
    let n_sym = symbols_for_payload(&p, psdu.len());
    let mapping = steering.map(Mapping::Precoded).unwrap_or(Mapping::Direct);
    let mut b = Builder::new(config.n_tx, mapping);
    b.preamble()?;
    let after_lsig = 2 + 1 + 2 + n_sym;
    b.legacy_symbol(FieldKind::LSig, &build_lsig(0, lsig_length(after_lsig)?)?)?;
    let sig =
        build_sig_pair(&HtSig { mcs: config.mcs, length }.to_bits()?, [SigModulation::Qbpsk, SigModulation::Qbpsk])?;
    for s in &sig {
        b.legacy_symbol(FieldKind::HtSig, s)?;
    }
    merge_last(&mut b.fields, FieldKind::HtSig);

    b.open(FieldKind::HtStf);
    let stf: Spectrum = std::array::from_fn(|i| params::stf_value(signed(i)));
    b.mapped_symbol(&[stf, stf], LEGACY_TONES)?;
    b.close();
    b.open(FieldKind::HtLtf);
    for spectra in build_mimo_ltf(2) {
        b.mapped_symbol(&spectra, HT_TONES)?;
    }
    b.close();

    let bits = data_field_bits(&psdu, p.n_dbps, n_sym, false, config.scrambler_seed)?;
    let points = encode_data_points(&bits, &p)?;
    b.open(FieldKind::Data);
    for n in 0..n_sym {
        let spectra: Vec<Spectrum> = (0..2)
            .map(|s| {
                data_symbol_spectrum(&points[s][n], PilotPattern::Ht2ss { stream: s }, n + HT_DATA_PILOT_OFFSET, n)
            })
            .collect();
        b.mapped_symbol(&spectra, HT_TONES)?;
    }
    b.close();
    Ok(b.finish(PhyFormat::Ht, n_sym))
}

/// One user's data field for a VHT frame.
struct VhtUser {
    params: McsParams,
    psdu: Vec<u8>,
}

fn vht_users(config: &PhyConfig) -> Result<Vec<VhtUser>, TxError> {
    let make = |mcs: u8, payload: &[u8]| -> Result<VhtUser, TxError> {
        Ok(VhtUser { params: mcs_params(config.format, mcs)?, psdu: build_vht_psdu(&append_fcs(payload))? })
    };
    match config.format {
        PhyFormat::VhtSu => Ok(vec![make(config.mcs, &config.payload)?]),
        PhyFormat::VhtMu => config.mu_users.iter().map(|u| make(u.mcs, &u.payload)).collect(),
        _ => Ok(Vec::new()),
    }
}

fn assemble_vht(config: &PhyConfig, steering: Option<&SteeringMatrix>) -> Result<TxFrame, TxError> {
    let users = vht_users(config)?;
    let multi_user = config.format == PhyFormat::VhtMu;
    let n_sts = config.n_ss();
    let n_sym = users.iter().map(|u| symbols_for_payload(&u.params, u.psdu.len())).max().unwrap_or(0);
    let mapping = match (steering, n_sts) {
        (Some(q), _) => Mapping::Precoded(q),
        (None, 1) => Mapping::Expand,
        (None, _) => Mapping::Direct,
    };
    let mut b = Builder::new(config.n_tx, mapping);
    b.preamble()?;
    let after_lsig = 2 + 1 + n_sts + 1 + n_sym;
    b.legacy_symbol(FieldKind::LSig, &build_lsig(0, lsig_length(after_lsig)?)?)?;

    let siga = if multi_user {
        VhtSigA::multi_user(config.group_id, [1, 1, 0, 0])
    } else {
        VhtSigA::single_user(if config.format == PhyFormat::VhtSu { config.mcs } else { 0 }, n_sts as u8)
    };
    let sig = build_sig_pair(&siga.to_bits()?, [SigModulation::Bpsk, SigModulation::Qbpsk])?;
    for s in &sig {
        b.legacy_symbol(FieldKind::VhtSigA, s)?;
    }
    merge_last(&mut b.fields, FieldKind::VhtSigA);

    b.open(FieldKind::VhtStf);
    let stf: Spectrum = std::array::from_fn(|i| params::stf_value(signed(i)));
    b.mapped_symbol(&vec![stf; n_sts], LEGACY_TONES)?;
    b.close();
    b.open(FieldKind::VhtLtf);
    for spectra in build_mimo_ltf(n_sts) {
        b.mapped_symbol(&spectra, HT_TONES)?;
    }
    b.close();

    // SIG-B: one per stream, each multiplied by the first column of P (all +1).
    let sigb: Vec<Spectrum> = (0..n_sts)
        .map(|s| -> Result<Spectrum, TxError> {
            let field = match (multi_user, users.get(s)) {
                (true, Some(u)) => VhtSigB::Mu { length_words: (u.psdu.len() / 4) as u16, mcs: u.params.mcs_index },
                (false, Some(u)) => VhtSigB::Su { length_words: (u.psdu.len() / 4) as u32 },
                (_, None) => VhtSigB::Su { length_words: 0 },
            };
            sigb_spectrum(&field.to_bits()?)
        })
        .collect::<Result<_, _>>()?;
    b.open(FieldKind::VhtSigB);
    b.mapped_symbol(&sigb, HT_TONES)?;
    b.close();

    if n_sym > 0 {
        let mut per_user = Vec::with_capacity(users.len());
        for u in &users {
            let bits = data_field_bits(&u.psdu, u.params.n_dbps, n_sym, true, config.scrambler_seed)?;
            per_user.push(encode_data_points(&bits, &u.params)?.remove(0));
        }
        b.open(FieldKind::Data);
        for n in 0..n_sym {
            let spectra: Vec<Spectrum> = per_user
                .iter()
                .map(|pts| data_symbol_spectrum(&pts[n], PilotPattern::Vht, n + VHT_DATA_PILOT_OFFSET, n))
                .collect();
            b.mapped_symbol(&spectra, HT_TONES)?;
        }
        b.close();
    }
    Ok(b.finish(config.format, n_sym))
}

fn signed(b: usize) -> i32 {
    if b < params::FFT_SIZE / 2 {
        b as i32
    } else {
        b as i32 - params::FFT_SIZE as i32
    }
}

fn lsig_length(symbols_after_lsig: usize) -> Result<u16, SigError> {
    let l = spoofed_lsig_length(symbols_after_lsig);
    if l > 4095 {
        return Err(SigError::FieldOverflow { field: "L-SIG length", value: l as u64, max: 4095 });
    }
    Ok(l as u16)
}

/// Collapse consecutive spans of `kind` at the end of `fields` into one.
fn merge_last(fields: &mut Vec<FieldSpan>, kind: FieldKind) {
    while fields.len() >= 2 {
        let n = fields.len();
        if fields[n - 1].kind == kind && fields[n - 2].kind == kind {
            let last = fields.pop().unwrap();
            fields[n - 2].len += last.len;
        } else {
            break;
        }
    }
}
