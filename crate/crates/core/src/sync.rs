//! Packet detection and synchronization.
//!
//! All functions accept one slice per receive antenna; correlations and
//! powers are summed over antennas before normalization. Sample indices are
//! absolute positions in the capture.

use crate::params::{LTF_PERIOD, STF_PERIOD};
use crate::C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyncError {
    #[error("index range {start}..{end} outside stream of {len} samples")]
    OutOfBounds { start: usize, end: usize, len: usize },
    #[error("no long-training plateau found")]
    NoPlateau,
}

/// Detector settings. Defaults are the values the receiver uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncConfig {
    /// Lag of the short-training autocorrelation.
    pub lag: usize,
    /// Number of products summed per autocorrelation output.
    pub window: usize,
    /// Running sums are rebuilt from scratch every `refresh` outputs.
    pub refresh: usize,
    pub threshold: f64,
    pub min_plateau: usize,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig { lag: STF_PERIOD, window: 48, refresh: 4096, threshold: 0.5, min_plateau: 32 }
    }
}

/// Total power below which a window counts as silent (rho = 0).
pub const POWER_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutocorrSample {
    pub rho: f64,
    pub inner: C64,
    pub power: f64,
}

fn normalized(inner: C64, p1: f64, p2: f64) -> f64 {
    let denom = (p1 * p2).sqrt();
    if denom < POWER_FLOOR {
        0.0
    } else {
        (inner.norm() / denom).clamp(0.0, 1.0)
    }
}

fn check_len(streams: &[&[C64]], start: usize, end: usize) -> Result<(), SyncError> {
    let len = streams.iter().map(|s| s.len()).min().unwrap_or(0);
    if end > len || start > end {
        return Err(SyncError::OutOfBounds { start, end, len });
    }
    Ok(())
}

/// Sliding autocorrelation: output n correlates samples `n..n+window` with
/// `n+lag..n+lag+window`. One output per start index where the full span
/// fits.
///
/// Sums are updated incrementally and rebuilt every `refresh` outputs.
pub fn autocorr_stream(streams: &[&[C64]], lag: usize, window: usize, refresh: usize) -> Vec<AutocorrSample> {
    let len = streams.iter().map(|s| s.len()).min().unwrap_or(0);
    if len < window + lag {
        return Vec::new();
    }
    let n_out = len - window - lag + 1;
    let mut out = Vec::with_capacity(n_out);
    let term = |i: usize| -> (C64, f64, f64) {
        let mut c = C64::new(0.0, 0.0);
        let mut p1 = 0.0;
        let mut p2 = 0.0;
        for s in streams {
            c += s[i].conj() * s[i + lag];
            p1 += s[i].norm_sqr();
            p2 += s[i + lag].norm_sqr();
        }
        (c, p1, p2)
    };
    let (mut c, mut p1, mut p2) = (C64::new(0.0, 0.0), 0.0, 0.0);
    let refresh = refresh.max(1);
    for n in 0..n_out {
        if n % refresh == 0 {
            c = C64::new(0.0, 0.0);
            p1 = 0.0;
            p2 = 0.0;
            for i in n..n + window {
                let (tc, t1, t2) = term(i);
                c += tc;
                p1 += t1;
                p2 += t2;
            }
        } else {
            let (ac, a1, a2) = term(n + window - 1);
            let (rc, r1, r2) = term(n - 1);
            c += ac - rc;
            p1 += a1 - r1;
            p2 += a2 - r2;
        }
        out.push(AutocorrSample { rho: normalized(c, p1, p2), inner: c, power: p1.max(0.0) });
    }
    out
}

/// Direct O(window) evaluation of one autocorrelation output.
pub fn autocorr_at(streams: &[&[C64]], n: usize, lag: usize, window: usize) -> AutocorrSample {
    let mut c = C64::new(0.0, 0.0);
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    for s in streams {
        for i in n..n + window {
            c += s[i].conj() * s[i + lag];
            p1 += s[i].norm_sqr();
            p2 += s[i + lag].norm_sqr();
        }
    }
    AutocorrSample { rho: normalized(c, p1, p2), inner: c, power: p1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TriggerState {
    Armed,
    Counting {
        start: usize,
        count: usize,
    },
    /// A packet is being processed; nothing fires until `release`.
    Held,
    /// Released but the previous plateau has not dropped yet.
    WaitLow,
}

/// Plateau trigger over a precomputed autocorrelation sequence.
#[derive(Debug, Clone)]
pub struct Trigger {
    threshold: f64,
    min_plateau: usize,
    state: TriggerState,
    pos: usize,
}

impl Trigger {
    pub fn new(threshold: f64, min_plateau: usize) -> Self {
        Trigger { threshold, min_plateau: min_plateau.max(1), state: TriggerState::Armed, pos: 0 }
    }

    /// Scan forward for the next plateau of at least `min_plateau` values at
    /// or above the threshold. Returns the first index of the run and holds
    /// the trigger.
    pub fn next(&mut self, rho: &[f64]) -> Option<usize> {
        if self.state == TriggerState::Held {
            return None;
        }
        while self.pos < rho.len() {
            let n = self.pos;
            self.pos += 1;
            let high = rho[n] >= self.threshold;
            self.state = match (self.state, high) {
                (TriggerState::WaitLow, true) => TriggerState::WaitLow,
                (TriggerState::WaitLow, false)
                | (TriggerState::Armed, false)
                | (TriggerState::Counting { .. }, false) => TriggerState::Armed,
                (TriggerState::Armed, true) => TriggerState::Counting { start: n, count: 1 },
                (TriggerState::Counting { start, count }, true) => TriggerState::Counting { start, count: count + 1 },
                (TriggerState::Held, _) => unreachable!(),
            };
            if let TriggerState::Counting { start, count } = self.state {
                if count >= self.min_plateau {
                    self.state = TriggerState::Held;
                    return Some(start);
                }
            }
        }
        None
    }

    /// Resume scanning at `resume_at`. With `wait_low` the trigger first
    /// waits for the autocorrelation to fall below the threshold.
    pub fn release(&mut self, resume_at: usize, wait_low: bool) {
        self.pos = resume_at;
        self.state = if wait_low { TriggerState::WaitLow } else { TriggerState::Armed };
    }
}

/// First index of a run of at least `min_plateau` values >= `threshold`.
pub fn detect_trigger(rho: &[f64], threshold: f64, min_plateau: usize) -> Option<usize> {
    Trigger::new(threshold, min_plateau).next(rho)
}

fn lagged_inner(streams: &[&[C64]], start: usize, len: usize, lag: usize) -> Result<C64, SyncError> {
    check_len(streams, start, start + len + lag)?;
    let mut c = C64::new(0.0, 0.0);
    for s in streams {
        for i in start..start + len {
            c += s[i].conj() * s[i + lag];
        }
    }
    Ok(c)
}

/// Coarse CFO in rad/sample from `len` short-training products at lag 16.
pub fn coarse_cfo(streams: &[&[C64]], start: usize, len: usize) -> Result<f64, SyncError> {
    Ok(lagged_inner(streams, start, len, STF_PERIOD)?.arg() / STF_PERIOD as f64)
}

/// Fine CFO in rad/sample from one long-training period at lag 64.
pub fn fine_cfo(streams: &[&[C64]], start: usize) -> Result<f64, SyncError> {
    Ok(lagged_inner(streams, start, LTF_PERIOD, LTF_PERIOD)?.arg() / LTF_PERIOD as f64)
}

/// y[n] = exp(-j n eps) r[n] for the absolute index n = start_index + i.
pub fn compensate_cfo(samples: &[C64], eps: f64, start_index: usize) -> Vec<C64> {
    if eps == 0.0 {
        return samples.to_vec();
    }
    samples.iter().enumerate().map(|(i, x)| x * C64::from_polar(1.0, -eps * (start_index + i) as f64)).collect()
}

/// Result of [`fine_timing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineTiming {
    /// First sample of the first L-LTF symbol body.
    pub ltf_start: usize,
    pub peak: f64,
    pub left_shoulder: usize,
    pub right_shoulder: usize,
}

/// Fine timing from the lag-64 plateau of the long training field.
///
/// `streams` must already be coarse-CFO compensated. The magnitude of the
/// lag-64 inner product is evaluated over `eval` (start indices) and its
/// maximum is taken inside `search`. Each shoulder is the sample nearest to
/// 80% of the maximum found by walking outward from it (at most 96 samples).
/// The plateau centre is the middle of GI2, so the LTF body starts 16
/// samples later. `threshold` applies to the normalized correlation at the
/// maximum.
pub fn fine_timing(
    streams: &[&[C64]],
    eval: std::ops::Range<usize>,
    search: std::ops::Range<usize>,
    threshold: f64,
) -> Result<FineTiming, SyncError> {
    check_len(streams, eval.start, eval.end + 2 * LTF_PERIOD)?;
    let ac: Vec<AutocorrSample> = eval.clone().map(|n| autocorr_at(streams, n, LTF_PERIOD, LTF_PERIOD)).collect();
    let at = |n: usize| ac[n - eval.start].inner.norm();
    let lo = search.start.max(eval.start);
    let hi = search.end.min(eval.end);
    if hi <= lo {
        return Err(SyncError::NoPlateau);
    }
    let (peak_idx, peak) = (lo..hi).map(|n| (n, at(n))).fold((lo, f64::MIN), |b, x| if x.1 > b.1 { x } else { b });
    if ac[peak_idx - eval.start].rho < threshold {
        return Err(SyncError::NoPlateau);
    }
    let target = 0.8 * peak;
    let shoulder = |dir: isize| -> usize {
        let mut n = peak_idx;
        for _ in 0..96 {
            let next = n as isize + dir;
            if next < eval.start as isize || next >= eval.end as isize {
                break;
            }
            let next = next as usize;
            if at(next) < target {
                return if (at(next) - target).abs() < (at(n) - target).abs() { next } else { n };
            }
            n = next;
        }
        n
    };
    let left = shoulder(-1);
    let right = shoulder(1);
    let centre = (left + right) / 2;
    Ok(FineTiming { ltf_start: centre + 16, peak, left_shoulder: left, right_shoulder: right })
}

/// Everything the receiver learns from synchronization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    pub trigger: usize,
    pub ltf_start: usize,
    pub coarse_cfo: f64,
    pub fine_cfo: f64,
}

impl SyncResult {
    pub fn overall_cfo(&self) -> f64 {
        self.coarse_cfo + self.fine_cfo
    }
}

/// Coarse CFO, fine timing and fine CFO for a packet detected at `trigger`.
pub fn synchronize(streams: &[&[C64]], trigger: usize, config: &SyncConfig) -> Result<SyncResult, SyncError> {
    let cfo_start = trigger + config.min_plateau;
    let coarse = coarse_cfo(streams, cfo_start, config.window)?;
    let seg_start = trigger + 40;
    let seg_end = trigger + 360 + 2 * LTF_PERIOD;
    check_len(streams, seg_start, seg_end)?;
    let comp: Vec<Vec<C64>> =
        streams.iter().map(|s| compensate_cfo(&s[seg_start..seg_end], coarse, seg_start)).collect();
    // Re-index the compensated segment so the timing search sees absolute indices.
    let views: Vec<&[C64]> = comp.iter().map(|v| v.as_slice()).collect();
    let ft = fine_timing(&views, 0..320, 56..256, config.threshold)?;
    let ltf_start = ft.ltf_start + seg_start;
    let fine_start = ft.ltf_start.checked_sub(16).ok_or(SyncError::NoPlateau)?;
    let fine = fine_cfo(&views, fine_start)?;
    Ok(SyncResult { trigger, ltf_start, coarse_cfo: coarse, fine_cfo: fine })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use crate::tx::build_legacy_preamble;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn preamble_with_lead(lead: usize, n_tx: usize) -> Vec<Vec<C64>> {
        let (stf, ltf) = build_legacy_preamble(n_tx).unwrap();
        (0..n_tx)
            .map(|a| {
                let mut v = vec![C64::new(0.0, 0.0); lead];
                v.extend(&stf[a]);
                v.extend(&ltf[a]);
                v.extend(vec![C64::new(0.0, 0.0); 400]);
                v
            })
            .collect()
    }

    #[test]
    fn clean_stf_has_unit_rho() {
        let s = preamble_with_lead(0, 1);
        let out = autocorr_stream(&[&s[0]], 16, 16, 4096);
        for n in 0..128 {
            assert!((out[n].rho - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let z = vec![C64::new(0.0, 0.0); 200];
        assert!(autocorr_stream(&[&z], 16, 48, 4096).iter().all(|a| a.rho == 0.0));
    }

    #[test]
    fn sliding_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<C64> = (0..100_000).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let fast = autocorr_stream(&[&x], 16, 48, 4096);
        for n in (0..fast.len()).step_by(97) {
            let d = autocorr_at(&[&x], n, 16, 48);
            assert!((fast[n].rho - d.rho).abs() < 1e-6);
        }
    }

    #[test]
    fn noise_rarely_correlates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<C64> = (0..50_000).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let cfg = SyncConfig::default();
        let out = autocorr_stream(&[&x], cfg.lag, cfg.window, cfg.refresh);
        let high = out.iter().filter(|a| a.rho >= cfg.threshold).count();
        assert!((high as f64) < 1e-3 * out.len() as f64, "{high}");
        let rho: Vec<f64> = out.iter().map(|a| a.rho).collect();
        assert_eq!(detect_trigger(&rho, cfg.threshold, cfg.min_plateau), None);
    }

    #[test]
    fn trigger_run_logic() {
        let mut rho = vec![0.0; 10];
        rho.extend(vec![0.9; 5]);
        rho.extend(vec![0.1; 3]);
        rho.extend(vec![0.95; 40]);
        assert_eq!(detect_trigger(&rho, 0.8, 32), Some(18));
        assert_eq!(detect_trigger(&rho, 0.8, 41), None);
        let mut t = Trigger::new(0.8, 4);
        assert_eq!(t.next(&rho), Some(10));
        assert_eq!(t.next(&rho), None);
        t.release(12, true);
        assert_eq!(t.next(&rho), Some(18));
    }

    #[test]
    fn csd_does_not_move_trigger() {
        let cfg = SyncConfig::default();
        let a = preamble_with_lead(100, 1);
        let b = preamble_with_lead(100, 2);
        let ra: Vec<f64> = autocorr_stream(&[&a[0]], 16, cfg.window, 4096).iter().map(|x| x.rho).collect();
        let sum: Vec<C64> = b[0].iter().zip(&b[1]).map(|(x, y)| x + y).collect();
        let rb: Vec<f64> = autocorr_stream(&[&sum], 16, cfg.window, 4096).iter().map(|x| x.rho).collect();
        let ta = detect_trigger(&ra, cfg.threshold, cfg.min_plateau).unwrap();
        let tb = detect_trigger(&rb, cfg.threshold, cfg.min_plateau).unwrap();
        assert!(ta.abs_diff(tb) <= 2, "{ta} vs {tb}");
    }

    #[test]
    fn flat_input_has_no_plateau() {
        let z = vec![C64::new(0.0, 0.0); 1000];
        assert_eq!(fine_timing(&[&z], 0..300, 50..250, 0.5), Err(SyncError::NoPlateau));
    }

    #[test]
    fn compensation_composes() {
        let x: Vec<C64> = (0..50).map(|n| C64::new(1.0, n as f64)).collect();
        let a = compensate_cfo(&compensate_cfo(&x, 0.01, 7), 0.02, 7);
        let b = compensate_cfo(&x, 0.03, 7);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).norm() < 1e-9);
        }
        assert_eq!(compensate_cfo(&x, 0.0, 0), x);
    }

    #[test]
    fn out_of_bounds() {
        let z = vec![C64::new(0.0, 0.0); 50];
        assert!(matches!(coarse_cfo(&[&z], 10, 48), Err(SyncError::OutOfBounds { .. })));
        assert!(matches!(fine_cfo(&[&z], 0), Err(SyncError::OutOfBounds { .. })));
    }
}
