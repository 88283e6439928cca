//! Correlation traces, plateau and peak helpers, and constellation dumps for
//! inspecting the detector and receiver offline.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::params::{LTF_PERIOD, STF_PERIOD};
use crate::rx::{Receiver, RxConfig};
use crate::tx::{build_legacy_preamble, FieldKind, TxFrame};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    /// Against the known 16-sample short symbol.
    CcStf,
    /// Lag 16 over 16 samples.
    AcStf,
    /// Against the known 64-sample long symbol.
    CcLtf,
    /// Lag 64 over 64 samples.
    AcLtf,
}

impl TraceMode {
    pub fn name(self) -> &'static str {
        match self {
            TraceMode::CcStf => "cc_stf",
            TraceMode::AcStf => "ac_stf",
            TraceMode::CcLtf => "cc_ltf",
            TraceMode::AcLtf => "ac_ltf",
        }
    }
}

impl fmt::Display for TraceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TraceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cc_stf" => Ok(TraceMode::CcStf),
            "ac_stf" => Ok(TraceMode::AcStf),
            "cc_ltf" => Ok(TraceMode::CcLtf),
            "ac_ltf" => Ok(TraceMode::AcLtf),
            other => Err(format!("unknown trace mode {other:?}")),
        }
    }
}

/// Normalized correlation magnitude per start index, each value in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSeries {
    pub mode: TraceMode,
    pub points: Vec<(usize, f64)>,
}

impl TraceSeries {
    pub fn value(&self, n: usize) -> Option<f64> {
        self.points.get(n).map(|p| p.1)
    }

    pub fn max(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    /// Local maxima of at least `min_height` with start index in `range`.
    pub fn peaks(&self, range: std::ops::Range<usize>, min_height: f64) -> Vec<usize> {
        let v: Vec<f64> = self.points.iter().map(|p| p.1).collect();
        (range.start.max(1)..range.end.min(v.len().saturating_sub(1)))
            .filter(|&n| v[n] >= min_height && v[n] > v[n - 1] && v[n] >= v[n + 1])
            .collect()
    }

    /// Midpoint of the run of values within `tol` of the maximum inside
    /// `range`, starting at the first index that reaches it.
    pub fn plateau_centre(&self, range: std::ops::Range<usize>, tol: f64) -> Option<usize> {
        let end = range.end.min(self.points.len());
        let window = self.points.get(range.start..end)?;
        let m = window.iter().map(|p| p.1).fold(f64::MIN, f64::max);
        let top = window.iter().position(|p| p.1 >= m - tol)?;
        let len = window[top..].iter().position(|p| p.1 < m - tol).unwrap_or(window.len() - top);
        Some(range.start + top + (len - 1) / 2)
    }
}

/// Transmit antennas summed onto one receive antenna, no noise.
pub fn on_air(frame: &TxFrame) -> Vec<C64> {
    let mut r = vec![C64::new(0.0, 0.0); frame.len()];
    for s in &frame.streams {
        for (a, b) in r.iter_mut().zip(s) {
            *a += b;
        }
    }
    r
}

fn normalized(a: &[C64], b: &[C64]) -> f64 {
    let inner: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let pa: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let pb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    if pa <= 0.0 || pb <= 0.0 {
        0.0
    } else {
        (inner.norm() / (pa * pb).sqrt()).min(1.0)
    }
}

/// Correlation trace of a single-antenna sample stream.
pub fn correlation_trace_samples(r: &[C64], mode: TraceMode) -> TraceSeries {
    let (stf, ltf) = build_legacy_preamble(1).expect("single-antenna preamble");
    let (len, lag, template): (usize, usize, Option<&[C64]>) = match mode {
        TraceMode::CcStf => (STF_PERIOD, 0, Some(&stf[0][..STF_PERIOD])),
        TraceMode::AcStf => (STF_PERIOD, STF_PERIOD, None),
        TraceMode::CcLtf => (LTF_PERIOD, 0, Some(&ltf[0][32..32 + LTF_PERIOD])),
        TraceMode::AcLtf => (LTF_PERIOD, LTF_PERIOD, None),
    };
    let n_out = r.len().saturating_sub(len + lag - 1);
    let points = (0..n_out)
        .map(|n| {
            let v = match template {
                Some(t) => normalized(&r[n..n + len], t),
                None => normalized(&r[n..n + len], &r[n + lag..n + lag + len]),
            };
            (n, v)
        })
        .collect();
    TraceSeries { mode, points }
}

/// Correlation trace of a clean frame as heard by one receive antenna.
pub fn correlation_trace(frame: &TxFrame, mode: TraceMode) -> TraceSeries {
    correlation_trace_samples(&on_air(frame), mode)
}

pub fn write_trace_csv<W: Write>(series: &TraceSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "mode,index,value")?;
    for (n, v) in &series.points {
        writeln!(out, "{},{n},{v}", series.mode)?;
    }
    Ok(())
}

/// Equalized points per field of every packet found in `streams`. SIG
/// points keep their BPSK or QBPSK axis.
pub fn constellation_dump(streams: &[&[C64]], config: &RxConfig) -> Vec<Vec<(FieldKind, Vec<C64>)>> {
    let rx = Receiver::new(RxConfig { keep_constellation: true, ..*config });
    rx.receive(streams).into_iter().map(|p| p.diagnostics.constellation).collect()
}

pub fn write_constellation_csv<W: Write>(fields: &[(FieldKind, Vec<C64>)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "field,index,re,im")?;
    for (f, pts) in fields {
        let name = serde_json::to_value(f).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        for (i, p) in pts.iter().enumerate() {
            writeln!(out, "{name},{i},{},{}", p.re, p.im)?;
        }
    }
    Ok(())
}
