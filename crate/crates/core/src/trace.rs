//! VBR video traces: the frame-level workload each station replays.
//!
//! The on-disk format is one frame per line, `<time_ms> <type> <size_bits>`,
//! with `#` starting a comment line. Times are milliseconds since the start of
//! the stream and must be strictly increasing.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// H.263 reference frame period (25 frames/s).
pub const DEFAULT_FRAME_PERIOD_MS: u64 = 40;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("empty trace")]
    Empty,
    #[error("line {line}: arrival time {time_ms} ms is not after the previous frame at {prev_ms} ms")]
    NonMonotone { line: usize, time_ms: u64, prev_ms: u64 },
    #[error("frame {index} has zero size")]
    ZeroSize { index: usize },
    #[error("trace spans zero time; rate statistics need at least two frames")]
    ZeroDuration,
    #[error("invalid synthesis parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameType {
    I,
    P,
    PB,
    B,
    Other,
}

impl FrameType {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameType::I => "I",
            FrameType::P => "P",
            FrameType::PB => "PB",
            FrameType::B => "B",
            FrameType::Other => "OTHER",
        }
    }

    /// Maps a trace token to a frame type. Unrecognized labels become `Other`.
    pub fn from_token(token: &str) -> (FrameType, bool) {
        match token {
            "I" => (FrameType::I, true),
            "P" => (FrameType::P, true),
            "PB" => (FrameType::PB, true),
            "B" => (FrameType::B, true),
            "OTHER" => (FrameType::Other, true),
            _ => (FrameType::Other, false),
        }
    }
}

impl fmt::Display for FrameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One encoded video frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRecord {
    pub arrival_ms: u64,
    pub frame_type: FrameType,
    pub size_bits: u32,
}

/// An ordered, non-empty sequence of frames with strictly increasing arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTrace {
    records: Vec<FrameRecord>,
    source_label: String,
}

impl VideoTrace {
    pub fn new(records: Vec<FrameRecord>, source_label: impl Into<String>) -> Result<Self, TraceError> {
        if records.is_empty() {
            return Err(TraceError::Empty);
        }
        for (i, r) in records.iter().enumerate() {
            if r.size_bits == 0 {
                return Err(TraceError::ZeroSize { index: i });
            }
            if i > 0 && r.arrival_ms <= records[i - 1].arrival_ms {
                return Err(TraceError::NonMonotone {
                    line: i + 1,
                    time_ms: r.arrival_ms,
                    prev_ms: records[i - 1].arrival_ms,
                });
            }
        }
        Ok(VideoTrace { records, source_label: source_label.into() })
    }

    pub fn records(&self) -> &[FrameRecord] {
        &self.records
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_size_bits(&self) -> u32 {
        self.records.iter().map(|r| r.size_bits).max().unwrap_or(0)
    }

    /// Canonical text form; `parse_trace` reads it back unchanged.
    pub fn serialize(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 16);
        for r in &self.records {
            let _ = writeln!(out, "{} {} {}", r.arrival_ms, r.frame_type, r.size_bits);
        }
        out
    }
}

/// Result of parsing a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub trace: VideoTrace,
    /// Rows whose type token was not one of I/P/PB/B/OTHER.
    pub unknown_type_rows: usize,
}

pub fn parse_trace(input: &str, source_label: &str) -> Result<ParsedTrace, TraceError> {
    let mut records = Vec::new();
    let mut unknown = 0;
    let mut prev: Option<u64> = None;
    for (idx, raw) in input.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = text.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(TraceError::Parse { line, reason: format!("expected 3 columns, found {}", cols.len()) });
        }
        let arrival_ms: u64 =
            cols[0].parse().map_err(|_| TraceError::Parse { line, reason: format!("invalid time `{}`", cols[0]) })?;
        let (frame_type, known) = FrameType::from_token(cols[1]);
        if !known {
            unknown += 1;
        }
        let size_bits: u32 =
            cols[2].parse().map_err(|_| TraceError::Parse { line, reason: format!("invalid size `{}`", cols[2]) })?;
        if size_bits == 0 {
            return Err(TraceError::Parse { line, reason: "frame size must be positive".into() });
        }
        if let Some(p) = prev {
            if arrival_ms <= p {
                return Err(TraceError::NonMonotone { line, time_ms: arrival_ms, prev_ms: p });
            }
        }
        prev = Some(arrival_ms);
        records.push(FrameRecord { arrival_ms, frame_type, size_bits });
    }
    let trace = VideoTrace::new(records, source_label)?;
    Ok(ParsedTrace { trace, unknown_type_rows: unknown })
}

/// Summary statistics in the units of a trace-library stats table.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStats {
    pub frames: usize,
    pub mean_size_bytes: f64,
    pub max_size_bytes: f64,
    pub mean_bit_rate: f64,
    pub peak_bit_rate: f64,
    /// Coefficient of variation of per-second bit totals. Reporting only.
    pub cov_bit_rate: f64,
    pub mean_interarrival_ms: f64,
}

/// Rate statistics over a trace.
///
/// The trace is taken to last from 0 to the last arrival plus one mean
/// inter-arrival gap. Peak rate is the largest number of bits arriving within
/// any single reference period, divided by that period.
pub fn compute_stats(trace: &VideoTrace, reference_frame_period_ms: u64) -> Result<TraceStats, TraceError> {
    if reference_frame_period_ms == 0 {
        return Err(TraceError::InvalidParameter("reference frame period must be positive".into()));
    }
    let recs = trace.records();
    if recs.len() < 2 {
        return Err(TraceError::ZeroDuration);
    }
    let first = recs[0].arrival_ms;
    let last = recs[recs.len() - 1].arrival_ms;
    let mean_gap = (last - first) as f64 / (recs.len() - 1) as f64;
    let duration_ms = last as f64 + mean_gap;
    if duration_ms <= 0.0 {
        return Err(TraceError::ZeroDuration);
    }

    let total_bits: u64 = recs.iter().map(|r| r.size_bits as u64).sum();
    let max_bits = trace.max_size_bits();

    let mut peak_bits = 0u64;
    let mut bucket = u64::MAX;
    let mut acc = 0u64;
    for r in recs {
        let b = r.arrival_ms / reference_frame_period_ms;
        if b != bucket {
            bucket = b;
            acc = 0;
        }
        acc += r.size_bits as u64;
        peak_bits = peak_bits.max(acc);
    }

    let seconds = (duration_ms / 1000.0).ceil().max(1.0) as usize;
    let mut per_second = vec![0u64; seconds];
    for r in recs {
        let s = ((r.arrival_ms / 1000) as usize).min(seconds - 1);
        per_second[s] += r.size_bits as u64;
    }
    let n = per_second.len() as f64;
    let mean = per_second.iter().map(|&b| b as f64).sum::<f64>() / n;
    let var = per_second.iter().map(|&b| (b as f64 - mean).powi(2)).sum::<f64>() / n;
    let cov = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };

    Ok(TraceStats {
        frames: recs.len(),
        mean_size_bytes: total_bits as f64 / recs.len() as f64 / 8.0,
        max_size_bytes: max_bits as f64 / 8.0,
        mean_bit_rate: total_bits as f64 / (duration_ms / 1000.0),
        peak_bit_rate: peak_bits as f64 / (reference_frame_period_ms as f64 / 1000.0),
        cov_bit_rate: cov,
        mean_interarrival_ms: mean_gap,
    })
}

/// Random variation applied around a mean.
///
/// Text form: `none`, `uniform:<half-width fraction>`, `exp`, `lognormal:<cov>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Jitter {
    None,
    Uniform { spread: f64 },
    Exponential,
    LogNormal { cov: f64 },
}

impl Jitter {
    fn validate(&self) -> Result<(), TraceError> {
        match *self {
            Jitter::Uniform { spread } if !(0.0..=1.0).contains(&spread) => {
                Err(TraceError::InvalidParameter(format!("uniform spread {spread} outside [0, 1]")))
            }
            Jitter::LogNormal { cov } if !(cov > 0.0 && cov.is_finite()) => {
                Err(TraceError::InvalidParameter(format!("lognormal cov {cov} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Jitter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Jitter::None => f.write_str("none"),
            Jitter::Uniform { spread } => write!(f, "uniform:{spread}"),
            Jitter::Exponential => f.write_str("exp"),
            Jitter::LogNormal { cov } => write!(f, "lognormal:{cov}"),
        }
    }
}

impl FromStr for Jitter {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |a: Option<&str>| -> Result<f64, TraceError> {
            a.ok_or_else(|| TraceError::InvalidParameter(format!("`{name}` needs a numeric argument")))?
                .parse::<f64>()
                .map_err(|_| TraceError::InvalidParameter(format!("bad jitter argument in `{s}`")))
        };
        let j = match (name, arg) {
            ("none", None) => Jitter::None,
            ("exp", None) => Jitter::Exponential,
            ("uniform", a) => Jitter::Uniform { spread: num(a)? },
            ("lognormal", a) => Jitter::LogNormal { cov: num(a)? },
            _ => return Err(TraceError::InvalidParameter(format!("unknown jitter spec `{s}`"))),
        };
        j.validate()?;
        Ok(j)
    }
}

impl Serialize for Jitter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Jitter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parameters for a synthetic H.263-like trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSpec {
    pub seed: u64,
    #[serde(default = "default_frame_period")]
    pub frame_period_ms: u64,
    pub mean_interarrival_ms: u64,
    pub interarrival_jitter: Jitter,
    pub mean_size_bits: u32,
    pub size_jitter: Jitter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_size_bits: Option<u32>,
    pub duration_ms: u64,
}

fn default_frame_period() -> u64 {
    DEFAULT_FRAME_PERIOD_MS
}

/// Builds a deterministic synthetic trace.
///
/// Inter-arrival gaps are drawn around the requested mean and then snapped to
/// whole reference frame periods (at least one) with randomized rounding, which
/// keeps the realized mean unbiased. Sizes are clamped to `[1, max_size_bits]`.
pub fn synthesize_trace(spec: &SynthesisSpec) -> Result<VideoTrace, TraceError> {
    let p = spec.frame_period_ms;
    if p == 0 || spec.mean_interarrival_ms == 0 || spec.mean_size_bits == 0 || spec.duration_ms == 0 {
        return Err(TraceError::InvalidParameter(
            "period, mean inter-arrival, mean size and duration must be positive".into(),
        ));
    }
    if spec.mean_interarrival_ms < p {
        return Err(TraceError::InvalidParameter(format!(
            "mean inter-arrival {} ms is shorter than the frame period {p} ms",
            spec.mean_interarrival_ms
        )));
    }
    if spec.interarrival_jitter == Jitter::None && !spec.mean_interarrival_ms.is_multiple_of(p) {
        return Err(TraceError::InvalidParameter(format!(
            "a periodic trace needs a mean inter-arrival that is a multiple of {p} ms"
        )));
    }
    if spec.max_size_bits == Some(0) {
        return Err(TraceError::InvalidParameter("max_size_bits must be positive".into()));
    }
    spec.interarrival_jitter.validate()?;
    spec.size_jitter.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mean_gap = spec.mean_interarrival_ms as f64;
    let mean_size = spec.mean_size_bits as f64;
    let max_size = spec.max_size_bits.unwrap_or(u32::MAX);

    let mut records = Vec::new();
    let mut t = 0u64;
    while t < spec.duration_ms {
        let size = draw(&mut rng, spec.size_jitter, mean_size, 0.0).round();
        let size_bits = (size.max(1.0) as u64).min(max_size as u64) as u32;
        records.push(FrameRecord {
            arrival_ms: t,
            frame_type: if records.is_empty() { FrameType::I } else { FrameType::P },
            size_bits,
        });
        let gap = draw(&mut rng, spec.interarrival_jitter, mean_gap, p as f64);
        let periods = gap / p as f64;
        let whole = periods.floor();
        let frac = periods - whole;
        let mut k = whole as u64;
        if frac > 0.0 && rng.random::<f64>() < frac {
            k += 1;
        }
        t += k.max(1) * p;
    }
    VideoTrace::new(records, format!("synthetic(seed={})", spec.seed))
}

/// One draw around `mean`. `floor` is the shift applied to the exponential
/// form so that gaps never fall below one frame period.
fn draw(rng: &mut ChaCha8Rng, jitter: Jitter, mean: f64, floor: f64) -> f64 {
    match jitter {
        Jitter::None => mean,
        Jitter::Uniform { spread } => {
            if spread == 0.0 {
                return mean;
            }
            let lo = mean * (1.0 - spread);
            let hi = mean * (1.0 + spread);
            Uniform::new(lo, hi).expect("valid uniform bounds").sample(rng)
        }
        Jitter::Exponential => {
            let excess = mean - floor;
            if excess <= 0.0 {
                return mean;
            }
            floor + Exp::new(1.0 / excess).expect("positive rate").sample(rng)
        }
        Jitter::LogNormal { cov } => {
            let sigma2 = (1.0 + cov * cov).ln();
            let mu = mean.ln() - sigma2 / 2.0;
            LogNormal::new(mu, sigma2.sqrt()).expect("valid lognormal").sample(rng)
        }
    }
}
