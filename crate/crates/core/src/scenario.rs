//! Scenario configuration files.
//!
//! TOML, one `[[station]]` table per station. A named preset fills in the
//! TSPEC and a synthetic trace, so the shortest useful file is:
//!
//! ```toml
//! preset = "formula1"
//! stations = 6
//! scheduler = "fpoll"
//! ```
//!
//! Station positions are accepted but ignored: the channel is ideal.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{LossInjector, Scenario, StationSetup};
use crate::policy::SchedulerKind;
use crate::qos::{PhyProfile, TrafficSpec};
use crate::time::Micros;
use crate::trace::{parse_trace, synthesize_trace, Jitter, SynthesisSpec, TraceError, VideoTrace};

pub const DEFAULT_DURATION_MS: u64 = 500_000;
pub const DEFAULT_TRAFFIC_START_MS: u64 = 20_000;
/// Preset traces run this far past the end of the simulation, so a station's
/// last generated frame still has a known successor.
pub const PRESET_TRACE_MARGIN_MS: u64 = 60_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}:{line}: {message}", path.display())]
    Invalid { path: PathBuf, line: usize, message: String },
    #[error("trace file {} not found", path.display())]
    MissingTrace { path: PathBuf },
    #[error("trace {}: {source}", path.display())]
    Trace {
        path: PathBuf,
        #[source]
        source: TraceError,
    },
}

/// Named TSPEC plus matching synthetic-trace parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Formula1,
    Soccer,
    Mrbean,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Formula1, Preset::Soccer, Preset::Mrbean];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Formula1 => "formula1",
            Preset::Soccer => "soccer",
            Preset::Mrbean => "mrbean",
        }
    }

    pub fn tspec(self) -> TrafficSpec {
        match self {
            Preset::Formula1 => TrafficSpec::formula1(),
            Preset::Soccer => TrafficSpec::soccer(),
            Preset::Mrbean => TrafficSpec::mr_bean(),
        }
    }

    /// Synthetic trace with the preset's nominal frame size and an average
    /// rate of the TSPEC mean data rate.
    ///
    /// Gaps are exponential around `nominal * 8 / rate` (rounded to the
    /// millisecond), sizes lognormal with unit CoV, capped at the maximum MSDU.
    pub fn synthesis(self, seed: u64, duration_ms: u64) -> SynthesisSpec {
        let t = self.tspec();
        let bits = t.nominal_msdu_size as u64 * 8;
        SynthesisSpec {
            seed,
            frame_period_ms: crate::trace::DEFAULT_FRAME_PERIOD_MS,
            mean_interarrival_ms: (bits * 1000 + t.mean_data_rate / 2) / t.mean_data_rate,
            interarrival_jitter: Jitter::Exponential,
            mean_size_bits: bits as u32,
            size_jitter: Jitter::LogNormal { cov: 1.0 },
            max_size_bits: Some(t.max_msdu_size * 8),
            duration_ms,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim())
            .ok_or_else(|| format!("unknown preset `{s}` (expected formula1, soccer or mrbean)"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationConfig {
    /// Trace file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthesisSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tspec: Option<TrafficSpec>,
    #[serde(default)]
    pub start_offset_ms: u64,
    /// Accepted for completeness; has no effect on an ideal channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossEntry {
    pub station: usize,
    /// Trace frame index whose transmission is lost.
    pub frame: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub scheduler: SchedulerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    /// Station count. Without `[[station]]` tables every station uses the
    /// preset; with them the tables are repeated cyclically.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stations: Option<usize>,
    #[serde(default = "default_duration")]
    pub duration_ms: u64,
    #[serde(default = "default_traffic_start")]
    pub traffic_start_ms: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub phy: PhyProfile,
    #[serde(default, rename = "station", skip_serializing_if = "Vec::is_empty")]
    pub station_list: Vec<StationConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss: Vec<LossEntry>,
    /// Directory relative trace paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_duration() -> u64 {
    DEFAULT_DURATION_MS
}

fn default_traffic_start() -> u64 {
    DEFAULT_TRAFFIC_START_MS
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first occurrence of `needle` at the start of a line, or 1.
fn line_of_key(text: &str, needle: &str) -> usize {
    text.lines().position(|l| l.trim_start().starts_with(needle)).map_or(1, |i| i + 1)
}

/// Line of the `n`th `[[<table>]]` header, or 1.
fn line_of_table(text: &str, table: &str, n: usize) -> usize {
    let header = format!("[[{table}]]");
    text.lines().enumerate().filter(|(_, l)| l.trim() == header).nth(n).map_or(1, |(i, _)| i + 1)
}

/// Mixes the run seed with a per-station salt.
fn derive_seed(seed: u64, salt: u64, station: usize) -> u64 {
    let mut z = seed ^ salt.rotate_left(17) ^ (station as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reads and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, path, &base)
}

/// Parses config text; `path` is only used in messages.
pub fn parse_config(text: &str, path: &Path, base_dir: &Path) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.into(),
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    cfg.base_dir = base_dir.to_path_buf();
    cfg.validate_against(text, path)?;
    Ok(cfg)
}

impl ScenarioConfig {
    /// A preset-only scenario with default timing.
    pub fn preset(preset: Preset, stations: usize, scheduler: SchedulerKind) -> Self {
        ScenarioConfig {
            name: None,
            scheduler,
            preset: Some(preset),
            stations: Some(stations),
            duration_ms: DEFAULT_DURATION_MS,
            traffic_start_ms: DEFAULT_TRAFFIC_START_MS,
            seed: 0,
            output_dir: None,
            phy: PhyProfile::default(),
            station_list: Vec::new(),
            loss: Vec::new(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Label used in sweep output.
    pub fn label(&self) -> String {
        self.name.clone().or_else(|| self.preset.map(|p| p.as_str().to_string())).unwrap_or_else(|| "custom".into())
    }

    pub fn station_count(&self) -> usize {
        self.stations.unwrap_or(self.station_list.len())
    }

    /// Same scenario with `n` stations.
    pub fn with_station_count(&self, n: usize) -> Self {
        ScenarioConfig { stations: Some(n), ..self.clone() }
    }

    /// Per-station settings after expanding the count shorthand.
    pub fn expanded_stations(&self) -> Vec<StationConfig> {
        let n = self.station_count();
        if self.station_list.is_empty() {
            return vec![StationConfig::default(); n];
        }
        (0..n).map(|i| self.station_list[i % self.station_list.len()].clone()).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_against("", Path::new("<config>"))
    }

    fn validate_against(&self, text: &str, path: &Path) -> Result<(), ConfigError> {
        let invalid = |line: usize, message: String| ConfigError::Invalid { path: path.into(), line, message };
        if self.duration_ms <= self.traffic_start_ms {
            return Err(invalid(
                line_of_key(text, "duration_ms"),
                format!("duration_ms ({}) must exceed traffic_start_ms ({})", self.duration_ms, self.traffic_start_ms),
            ));
        }
        self.phy.validate().map_err(|e| invalid(line_of_key(text, "[phy]"), e.to_string()))?;
        if self.station_list.is_empty() && self.station_count() > 0 && self.preset.is_none() {
            return Err(invalid(1, "stations without [[station]] tables need a top-level preset".into()));
        }
        for (i, st) in self.station_list.iter().enumerate() {
            let line = line_of_table(text, "station", i);
            if st.trace.is_some() && st.synth.is_some() {
                return Err(invalid(line, format!("station {i}: give either `trace` or `synth`, not both")));
            }
            if st.tspec.is_none() && st.preset.is_none() && self.preset.is_none() {
                return Err(invalid(line, format!("station {i}: no tspec and no preset to take it from")));
            }
            if st.trace.is_none() && st.synth.is_none() && st.preset.is_none() && self.preset.is_none() {
                return Err(invalid(line, format!("station {i}: no trace source")));
            }
            if let Some(spec) = &st.tspec {
                spec.validate().map_err(|e| invalid(line, format!("station {i}: {e}")))?;
            }
            if let Some(p) = &st.trace {
                let full = self.base_dir.join(p);
                if !full.is_file() {
                    return Err(ConfigError::MissingTrace { path: full });
                }
            }
        }
        let n = self.station_count();
        for (k, l) in self.loss.iter().enumerate() {
            if l.station >= n {
                return Err(invalid(
                    line_of_table(text, "loss", k),
                    format!("loss entry names station {} but there are {n}", l.station),
                ));
            }
        }
        Ok(())
    }

    /// Loads traces and builds the runnable scenario.
    pub fn resolve(&self, record_events: bool) -> Result<Scenario, ConfigError> {
        self.validate()?;
        let mut files: HashMap<PathBuf, Arc<VideoTrace>> = HashMap::new();
        let mut stations = Vec::new();
        for (i, st) in self.expanded_stations().into_iter().enumerate() {
            let preset = st.preset.or(self.preset);
            let spec = st.tspec.clone().or_else(|| preset.map(Preset::tspec)).expect("validated");
            let offset = st.start_offset_ms;
            let span_ms = self.duration_ms.saturating_sub(self.traffic_start_ms + offset).max(1);
            let trace = if let Some(p) = &st.trace {
                let full = self.base_dir.join(p);
                match files.get(&full) {
                    Some(t) => Arc::clone(t),
                    None => {
                        let text = std::fs::read_to_string(&full)
                            .map_err(|source| ConfigError::Io { path: full.clone(), source })?;
                        let label = full.display().to_string();
                        let t = Arc::new(
                            parse_trace(&text, &label)
                                .map_err(|source| ConfigError::Trace { path: full.clone(), source })?
                                .trace,
                        );
                        files.insert(full, Arc::clone(&t));
                        t
                    }
                }
            } else {
                let mut synth = match &st.synth {
                    Some(s) => s.clone(),
                    None => preset.expect("validated").synthesis(0, span_ms + PRESET_TRACE_MARGIN_MS),
                };
                synth.seed = derive_seed(self.seed, synth.seed, i);
                let label = format!("synthetic station {i}");
                Arc::new(
                    synthesize_trace(&synth)
                        .map_err(|source| ConfigError::Trace { path: PathBuf::from(&label), source })?,
                )
            };
            stations.push(StationSetup { trace, spec, start_offset: Micros::from_ms(offset as i64) });
        }
        Ok(Scenario {
            phy: self.phy.clone(),
            stations,
            scheduler: self.scheduler,
            duration: Micros::from_ms(self.duration_ms as i64),
            traffic_start: Micros::from_ms(self.traffic_start_ms as i64),
            loss: LossInjector::new(self.loss.iter().map(|l| (l.station, l.frame))),
            record_events,
        })
    }
}
