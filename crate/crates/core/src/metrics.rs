//! Delay, throughput and poll-overhead accounting.
//!
//! Packets still queued (or in flight) when the run ends are kept out of the
//! delay statistics; they only show up in the per-station conservation counts.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::qos::StationId;
use crate::time::Micros;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no delivered packets")]
    NoPackets,
    #[error("no polls were sent")]
    NoPolls,
    #[error("unknown stream {0}")]
    UnknownStream(StationId),
}

/// One delivered packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    pub stream: StationId,
    pub frame_index: usize,
    /// Generation time at the source.
    pub generated: Micros,
    /// Start of the MAC transmission.
    pub sent: Micros,
    /// End of reception at the access point.
    pub received: Micros,
    pub size_bits: u64,
}

impl PacketRecord {
    pub fn access_delay(&self) -> Micros {
        self.sent - self.generated
    }

    pub fn e2e_delay(&self) -> Micros {
        self.received - self.generated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PollOutcome {
    Data { frames: u32 },
    Null,
    NoResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PollRecord {
    pub cap_start: Micros,
    pub polled_at: Micros,
    pub station: StationId,
    pub outcome: PollOutcome,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StationCounters {
    pub polls_sent: u64,
    pub nulls_received: u64,
    /// Polls answered with at least one received data frame.
    pub data_responses: u64,
    pub data_frames_received: u64,
    pub no_response: u64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub queued_at_end: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLedger {
    pub duration: Micros,
    pub packets: Vec<PacketRecord>,
    pub polls: Vec<PollRecord>,
    pub stations: Vec<StationCounters>,
    /// (station, frame index) of every frame discarded by loss injection.
    pub dropped: Vec<(StationId, usize)>,
}

impl MetricsLedger {
    pub fn new(stations: usize, duration: Micros) -> Self {
        MetricsLedger { duration, stations: vec![StationCounters::default(); stations], ..Default::default() }
    }

    pub fn record_poll(&mut self, rec: PollRecord) {
        let c = &mut self.stations[rec.station];
        c.polls_sent += 1;
        match rec.outcome {
            PollOutcome::Data { frames } => {
                c.data_responses += 1;
                c.data_frames_received += frames as u64;
            }
            PollOutcome::Null => c.nulls_received += 1,
            PollOutcome::NoResponse => c.no_response += 1,
        }
        self.polls.push(rec);
    }

    pub fn record_packet(&mut self, rec: PacketRecord) {
        self.stations[rec.stream].delivered += 1;
        self.packets.push(rec);
    }

    pub fn total_polls(&self) -> u64 {
        self.stations.iter().map(|c| c.polls_sent).sum()
    }

    pub fn total_nulls(&self) -> u64 {
        self.stations.iter().map(|c| c.nulls_received).sum()
    }

    pub fn delivered_bits(&self) -> u64 {
        self.packets.iter().map(|p| p.size_bits).sum()
    }

    /// Polls whose CAP started strictly after `after`.
    pub fn polls_after(&self, after: Micros) -> impl Iterator<Item = &PollRecord> {
        self.polls.iter().filter(move |p| p.cap_start > after)
    }
}

/// Mean of `sent - generated` over every delivered packet, in microseconds.
pub fn mean_access_delay(ledger: &MetricsLedger) -> Result<f64, MetricsError> {
    mean_of(ledger.packets.iter().map(PacketRecord::access_delay))
}

/// Mean of `received - generated` over every delivered packet, in microseconds.
pub fn mean_e2e_delay(ledger: &MetricsLedger) -> Result<f64, MetricsError> {
    mean_of(ledger.packets.iter().map(PacketRecord::e2e_delay))
}

fn mean_of(delays: impl Iterator<Item = Micros>) -> Result<f64, MetricsError> {
    let (sum, n) = delays.fold((0i128, 0u64), |(s, n), d| (s + d.as_us() as i128, n + 1));
    if n == 0 {
        return Err(MetricsError::NoPackets);
    }
    Ok(sum as f64 / n as f64)
}

/// Null frames received over polls sent, all stations.
pub fn poll_overhead_ratio(ledger: &MetricsLedger) -> Result<f64, MetricsError> {
    ratio(ledger.total_nulls(), ledger.total_polls())
}

/// Poll-overhead ratio restricted to CAPs starting after `after`.
pub fn poll_overhead_ratio_after(ledger: &MetricsLedger, after: Micros) -> Result<f64, MetricsError> {
    let (mut nulls, mut polls) = (0, 0);
    for p in ledger.polls_after(after) {
        polls += 1;
        if p.outcome == PollOutcome::Null {
            nulls += 1;
        }
    }
    ratio(nulls, polls)
}

fn ratio(nulls: u64, polls: u64) -> Result<f64, MetricsError> {
    if polls == 0 {
        return Err(MetricsError::NoPolls);
    }
    Ok(nulls as f64 / polls as f64)
}

/// Delivered payload bits per second of simulated time.
pub fn aggregate_throughput(ledger: &MetricsLedger) -> f64 {
    if !ledger.duration.is_positive() {
        return 0.0;
    }
    ledger.delivered_bits() as f64 / ledger.duration.as_secs_f64()
}

/// `(generation time, end-to-end delay)` for one stream, by generation time.
pub fn e2e_delay_series(ledger: &MetricsLedger, stream: StationId) -> Result<Vec<(Micros, Micros)>, MetricsError> {
    if stream >= ledger.stations.len() {
        return Err(MetricsError::UnknownStream(stream));
    }
    let mut out: Vec<(Micros, Micros)> =
        ledger.packets.iter().filter(|p| p.stream == stream).map(|p| (p.generated, p.e2e_delay())).collect();
    out.sort();
    Ok(out)
}

/// Median of a sample; the lower middle element for even sizes.
pub fn median(values: &mut [Micros]) -> Option<Micros> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    Some(values[(values.len() - 1) / 2])
}

pub fn median_e2e_delay(ledger: &MetricsLedger, stream: StationId) -> Result<Micros, MetricsError> {
    let mut d: Vec<Micros> = e2e_delay_series(ledger, stream)?.into_iter().map(|(_, d)| d).collect();
    median(&mut d).ok_or(MetricsError::NoPackets)
}

/// Headline numbers for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mean_access_delay_ms: Option<f64>,
    pub mean_e2e_delay_ms: Option<f64>,
    pub throughput_bps: f64,
    pub poll_overhead_ratio: Option<f64>,
    pub polls_sent: u64,
    pub nulls_received: u64,
    pub packets_delivered: u64,
    pub delivered_bytes: u64,
    pub packets_dropped: u64,
    pub packets_queued_at_end: u64,
}

impl RunSummary {
    pub fn of(ledger: &MetricsLedger) -> Self {
        RunSummary {
            mean_access_delay_ms: mean_access_delay(ledger).ok().map(|us| us / 1000.0),
            mean_e2e_delay_ms: mean_e2e_delay(ledger).ok().map(|us| us / 1000.0),
            throughput_bps: aggregate_throughput(ledger),
            poll_overhead_ratio: poll_overhead_ratio(ledger).ok(),
            polls_sent: ledger.total_polls(),
            nulls_received: ledger.total_nulls(),
            packets_delivered: ledger.packets.len() as u64,
            delivered_bytes: ledger.packets.iter().map(|p| p.size_bits.div_ceil(8)).sum(),
            packets_dropped: ledger.dropped.len() as u64,
            packets_queued_at_end: ledger.stations.iter().map(|c| c.queued_at_end).sum(),
        }
    }

    /// `(metric, value)` pairs with fixed formatting; undefined values are empty.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>, places: usize| v.map(|x| format!("{x:.places$}")).unwrap_or_default();
        vec![
            ("mean_access_delay_ms", opt(self.mean_access_delay_ms, 6)),
            ("mean_e2e_delay_ms", opt(self.mean_e2e_delay_ms, 6)),
            ("throughput_bps", format!("{:.3}", self.throughput_bps)),
            ("poll_overhead_ratio", opt(self.poll_overhead_ratio, 6)),
            ("polls_sent", self.polls_sent.to_string()),
            ("nulls_received", self.nulls_received.to_string()),
            ("packets_delivered", self.packets_delivered.to_string()),
            ("delivered_bytes", self.delivered_bytes.to_string()),
            ("packets_dropped", self.packets_dropped.to_string()),
            ("packets_queued_at_end", self.packets_queued_at_end.to_string()),
        ]
    }
}

pub fn summary_csv(ledger: &MetricsLedger) -> String {
    let mut s = String::from("metric,value\n");
    for (k, v) in RunSummary::of(ledger).rows() {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

/// Columns: `stream,frame_index,generated_us,sent_us,received_us,size_bits,access_delay_us,e2e_delay_us`,
/// sorted by stream then generation time.
pub fn packets_csv(ledger: &MetricsLedger) -> String {
    let mut rows: Vec<&PacketRecord> = ledger.packets.iter().collect();
    rows.sort_by_key(|p| (p.stream, p.generated, p.frame_index));
    let mut s =
        String::from("stream,frame_index,generated_us,sent_us,received_us,size_bits,access_delay_us,e2e_delay_us\n");
    for p in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.stream,
            p.frame_index,
            p.generated.as_us(),
            p.sent.as_us(),
            p.received.as_us(),
            p.size_bits,
            p.access_delay().as_us(),
            p.e2e_delay().as_us()
        );
    }
    s
}

/// Columns: `station,polls_sent,nulls_received,data_responses,data_frames_received,no_response,generated,delivered,dropped,queued_at_end`.
pub fn poll_counts_csv(ledger: &MetricsLedger) -> String {
    let mut s = String::from(
        "station,polls_sent,nulls_received,data_responses,data_frames_received,no_response,generated,delivered,dropped,queued_at_end\n",
    );
    for (i, c) in ledger.stations.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{},{},{}",
            c.polls_sent,
            c.nulls_received,
            c.data_responses,
            c.data_frames_received,
            c.no_response,
            c.generated,
            c.delivered,
            c.dropped,
            c.queued_at_end
        );
    }
    s
}

/// Columns: `stream,generated_us,e2e_delay_us`, grouped by stream.
pub fn e2e_delay_csv(ledger: &MetricsLedger) -> String {
    let mut s = String::from("stream,generated_us,e2e_delay_us\n");
    for stream in 0..ledger.stations.len() {
        for (g, d) in e2e_delay_series(ledger, stream).expect("stream in range") {
            let _ = writeln!(s, "{stream},{},{}", g.as_us(), d.as_us());
        }
    }
    s
}

/// Writes `summary.csv`, `packets.csv`, `polls.csv` and `e2e_delay.csv`.
pub fn write_run_csvs(ledger: &MetricsLedger, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("summary.csv"), summary_csv(ledger))?;
    std::fs::write(dir.join("packets.csv"), packets_csv(ledger))?;
    std::fs::write(dir.join("polls.csv"), poll_counts_csv(ledger))?;
    std::fs::write(dir.join("e2e_delay.csv"), e2e_delay_csv(ledger))?;
    Ok(())
}
