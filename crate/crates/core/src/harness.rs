//! Station-count × scheduler sweeps and their tabular output.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use rayon::prelude::*;

use crate::engine::{run, RunOutput, SimError};
use crate::metrics::{write_run_csvs, RunSummary};
use crate::policy::SchedulerKind;
use crate::scenario::{ConfigError, ScenarioConfig};

#[derive(Debug)]
pub enum CellOutcome {
    Completed(Box<RunOutput>),
    /// Admission control refused one of the stations.
    Rejected(String),
    /// Any other failure: bad input or a scheduling fault.
    Failed(String),
}

#[derive(Debug)]
pub struct SweepCell {
    pub scheduler: SchedulerKind,
    pub station_count: usize,
    pub outcome: CellOutcome,
}

impl SweepCell {
    pub fn dir_name(&self) -> String {
        format!("{}_n{}", self.scheduler, self.station_count)
    }

    pub fn summary(&self) -> Option<RunSummary> {
        match &self.outcome {
            CellOutcome::Completed(out) => Some(RunSummary::of(&out.ledger)),
            _ => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self.outcome {
            CellOutcome::Completed(_) => "ok",
            CellOutcome::Rejected(_) => "rejected",
            CellOutcome::Failed(_) => "failed",
        }
    }
}

#[derive(Debug)]
pub struct SweepMatrix {
    pub scenario: String,
    /// Ordered by scheduler (as requested), then station count ascending.
    pub cells: Vec<SweepCell>,
}

/// Runs one cell: the config with its station count and scheduler replaced.
pub fn run_cell(
    config: &ScenarioConfig,
    scheduler: SchedulerKind,
    station_count: usize,
    record_events: bool,
) -> Result<RunOutput, CellError> {
    let cfg = ScenarioConfig { scheduler, ..config.with_station_count(station_count) };
    let scenario = cfg.resolve(record_events)?;
    Ok(run(&scenario)?)
}

#[derive(Debug, thiserror::Error)]
pub enum CellError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Runs the cross product in parallel. Failures stay inside their cell.
pub fn run_sweep(
    config: &ScenarioConfig,
    station_counts: &[usize],
    schedulers: &[SchedulerKind],
    record_events: bool,
) -> SweepMatrix {
    let mut counts = station_counts.to_vec();
    counts.sort_unstable();
    counts.dedup();
    let jobs: Vec<(SchedulerKind, usize)> =
        schedulers.iter().flat_map(|&s| counts.iter().map(move |&n| (s, n))).collect();
    let cells = jobs
        .into_par_iter()
        .map(|(scheduler, station_count)| {
            let outcome = match run_cell(config, scheduler, station_count, record_events) {
                Ok(out) => CellOutcome::Completed(Box::new(out)),
                Err(CellError::Sim(SimError::Admission(e))) => CellOutcome::Rejected(e.to_string()),
                Err(e) => CellOutcome::Failed(e.to_string()),
            };
            SweepCell { scheduler, station_count, outcome }
        })
        .collect();
    SweepMatrix { scenario: config.label(), cells }
}

/// Columns: `scheduler,station_count,status,<summary metrics...>`.
pub fn sweep_summary_csv(matrix: &SweepMatrix) -> String {
    let metric_names: Vec<&str> = RunSummary::of(&crate::metrics::MetricsLedger::new(0, crate::time::Micros(1)))
        .rows()
        .into_iter()
        .map(|(k, _)| k)
        .collect();
    let mut s = format!("scheduler,station_count,status,{}\n", metric_names.join(","));
    for c in &matrix.cells {
        let values: Vec<String> = match c.summary() {
            Some(sum) => sum.rows().into_iter().map(|(_, v)| v).collect(),
            None => vec![String::new(); metric_names.len()],
        };
        let _ = writeln!(s, "{},{},{},{}", c.scheduler, c.station_count, c.status(), values.join(","));
    }
    s
}

/// Long-format rows `scenario,scheduler,station_count,metric,value`, sorted by
/// metric, scheduler, then station count. Cells without a result keep their
/// rows with an empty value.
pub fn emit_plot_data(matrix: &SweepMatrix) -> String {
    let mut rows: Vec<(&'static str, SchedulerKind, usize, String)> = Vec::new();
    for c in &matrix.cells {
        match c.summary() {
            Some(sum) => rows.extend(sum.rows().into_iter().map(|(k, v)| (k, c.scheduler, c.station_count, v))),
            None => rows.extend(
                RunSummary::of(&crate::metrics::MetricsLedger::new(0, crate::time::Micros(1)))
                    .rows()
                    .into_iter()
                    .map(|(k, _)| (k, c.scheduler, c.station_count, String::new())),
            ),
        }
    }
    rows.sort_by(|a, b| (a.0, a.1.as_str(), a.2).cmp(&(b.0, b.1.as_str(), b.2)));
    let mut s = String::from("scenario,scheduler,station_count,metric,value\n");
    for (metric, sched, n, v) in rows {
        let _ = writeln!(s, "{},{sched},{n},{metric},{v}", matrix.scenario);
    }
    s
}

/// Writes every cell's CSVs under `<dir>/<scheduler>_n<count>/`, then
/// `sweep_summary.csv` and `plot_data.csv`.
pub fn write_sweep(matrix: &SweepMatrix, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for c in &matrix.cells {
        let cell_dir = dir.join(c.dir_name());
        match &c.outcome {
            CellOutcome::Completed(out) => write_run_output(out, &cell_dir)?,
            CellOutcome::Rejected(msg) | CellOutcome::Failed(msg) => {
                std::fs::create_dir_all(&cell_dir)?;
                std::fs::write(cell_dir.join("error.txt"), format!("{}: {msg}\n", c.status()))?;
            }
        }
    }
    std::fs::write(dir.join("sweep_summary.csv"), sweep_summary_csv(matrix))?;
    std::fs::write(dir.join("plot_data.csv"), emit_plot_data(matrix))?;
    Ok(())
}

/// Run CSVs plus `events.csv` when the event log was recorded.
pub fn write_run_output(out: &RunOutput, dir: &Path) -> io::Result<()> {
    write_run_csvs(&out.ledger, dir)?;
    if let Some(log) = &out.event_log {
        std::fs::write(dir.join("events.csv"), log.to_csv())?;
    }
    Ok(())
}
