use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hcca_core::harness::{run_cell, run_sweep, write_run_output, write_sweep, CellError, CellOutcome};
use hcca_core::metrics::RunSummary;
use hcca_core::scenario::{load_config, ScenarioConfig};
use hcca_core::{SchedulerKind, SimError};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 3;
const EXIT_ADMISSION: u8 = 4;
const EXIT_FAULT: u8 = 5;

#[derive(Parser)]
#[command(name = "hcca-sim", version, about = "Simulate 802.11e HCCA uplink polling of VBR video")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory. Falls back to `output_dir` in the config, then `hcca-out`.
    #[arg(long, global = true, env = "HCCA_SIM_OUT")]
    out: Option<PathBuf>,

    /// Also write the full event log (`events.csv`) for each run.
    #[arg(long, global = true)]
    event_log: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run { config: PathBuf },
    /// Run a station-count × scheduler sweep.
    Sweep {
        config: PathBuf,
        /// Station counts: `1..20` (inclusive) or a list like `1,2,6`.
        #[arg(long, default_value = "1..20", value_parser = parse_counts)]
        stations: Counts,
        #[arg(long, value_delimiter = ',', default_value = "hcca,edd,fpoll")]
        schedulers: Vec<SchedulerKind>,
    },
}

#[derive(Clone, Debug)]
struct Counts(Vec<usize>);

fn parse_counts(s: &str) -> Result<Counts, String> {
    let bad = || format!("invalid station counts `{s}`");
    let v: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if v.is_empty() {
        return Err(bad());
    }
    Ok(Counts(v))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, (u8, String)> {
    let mut cfg = load_config(path).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ScenarioConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(|d| cfg.base_dir.join(d)))
        .unwrap_or_else(|| PathBuf::from("hcca-out"))
}

fn execute(cli: &Cli) -> Result<(), (u8, String)> {
    let io_err = |e: std::io::Error| (EXIT_IO, e.to_string());
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(config, cli.seed)?;
            let out = run_cell(&cfg, cfg.scheduler, cfg.station_count(), cli.event_log).map_err(|e| match e {
                CellError::Config(e) => (EXIT_CONFIG, e.to_string()),
                CellError::Sim(e @ SimError::Admission(_)) => (EXIT_ADMISSION, e.to_string()),
                CellError::Sim(e @ (SimError::InvalidScenario(_) | SimError::Qos(_))) => (EXIT_CONFIG, e.to_string()),
                CellError::Sim(e @ SimError::Infeasible { .. }) => (EXIT_FAULT, e.to_string()),
            })?;
            let dir = out_dir(cli, &cfg);
            write_run_output(&out, &dir).map_err(io_err)?;
            for (k, v) in RunSummary::of(&out.ledger).rows() {
                println!("{k}: {v}");
            }
            println!("results written to {}", dir.display());
            Ok(())
        }
        Command::Sweep { config, stations, schedulers } => {
            let cfg = load(config, cli.seed)?;
            let matrix = run_sweep(&cfg, &stations.0, schedulers, cli.event_log);
            let dir = out_dir(cli, &cfg);
            write_sweep(&matrix, &dir).map_err(io_err)?;
            for c in &matrix.cells {
                match &c.outcome {
                    CellOutcome::Completed(_) => {
                        let s = c.summary().expect("completed");
                        let delay = s.mean_access_delay_ms.map_or("-".into(), |d| format!("{d:.3} ms"));
                        println!("{:<6} n={:<3} access delay {delay}", c.scheduler.as_str(), c.station_count);
                    }
                    CellOutcome::Rejected(m) | CellOutcome::Failed(m) => {
                        println!("{:<6} n={:<3} {}: {m}", c.scheduler.as_str(), c.station_count, c.status())
                    }
                }
            }
            println!("results written to {}", dir.display());
            Ok(())
        }
    }
}
