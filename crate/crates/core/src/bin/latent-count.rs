use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use latent_count::harness::{commands, replay_cell, run_experiment_with_threads, ExperimentConfig};
use latent_count::io::read_counts;
use latent_count::{Error, Result};

#[derive(Parser)]
#[command(
    name = "latent-count",
    version,
    about = "Latent Gaussian VAR models for count time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON, or TOML with a .toml extension).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate counts and the latent series.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Series length; defaults to the largest N plus L.
        #[arg(long)]
        t: Option<usize>,
    },
    /// Estimate the latent block autocovariance.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Counts CSV; simulated from the configuration when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        t: Option<usize>,
    },
    /// Fit the sparse VAR over the configured penalty grid.
    Lasso {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        t: Option<usize>,
    },
    /// Tabulate link functions of all marginal pairs.
    LinkTable {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 41)]
        points: usize,
        #[arg(long, default_value_t = 0.99)]
        u_max: f64,
    },
    /// Check the moment series of each marginal.
    M3Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 500)]
        n_cap: usize,
    },
    /// Concentration and LASSO constants of the configured model.
    Constants {
        #[command(flatten)]
        common: Common,
    },
    /// Run the full Monte Carlo experiment.
    McRun {
        #[command(flatten)]
        common: Common,
        /// Worker threads; all available cores when omitted.
        #[arg(long)]
        threads: Option<usize>,
        /// Summary CSV path (median and IQR).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Recompute one cell of an experiment, given as N:replicate.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cell: String,
    },
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn default_t(cfg: &ExperimentConfig) -> usize {
    cfg.n_grid.last().copied().unwrap_or(0) + cfg.l()
}

fn counts(cfg: &ExperimentConfig, input: Option<&Path>, t: Option<usize>) -> Result<nalgebra::DMatrix<u64>> {
    match input {
        Some(p) => read_counts(File::open(p)?),
        None => Ok(commands::simulate_counts(cfg, t.unwrap_or_else(|| default_t(cfg)))?.0),
    }
}

fn parse_cell(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("cell must look like N:replicate, got {s:?}"));
    let (n, r) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        n.trim().parse().map_err(|_| bad())?,
        r.trim().parse().map_err(|_| bad())?,
    ))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, t } => {
            let cfg = load(&common)?;
            let t = t.unwrap_or_else(|| default_t(&cfg));
            commands::simulate_csv(&cfg, t, open_out(common.out.as_deref())?)
        }
        Command::Estimate { common, input, t } => {
            let cfg = load(&common)?;
            let x = counts(&cfg, input.as_deref(), t)?;
            commands::estimate_csv(&cfg, &x, open_out(common.out.as_deref())?)
        }
        Command::Lasso { common, input, t } => {
            let cfg = load(&common)?;
            let x = counts(&cfg, input.as_deref(), t)?;
            commands::lasso_csv(&cfg, &x, open_out(common.out.as_deref())?)
        }
        Command::LinkTable { common, points, u_max } => {
            let cfg = load(&common)?;
            commands::link_table_csv(&cfg, points, u_max, open_out(common.out.as_deref())?)
        }
        Command::M3Check { common, n_cap } => {
            let cfg = load(&common)?;
            commands::m3_check_csv(&cfg, n_cap, open_out(common.out.as_deref())?)
        }
        Command::Constants { common } => {
            let cfg = load(&common)?;
            commands::constants_csv(&cfg, open_out(common.out.as_deref())?)
        }
        Command::McRun {
            common,
            threads,
            summary,
        } => {
            let cfg = load(&common)?;
            let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let result = run_experiment_with_threads(&cfg, threads)?;
            let out_cfg = cfg.output.clone();
            let out = common.out.or_else(|| out_cfg.as_ref().and_then(|o| o.csv.clone()));
            result.write_rows_csv(open_out(out.as_deref())?)?;
            if let Some(path) = summary.or_else(|| out_cfg.and_then(|o| o.summary)) {
                result.write_summary_csv(BufWriter::new(File::create(path)?))?;
            }
            for (n, rep, msg) in result.failed_cells() {
                eprintln!("failed cell {n}:{rep}: {msg}");
            }
            Ok(())
        }
        Command::Replay { common, cell } => {
            let cfg = load(&common)?;
            let (n, rep) = parse_cell(&cell)?;
            replay_cell(&cfg, n, rep)?.write_rows_csv(open_out(common.out.as_deref())?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
