//! Command-line front end: loads a JSON experiment configuration, applies
//! flag overrides, runs the requested command and writes CSV tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use squeeze_core::commands::{self, SweepParameter};
use squeeze_core::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "squeeze-sim",
    version,
    about = "Quantum-trajectory simulation and analytic prediction of spin squeezing \
             by optical phase-shift measurement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory for the CSV tables.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Override the master seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Override the photon number.
    #[arg(long, value_name = "N")]
    photons: Option<u64>,
    /// Override the history count.
    #[arg(long, value_name = "N")]
    histories: Option<usize>,
    /// Override the recording cadence.
    #[arg(long, value_name = "N")]
    record_every: Option<usize>,
    /// Override the detection grid with approximately this many cells
    /// (rounded to a 1:2 latitude/longitude split).
    #[arg(long, value_name = "N")]
    grid_cells: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single quantum-jump history.
    Trajectory(Common),
    /// Run independent histories and aggregate their statistics.
    Ensemble(Common),
    /// Evaluate every closed-form prediction at the configured point.
    Predict(Common),
    /// Run the dense-cloud Fourier-mode model.
    Dense(Common),
    /// Tabulate the squeezing curves against one swept parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Which parameter to sweep: photons, f or theta0.
        #[arg(long, value_name = "NAME")]
        parameter: String,
        /// Sweep range as LO:HI:STEPS.
        #[arg(long, value_name = "LO:HI:STEPS")]
        range: String,
        /// Space the sweep points logarithmically.
        #[arg(long)]
        log: bool,
    },
}

fn load(common: &Common) -> squeeze_core::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(photons) = common.photons {
        config.n_photons = photons;
    }
    if let Some(histories) = common.histories {
        config.n_histories = histories;
    }
    if let Some(every) = common.record_every {
        config.record_every = every;
    }
    if let Some(cells) = common.grid_cells {
        let n_theta = ((cells as f64 / 2.0).sqrt().floor() as usize).max(1);
        config.grid.n_theta = Some(n_theta);
        config.grid.n_phi = Some((cells / n_theta).max(1));
    }
    config.validate()?;
    Ok(config)
}

fn parse_range(text: &str) -> squeeze_core::Result<(f64, f64, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    let parse = |s: &str| -> Option<f64> { s.parse().ok() };
    if let [lo, hi, steps] = parts[..] {
        if let (Some(lo), Some(hi), Ok(steps)) = (parse(lo), parse(hi), steps.parse()) {
            return Ok((lo, hi, steps));
        }
    }
    Err(squeeze_core::Error::Domain(format!(
        "range must be LO:HI:STEPS, got `{text}`"
    )))
}

fn run(cli: Cli) -> squeeze_core::Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Trajectory(common) => commands::cmd_trajectory(&load(common)?, &common.out),
        Command::Ensemble(common) => commands::cmd_ensemble(&load(common)?, &common.out),
        Command::Predict(common) => commands::cmd_predict(&load(common)?, &common.out),
        Command::Dense(common) => commands::cmd_dense(&load(common)?, &common.out),
        Command::Sweep {
            common,
            parameter,
            range,
            log,
        } => {
            let (lo, hi, steps) = parse_range(range)?;
            commands::cmd_sweep(
                &load(common)?,
                SweepParameter::parse(parameter)?,
                lo,
                hi,
                steps,
                *log,
                &common.out,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for path in paths {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let payload = serde_json::json!({ "error": err.to_string() });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
