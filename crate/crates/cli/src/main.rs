use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ptrack::{frames_csv, run_batch, synth_frames, write_outputs, CliError, RunConfig};
use ptrack_core::tracker::TrackerMode;

/// Passive target tracking with an unknown transmitter: Monte Carlo runner.
#[derive(Debug, Parser)]
#[command(name = "ptrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo batch and write CSV outputs.
    Run(Overrides),
    /// Print the built-in scenario as a config file.
    Scenario(Overrides),
    /// Write the measurement frames of one run as CSV.
    Synth {
        #[command(flatten)]
        overrides: Overrides,
        /// Run index whose frames are emitted.
        #[arg(long, default_value_t = 0)]
        run: u64,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    /// Config file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// full | simplified1 | simplified2 | tx-only
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (`synth`: output file; stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of time steps.
    #[arg(long)]
    steps: Option<usize>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(m) = &self.mode {
            cfg.mode = m.parse::<TrackerMode>().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(n) = self.steps {
            cfg.scenario.n_steps = n;
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(o) => {
            let mut cfg = o.resolve()?;
            if let Some(out) = &o.out {
                cfg.out_dir = out.clone();
            }
            cfg.validate()?;
            let batch = run_batch(&cfg)?;
            write_outputs(&cfg, &batch, &cfg.out_dir)
        }
        Command::Scenario(o) => {
            let cfg = o.resolve()?;
            cfg.validate()?;
            print!("{cfg}");
            Ok(())
        }
        Command::Synth { overrides, run } => {
            let cfg = overrides.resolve()?;
            let csv = frames_csv(&synth_frames(&cfg, run)?);
            match &overrides.out {
                Some(path) => fs::write(path, csv).map_err(|e| CliError::io(path, e)),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ptrack: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
