use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use picard_entropy::experiment::{
    exit_code, run_command, write_outputs, Command, ExperimentConfig, Overrides, EXIT_BOUND_VIOLATION, PRESETS,
};
use picard_entropy::Error;

const DEFAULT_STEPS: usize = 32;

/// Picard iteration, path densities and information estimates for SDE channels.
#[derive(Parser, Debug)]
#[command(name = "picard", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Mean squared sup-distance between successive iterates against the factorial bound.
    Solve(Common),
    /// Divergence of each iterate from the limit and from Wiener measure.
    Kl(Common),
    /// Mutual information along the iteration and its gap to the limit.
    Mi(Common),
    /// Constants and bound curves.
    Bounds(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in channel; overrides the config's preset.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Largest iterate order.
    #[arg(long)]
    n_max: Option<usize>,
    /// Outer Monte Carlo draws.
    #[arg(long)]
    outer: Option<usize>,
    /// Inner message draws per mixture density.
    #[arg(long)]
    inner: Option<usize>,
    /// Grid steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Exit with status 3 when an estimate exceeds its bound by more than 3 stderr.
    #[arg(long)]
    strict: bool,
    /// Also write a JSON mirror of the table.
    #[arg(long)]
    json: bool,
    /// Output directory; the table goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            preset: self.preset.clone(),
            seed: self.seed,
            workers: self.workers,
            n_max: self.n_max,
            outer: self.outer,
            inner: self.inner,
            steps: self.steps,
            strict: self.strict,
            json: self.json,
            out: self.out.clone(),
        }
    }

    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::from_file(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name, DEFAULT_STEPS),
            (None, None) => {
                return Err(Error::Config(format!(
                    "give --config PATH or --preset NAME (presets: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        self.overrides().apply(&mut cfg)?;
        Ok(cfg)
    }
}

fn run(command: Command, args: &Common) -> Result<i32, Error> {
    let cfg = args.config()?;
    let outcome = run_command(command, &cfg)?;
    let written = write_outputs(&outcome, &cfg)?;
    if written.is_empty() {
        if cfg.output.json {
            println!("{}", outcome.table.to_json());
        } else {
            print!("{}", outcome.table.to_csv());
        }
    } else {
        for path in written {
            eprintln!("wrote {}", path.display());
        }
    }
    if outcome.violations > 0 {
        eprintln!("{} row(s) exceed their bound by more than 3 stderr", outcome.violations);
        if cfg.strict {
            return Ok(EXIT_BOUND_VIOLATION);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Kl(a) => (Command::Kl, a),
        Cmd::Mi(a) => (Command::Mi, a),
        Cmd::Bounds(a) => (Command::Bounds, a),
    };
    match run(command, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
