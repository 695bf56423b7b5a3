use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use approx_thompson::divergence::DivergenceQuery;
use approx_thompson::experiment::output::{write_bound_csv, write_divergence_csv, write_experiment};
use approx_thompson::experiment::{run_experiment, ExperimentConfig, Overrides};
use approx_thompson::theory::{emit_bound_curves, CurveSet};
use approx_thompson::validation::run_validation_suite;
use approx_thompson::Result;

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Thompson sampling with approximate posteriors: simulations, bound tables
/// and divergence checks.
#[derive(Debug, Parser)]
#[command(name = "approx-thompson", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment config and write its regret table.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        /// Regret table path; metadata and dumps are written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Also write per-replication cumulative regret.
        #[arg(long)]
        dump_trajectories: bool,
    },
    /// Tabulate bound curves: `fig5`, `fig6`, or a curve-set TOML file.
    Theory {
        spec: String,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a divergence query TOML file.
    Divergence {
        spec: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite.
    Validate,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { EXIT_NUMERIC } else { EXIT_VALIDATION })
        }
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run {
            config,
            seed,
            reps,
            out,
            threads,
            dump_trajectories,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(&Overrides {
                seed,
                replications: reps,
                output: out,
                threads,
                dump_trajectories,
            });
            let result = run_experiment(&cfg)?;
            for path in write_experiment(&cfg.output_path(), &result)? {
                eprintln!("wrote {}", path.display());
            }
            for curve in &result.curves {
                eprintln!(
                    "{}: final mean regret {:.4} ± {:.4}",
                    curve.policy,
                    curve.final_mean(),
                    curve.final_ci()
                );
            }
        }
        Command::Theory { spec, out } => {
            let set = match CurveSet::preset(&spec) {
                Some(set) => set,
                None => toml::from_str(&std::fs::read_to_string(&spec)?)?,
            };
            write_bound_csv(sink(out.as_deref())?, &emit_bound_curves(&set)?)?;
        }
        Command::Divergence { spec, out } => {
            let query = DivergenceQuery::from_toml_str(&std::fs::read_to_string(&spec)?)?;
            write_divergence_csv(sink(out.as_deref())?, &query.evaluate()?)?;
        }
        Command::Validate => {
            let outcomes = run_validation_suite()?;
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            for outcome in &outcomes {
                println!("{outcome}");
            }
            println!("{} checks, {failed} failed", outcomes.len());
            if failed > 0 {
                return Ok(ExitCode::from(EXIT_VALIDATION));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

