use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use treespan::experiment::{
    compare_policies, load_config, load_instance, load_summary, run_experiment, solve_instance,
    write_comparison, ExperimentError, Switch,
};
use treespan::sim::OptimizerKind;

#[derive(Parser)]
#[command(
    name = "treespan",
    version,
    about = "Sensor network lifetime experiments over load-balanced routing trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated experiment and write traces and summaries.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config and runs this optimizer as the only policy.
        #[arg(long, value_enum)]
        optimizer: Option<OptimizerKind>,
        /// Overrides the config and runs with energy thresholds on or off.
        #[arg(long, value_enum)]
        thresholds: Option<Switch>,
        /// Base seed; replicate r uses seed + r.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of replicates run concurrently.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compare policies from one or more summary.json files against the
    /// first policy found.
    Compare {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
        /// Write the comparison CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a small instance exactly by enumerating all trees.
    Oracle {
        #[arg(long)]
        nodes: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run {
            config,
            optimizer,
            thresholds,
            seed,
            out,
            jobs,
        } => {
            let mut cfg = load_config(&config)?;
            if optimizer.is_some() || thresholds.is_some() {
                cfg.policies = None;
            }
            if let Some(o) = optimizer {
                cfg.optimizer = o;
            }
            if let Some(t) = thresholds {
                cfg.thresholds = t;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if jobs == Some(0) {
                return Err(ExperimentError::Invalid {
                    key: "jobs".into(),
                    reason: "must be >= 1".into(),
                });
            }
            cfg.validate()?;
            let summary = run_experiment(&cfg, jobs)?;
            for r in &summary.rows {
                eprintln!(
                    "{} n={}: dead {} energy {} J delay {} ms pdr {}",
                    r.policy,
                    r.node_count,
                    r.dead.mean,
                    r.energy_j.mean,
                    r.delay_ms.mean,
                    r.pdr.mean
                );
            }
            eprintln!("wrote {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Compare { summaries, out } => {
            let loaded = summaries
                .iter()
                .map(|p| load_summary(p))
                .collect::<Result<Vec<_>, _>>()?;
            let rows = compare_policies(&loaded)?;
            let write_err = |path: PathBuf, e: csv::Error| ExperimentError::Write {
                path,
                source: io::Error::other(e),
            };
            match out {
                Some(path) => {
                    let f =
                        std::fs::File::create(&path).map_err(|source| ExperimentError::Write {
                            path: path.clone(),
                            source,
                        })?;
                    write_comparison(&rows, f).map_err(|e| write_err(path, e))
                }
                None => write_comparison(&rows, io::stdout().lock())
                    .map_err(|e| write_err("stdout".into(), e)),
            }
        }
        Command::Oracle { nodes } => {
            let inst = load_instance(&nodes)?;
            let report = solve_instance(&inst)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
