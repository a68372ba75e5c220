use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use opengp_cli::config::{load_config, Mode};
use opengp_cli::experiment::{run_analyze, run_experiment, AnalyzeArgs};
use opengp_cli::CliError;

/// Genetic-programming experiment harness.
#[derive(Parser)]
#[command(name = "opengp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded experiment from a config file and write CSV reports.
    Run {
        /// Experiment config (`key = value` lines; see the README).
        #[arg(long)]
        config: PathBuf,
        /// Override the configured mode.
        #[arg(long, value_parser = ["monolithic", "open", "both"])]
        mode: Option<String>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze saved trees (one s-expression per line) without evolving.
    Analyze {
        /// File of trees to analyze.
        #[arg(long)]
        trees: PathBuf,
        /// Seed of the sextic suite the trees are scored against.
        #[arg(long = "suite-seed")]
        suite_seed: u64,
        /// Number of suite cases.
        #[arg(long, default_value_t = 48)]
        n_cases: usize,
        /// Emit the per-tree entropy table.
        #[arg(long)]
        entropy: bool,
        /// Emit silence-by-depth statistics from sampled mutations.
        #[arg(long)]
        fdp: bool,
        /// Mutation trials per depth bin for --fdp.
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, mode, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(mode) = mode {
                let mode = Mode::parse(&mode).expect("clap restricted the values");
                if mode.runs_open() && cfg.organism.is_none() {
                    return Err(CliError::Config(format!(
                        "config key `member_count`: required when mode = {} \
                         (requested on the command line)",
                        mode.as_str()
                    )));
                }
                cfg.mode = mode;
            }
            if let Some(seed) = seed {
                // The suite seed follows unless the config pinned it apart.
                if cfg.suite_seed == cfg.gp.seed {
                    cfg.suite_seed = seed;
                }
                cfg.gp.seed = seed;
            }
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let files = run_experiment(&cfg)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Analyze { trees, suite_seed, n_cases, entropy, fdp, trials } => {
            let args = AnalyzeArgs {
                trees_path: trees,
                suite_seed,
                n_cases,
                entropy,
                fdp,
                trials_per_bin: trials,
            };
            run_analyze(&args, &mut std::io::stdout())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
