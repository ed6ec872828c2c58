use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use selreg_cli::{audit, bench, prep, report, CliError, CliResult, ExperimentConfig, EXIT_OK, EXIT_PARTIAL};

#[derive(Parser)]
#[command(name = "selreg", version, about = "Selective regression benchmarks and rejection audits")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds; overrides `seeds` in the configuration.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the (dataset x method x coverage x seed) benchmark grid.
    Bench(RunArgs),
    /// Audit a selective model's rejections with Shapley values and shifts.
    Audit(RunArgs),
    /// Summarise a finished run directory.
    Report {
        /// Directory holding a manifest.json.
        dir: PathBuf,
    },
    /// Preprocess a CSV file: one-hot encoding and min-max scaling.
    Prep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        target: String,
        /// Comma-separated columns to treat as categorical.
        #[arg(long, value_delimiter = ',')]
        categorical: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve(args: &RunArgs) -> CliResult<(ExperimentConfig, PathBuf)> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(out) = &args.out {
        config.output_dir = Some(out.clone());
    }
    config.validate()?;
    let out = config
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Validation("no output directory: pass --out or set output_dir".into()))?;
    if args.jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    Ok((config, out))
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Cmd::Bench(args) => {
            let (config, out) = resolve(&args)?;
            let outcome = bench::run_bench(&config, args.jobs)?;
            let manifest = bench::write_bench(&outcome, &config, &out)?;
            println!("{} evaluation rows written to {}", outcome.records.len(), out.display());
            Ok(partial_code(manifest.n_failed_cells()))
        }
        Cmd::Audit(args) => {
            let (config, out) = resolve(&args)?;
            let cells = audit::run_audit(&config, args.jobs)?;
            for cell in &cells {
                match &cell.result {
                    Ok(r) => {
                        let test = r.summary.test_auc.map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
                        println!(
                            "{} seed {}: audit AUC training {:.4}, test {}",
                            cell.dataset, cell.seed, r.summary.training_auc, test
                        );
                    }
                    Err(e) => eprintln!("{} seed {}: {e}", cell.dataset, cell.seed),
                }
            }
            let manifest = audit::write_audit(&cells, &config, &out)?;
            Ok(partial_code(manifest.n_failed_cells()))
        }
        Cmd::Report { dir } => {
            for file in report::run_report(&dir)? {
                println!("{}", dir.join(file).display());
            }
            Ok(EXIT_OK)
        }
        Cmd::Prep {
            input,
            target,
            categorical,
            out,
        } => {
            let n = prep::run_prep(&input, &target, &categorical, &out)?;
            println!("{n} rows written to {}", out.display());
            Ok(EXIT_OK)
        }
    }
}

fn partial_code(failed_cells: usize) -> i32 {
    if failed_cells > 0 {
        eprintln!("{failed_cells} cell(s) failed; see manifest.json");
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = run(cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
