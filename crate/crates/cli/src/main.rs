use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fieldlab_cli::{list_experiments_json, list_experiments_text, resolve_out_dir, run_experiment, ExperimentConfig, RunError};

#[derive(Parser)]
#[command(name = "fieldlab", version, about = "Run registered fieldlab experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        /// Config file; may be omitted when `--set experiment=<name>` is given.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a parameter, `seed` or `experiment` (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the report to stdout as well.
        #[arg(long)]
        print: bool,
    },
    /// List registered experiments with their parameter schemas.
    List {
        #[arg(long)]
        json: bool,
    },
}

fn run(config: Option<PathBuf>, overrides: &[String], out: Option<PathBuf>, print: bool) -> Result<bool, RunError> {
    let mut cfg = match &config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| RunError::Usage(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::new("", 0),
    };
    for o in overrides {
        cfg.apply_override(o)?;
    }
    if cfg.experiment.is_empty() {
        return Err(RunError::Usage("no experiment given; pass --config or --set experiment=<name>".into()));
    }
    let outcome = run_experiment(&cfg)?;
    let dir = resolve_out_dir(out, &cfg);
    outcome.write(&dir)?;
    let r = &outcome.report;
    if print {
        print!("{}", r.to_json());
    }
    for v in &r.verdicts {
        eprintln!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    eprintln!("{}: {} (output in {})", r.experiment, if r.passed { "passed" } else { "failed" }, dir.display());
    Ok(r.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(&list_experiments_json()).expect("listing serializes"));
            } else {
                print!("{}", list_experiments_text());
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, overrides, out, print } => match run(config, &overrides, out, print) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(e) => {
                eprintln!("fieldlab: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
