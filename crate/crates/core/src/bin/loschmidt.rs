use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use loschmidt::experiment::{emit_figures, run_in_directory, validate_config, ExperimentConfig, ExperimentResult};
use loschmidt::{Error, Result};

/// Fidelity saturation experiments on random and kicked-top maps.
#[derive(Parser)]
#[command(name = "loschmidt", version)]
struct Cli {
    /// Worker threads; overrides the config.
    #[arg(long, global = true, value_name = "K")]
    workers: Option<usize>,
    /// Continue a run in an existing output directory instead of refusing.
    #[arg(long, global = true)]
    resume: bool,
    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "PATH")]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file.
    Run { config: PathBuf },
    /// Render figures from a finished run (results.json, results.csv or their directory).
    Figures { result: PathBuf },
    /// Check a config file and print it with defaults filled in.
    Validate { config: PathBuf },
}

fn load_config(path: &Path, cli: &Cli) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    let mut cfg = validate_config(&text)?;
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Semantic("--workers must be positive".into()));
        }
        cfg.workers = w;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate { config } => {
            let cfg = load_config(config, cli)?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            println!("output_dir = {}", cfg.output_dir.display());
            println!("workers = {}", cfg.workers);
            println!("config_hash = {}", cfg.hash());
        }
        Command::Run { config } => {
            let cfg = load_config(config, cli)?;
            let result = run_in_directory(&cfg, cli.resume)?;
            println!("rows = {}", result.rows.len());
            for fit in &result.fits {
                println!("fit = {}", serde_json::to_string(fit)?);
            }
            if let Some(r) = &result.ratio {
                println!("ratio = {}", serde_json::to_string(r)?);
            }
            for f in &result.floor_checks {
                println!("floor = {}", serde_json::to_string(f)?);
            }
            for note in &result.notes {
                println!("note = {note}");
            }
            println!("output_dir = {}", cfg.output_dir.display());
        }
        Command::Figures { result } => {
            let res = ExperimentResult::load(result)?;
            let dir = match &cli.output_dir {
                Some(d) => d.clone(),
                None if result.is_dir() => result.clone(),
                None => result.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            for path in emit_figures(&res, &dir)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
