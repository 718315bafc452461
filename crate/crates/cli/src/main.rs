use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fiberdim_cli::config::Config;
use fiberdim_cli::experiments::{self, REGISTRY};
use fiberdim_cli::output;

/// Runs configured fiberdim experiments.
#[derive(Debug, Parser)]
#[command(name = "fiberdim", version)]
struct Cli {
    /// List registered experiments.
    #[arg(long)]
    list: bool,
    /// Validate a config file without running it.
    #[arg(long, value_name = "CONFIG")]
    validate: Option<PathBuf>,
    /// Output directory (overrides the config's "out").
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// `run <config>`.
    #[arg(num_args = 0..=2)]
    command: Vec<String>,
}

const USAGE: u8 = 2;

fn load(path: &PathBuf) -> Result<Config, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Config::parse(&text).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    if cli.list {
        for (name, about) in REGISTRY {
            println!("{name:18} {about}");
        }
        return ExitCode::SUCCESS;
    }
    if let Some(path) = &cli.validate {
        return match load(path).and_then(|c| experiments::validate(&c).map_err(|e| e.to_string())) {
            Ok(()) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(USAGE)
            }
        };
    }
    let path = match cli.command.as_slice() {
        [cmd, path] if cmd == "run" => PathBuf::from(path),
        _ => {
            eprintln!("usage: fiberdim run <config.json> [--out DIR] | --list | --validate <config.json>");
            return ExitCode::from(USAGE);
        }
    };
    let cfg = match load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let outcome = match experiments::run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let dir = cli
        .out
        .or_else(|| cfg.out_dir().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.experiment));
    match output::write_outputs(&dir, &outcome.result, &outcome.csv, &outcome.svg) {
        Ok(files) => {
            for c in outcome.result["checks"].as_array().into_iter().flatten() {
                let mark = if c["pass"] == true { "PASS" } else { "FAIL" };
                println!("{mark} {}", c["name"].as_str().unwrap_or(""));
            }
            let digest = output::digest(&output::json_bytes(&outcome.result));
            println!("wrote {} files to {} (result digest {digest:016x})", files.len(), dir.display());
        }
        Err(e) => {
            eprintln!("error: cannot write outputs to {}: {e}", dir.display());
            return ExitCode::from(USAGE);
        }
    }
    if outcome.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
