use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use costlab_cli::inputs::{export, generate, parse_params};
use costlab_cli::{run, write_run, Scenario};

#[derive(Parser)]
#[command(name = "costlab", version, about = "Run cost-function scenarios with exact ledgers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run scenarios and write one directory per run.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// Validate scenario descriptors without running them.
    Check {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Write a seeded input file: universe, trace, real, requests or halting.
    Generate {
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        horizon: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Generator parameters as key=value.
        params: Vec<String>,
    },
    /// Convert a trace file to an event CSV, or to its ledger CSV under a cost.
    Export {
        trace: PathBuf,
        #[arg(long)]
        cost: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn real_main(cli: Cli) -> Result<bool, String> {
    match cli.cmd {
        Cmd::Run { scenarios, seed, horizon, out_dir } => {
            let mut all = true;
            for path in scenarios {
                let mut sc = Scenario::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                if let Some(s) = seed {
                    sc = sc.with_seed(s);
                }
                if let Some(h) = horizon {
                    sc = sc.with_horizon(h);
                }
                let start = Instant::now();
                let outcome = run(&sc).map_err(|e| format!("{}: {e}", path.display()))?;
                let dir = write_run(&out_dir, &sc, &outcome).map_err(|e| e.to_string())?;
                print!("{}", outcome.summary(&sc));
                eprintln!("wrote {} in {:.2?}", dir.display(), start.elapsed());
                all &= outcome.passed();
            }
            Ok(all)
        }
        Cmd::Check { scenarios } => {
            for path in scenarios {
                let sc = Scenario::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                println!("ok {} ({})", path.display(), sc.kind.name());
            }
            Ok(true)
        }
        Cmd::Generate { kind, seed, horizon, out_dir, params } => {
            let params = parse_params(&params).map_err(|e| e.to_string())?;
            let (name, text) = generate(&kind, seed, horizon.max(1), &params).map_err(|e| e.to_string())?;
            fs::create_dir_all(&out_dir).map_err(|e| e.to_string())?;
            let path = out_dir.join(name);
            fs::write(&path, text).map_err(|e| e.to_string())?;
            println!("{}", path.display());
            Ok(true)
        }
        Cmd::Export { trace, cost, out } => {
            let text = fs::read_to_string(&trace).map_err(|e| format!("{}: {e}", trace.display()))?;
            let csv = export(&text, cost.as_deref()).map_err(|e| format!("{}: {e}", trace.display()))?;
            match out {
                Some(p) => fs::write(&p, csv).map_err(|e| e.to_string())?,
                None => print!("{csv}"),
            }
            Ok(true)
        }
    }
}
