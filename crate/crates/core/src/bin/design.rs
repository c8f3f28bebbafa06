use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use glm_optdesign::cli::{execute_text, EXIT_CONFIG};

/// Construct, optimize, verify or scan a locally optimal GLM design.
#[derive(Parser, Debug)]
#[command(name = "design", version)]
struct Args {
    /// Job configuration (JSON).
    #[arg(long)]
    config: PathBuf,

    /// Override a config entry, e.g. `--set model.beta=[0,1]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output file; required for scans.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fail(message: String) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": "config", "message": message }));
    ExitCode::from(EXIT_CONFIG as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(format!("cannot read {}: {e}", args.config.display())),
    };
    let outcome = execute_text(&text, &args.set);

    if let Some(err) = &outcome.stderr {
        eprintln!("{err}");
    }
    if let Some(doc) = &outcome.stdout {
        println!("{doc}");
        if let Some(path) = &args.out {
            if let Err(e) = std::fs::write(path, format!("{doc}\n")) {
                return fail(format!("cannot write {}: {e}", path.display()));
            }
        }
    }
    if let Some(csv) = &outcome.csv {
        let Some(path) = &args.out else {
            return fail("scan output needs --out".into());
        };
        if let Err(e) = std::fs::write(path, csv) {
            return fail(format!("cannot write {}: {e}", path.display()));
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}
