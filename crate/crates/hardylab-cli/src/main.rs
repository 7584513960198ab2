mod args;
mod commands;
mod config;
mod error;
mod store;
mod table;

use std::io::Write;

use clap::Parser;

use args::{Cli, Format};
use error::CliError;
use store::{run_id, RunRecord, Store, TOOL_VERSION};

const DEFAULT_TOL: f64 = 1e-11;

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hardylab: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let cfg = match &cli.config {
        Some(p) => config::load(p)?,
        None => config::Config::default(),
    };
    let tol = cli.tol.or(cfg.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
    }
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let store = if cli.no_store { None } else { cli.store.clone().or(cfg.store).map(Store::new) };

    let plan = commands::plan(&cli.command, tol);
    let id = run_id(plan.name, &plan.params);
    let cached = match &store {
        Some(s) => s.lookup(&id)?,
        None => None,
    };
    let rec = match cached {
        Some(rec) => rec,
        None => {
            let out = commands::execute(&cli.command, tol)?;
            let rec = RunRecord {
                id,
                timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                command: plan.name.into(),
                params: plan.params,
                outputs: out.json,
                csv: Some(out.table.to_csv()),
                exit_code: out.exit_code,
                version: TOOL_VERSION.into(),
            };
            match &store {
                Some(s) => s.append(rec)?,
                None => rec,
            }
        }
    };

    let text = match cli.format.unwrap_or(plan.default_format) {
        Format::Json => {
            let mut t = serde_json::to_string_pretty(&rec.outputs).expect("outputs serialize");
            t.push('\n');
            t
        }
        Format::Csv => rec.csv.clone().unwrap_or_default(),
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    Ok(rec.exit_code)
}
