use std::process::ExitCode;

use anderson_corr_cli::{run, Cli, RunConfig};
use anyhow::{Context, Result};
use clap::Parser;

fn configure_threads(cfg: &RunConfig) -> Result<()> {
    if let Some(n) = cfg.thread_count()? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("cannot start the thread pool")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let prepared = RunConfig::from_cli(&cli).and_then(|cfg| {
        let plan = cfg.resolve()?;
        configure_threads(&cfg)?;
        Ok((cfg, plan))
    });
    let (cfg, plan) = match prepared {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if cli.emit_config {
        println!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    match run(&cfg, &plan) {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
