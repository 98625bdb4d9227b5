use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use regswap::Execution;
use regswap_cli::{run, Cli, ConfigError};

fn execute(cli: &Cli) -> Result<()> {
    let cfg = cli.load_config()?;
    let exec = match cli.workers {
        Some(1) => Execution::Sequential,
        _ => Execution::Parallel,
    };
    let go = || run(cli.command, &cfg, &cli.out, exec);
    let manifest = match cli.workers {
        #[cfg(feature = "parallel")]
        Some(w) if w > 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()?
            .install(go)?,
        Some(0) => return Err(ConfigError("--workers must be positive".into()).into()),
        _ => go()?,
    };
    log::info!(
        "{}: wrote {} files to {}",
        manifest.command,
        manifest.files.len(),
        cli.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
