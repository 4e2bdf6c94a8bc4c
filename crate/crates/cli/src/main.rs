use cavityqed_cli::config::RunConfig;
use cavityqed_cli::events::Log;
use cavityqed_cli::pipeline::{cache_dir, experiment_name, run, Context, RunError};
use clap::{Parser, ValueEnum};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Purcell,
    Dynamics,
    Frames,
}

/// Spontaneous emission and photon exchange in parabolic and ellipsoidal mirrors.
#[derive(Debug, Parser)]
#[command(name = "cavityqed", version)]
struct Args {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Mode cache directory; overrides CAVITYQED_CACHE.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Suppress diagnostics on stderr.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let log = Log { quiet: args.quiet };
    match execute(&args, log) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log.emit("error", json!({ "message": e.to_string(), "exit_code": e.exit_code() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args, log: Log) -> Result<(), RunError> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(RunError::Config(cavityqed_cli::ConfigError::Invalid("--threads must be positive".into())));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Internal(format!("thread pool: {e}")))?;
    }
    let config = RunConfig::from_path(&args.config)?;
    let wanted = match args.command {
        Command::Purcell => "purcell",
        Command::Dynamics => "dynamics",
        Command::Frames => "frames",
    };
    let have = experiment_name(&config.experiment);
    if wanted != have {
        return Err(RunError::Config(cavityqed_cli::ConfigError::Invalid(format!(
            "command `{wanted}` does not match the configured experiment `{have}`"
        ))));
    }
    let ctx = Context::new(&args.out, cache_dir(args.cache.as_deref()), log);
    run(&config, &ctx)?;
    Ok(())
}
