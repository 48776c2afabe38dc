use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ncgossip_cli::{config, formats, run, Command, RunError, THREADS_ENV};

/// Algebraic gossip experiment runner.
#[derive(Parser, Debug)]
#[command(name = "ncgossip", version)]
struct Cli {
    /// Subcommand to run.
    #[arg(value_enum, required_unless_present = "schema")]
    command: Option<Command>,
    /// TOML run configuration.
    #[arg(required_unless_present = "schema")]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set gossip.k=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (default: $NCGOSSIP_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Print the output file columns and exit.
    #[arg(long)]
    schema: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.schema {
        print!("{}", formats::SCHEMA);
        return ExitCode::SUCCESS;
    }
    let (Some(command), Some(path)) = (cli.command, cli.config) else {
        unreachable!("clap enforces both arguments");
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0);
    let code = match config::load(&path, &cli.overrides) {
        Err(e) => {
            eprintln!("config error: {e:#}");
            2
        }
        Ok((cfg, tree)) => {
            let base = path.parent().map(PathBuf::from).unwrap_or_default();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
            let result = match pool {
                Ok(pool) => pool.install(|| run(command, &cfg, &tree, &base)),
                Err(e) => Err(RunError::Io(e.into())),
            };
            match result {
                Ok(report) => {
                    if report.timeouts > 0 {
                        eprintln!("{} trial(s) timed out; outputs written", report.timeouts);
                    }
                    report.exit_code()
                }
                Err(e) => {
                    eprintln!("{e}");
                    e.exit_code()
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
