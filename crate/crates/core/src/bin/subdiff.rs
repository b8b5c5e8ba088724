use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use subdiff::scenario::{self, RunOptions, ERROR_EXIT};

/// Scenario runner for subdifferential estimates of integral functionals.
#[derive(Parser)]
#[command(name = "subdiff", version)]
struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the report and CSV tables.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// 0 = errors only, 1 = warnings, 2 = progress, 3 = debug.
    #[arg(long, global = true, default_value_t = 1)]
    verbosity: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run { config: PathBuf },
    /// Print the integrand catalog, optionally filtered by a name substring.
    ListCatalog {
        #[arg(default_value = "")]
        filter: String,
    },
    /// Describe the parameters and certificate of an experiment op.
    Explain { op: Option<String> },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbosity {
        0 => log::LevelFilter::Error,
        1 => log::LevelFilter::Warn,
        2 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match cli.command {
        Command::ListCatalog { filter } => {
            print!("{}", scenario::list_catalog(&filter));
            ExitCode::SUCCESS
        }
        Command::Explain { op: None } => {
            for o in scenario::OPS {
                println!("{:<24} {}", o.name, o.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Explain { op: Some(op) } => match scenario::explain(&op) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(ERROR_EXIT as u8)
            }
        },
        Command::Run { config } => {
            let opts = RunOptions {
                seed: cli.seed,
                out_dir: cli.out_dir,
            };
            match scenario::run(&config, &opts) {
                Ok(out) => {
                    for ex in &out.report.experiments {
                        println!("{:<8} {}  ({})", if ex.pass { "ok" } else { "FAILED" }, ex.id, ex.op);
                        for v in ex.verdicts.iter().filter(|v| !v.pass) {
                            let margin = v.margin.map(|m| format!("{m:e}")).unwrap_or_else(|| "n/a".into());
                            println!("         {} = {} (margin {margin})", v.pointer, v.actual);
                        }
                    }
                    println!("report: {}", out.report_path.display());
                    ExitCode::from(out.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(ERROR_EXIT as u8)
                }
            }
        }
    }
}
