use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use orlicz_var_cli::config::{self, AcceptanceParams, Command, ExperimentConfig};
use orlicz_var_cli::runner::{run_all, EXIT_CONFIG};

#[derive(Parser, Debug)]
#[command(name = "orlicz-var", version, about = "Experiments with fractional Orlicz energies")]
struct Cli {
    /// Must match the `command` of every experiment in the config file.
    command: Command,
    /// JSON file with one experiment or an array of them (optional for acceptance).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides the seed of every experiment.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let configs = match &cli.config {
        Some(path) => match config::load(path) {
            Ok(c) => c,
            Err(e) => return fail(e),
        },
        None if cli.command == Command::Acceptance => vec![ExperimentConfig {
            command: Command::Acceptance,
            params: serde_json::to_value(AcceptanceParams::default()).expect("params serialize"),
            out_dir: None,
            seed: None,
        }],
        None => return fail(format!("{} needs --config", cli.command.name())),
    };
    if let Some(c) = configs.iter().find(|c| c.command != cli.command) {
        return fail(format!(
            "config holds a {} experiment but the command line asks for {}",
            c.command.name(),
            cli.command.name()
        ));
    }
    if cli.jobs == 0 {
        return fail("--jobs must be at least 1");
    }
    let experiments = match config::prepare(configs, &cli.out, cli.seed) {
        Ok(e) => e,
        Err(e) => return fail(e),
    };
    let outcomes = run_all(&experiments, cli.jobs);
    let mut code = 0;
    for (exp, o) in experiments.iter().zip(&outcomes) {
        if experiments.len() > 1 {
            println!("== {}", exp.out_dir.display());
        }
        print!("{}", o.summary);
        code = code.max(o.exit_code);
    }
    ExitCode::from(code)
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_CONFIG)
}
