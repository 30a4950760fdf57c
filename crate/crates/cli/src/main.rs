use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optsel_cli::{config, run_study, write_outputs};

#[derive(Parser)]
#[command(name = "optsel", version, about = "Expected-utility-optimal derivative selection studies")]
struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "OPTSEL_THREADS")]
    threads: Option<usize>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study named in the config and write its artifacts.
    Run {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the resolved settings without computing anything.
    Validate {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

const CONFIG_ERROR: u8 = 2;
const NUMERIC_ERROR: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (path, overrides, run) = match &cli.command {
        Command::Run { config, overrides } => (config, overrides, true),
        Command::Validate { config, overrides } => (config, overrides, false),
    };
    let mut cfg = match config::load(path, overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(CONFIG_ERROR);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    if !run {
        print!("{}", config::dump(&cfg));
        return ExitCode::SUCCESS;
    }
    let out = match run_study(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(NUMERIC_ERROR);
        }
    };
    match write_outputs(&cfg.output, &cfg, &out) {
        Ok(files) => {
            for l in &out.summary {
                println!("{l}");
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: cannot write to {}: {e}", cfg.output.display());
            ExitCode::FAILURE
        }
    }
}
