mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::ExperimentConfig;
use error::CliResult;

/// Self-attention particle dynamics: simulations, metastability checks and the
/// energy staircase.
///
/// Exit codes: 0 all checks pass, 1 a check failed, 2 invalid input, 3 numeric abort.
#[derive(Parser)]
#[command(name = "metastab", version)]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured batch.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (a file path for `sample-init`, optionally for `staircase`).
    #[arg(long, global = true, env = "METASTAB_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads for seed batches; all cores by default.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate SA or USA and write energy traces.
    Simulate,
    /// Certify, simulate and check collapse/escape times for each seed.
    Metastability,
    /// Rescaled dynamics from a well-prepared ladder over a list of beta.
    Staircase {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 0.02)]
        c0: f64,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
        beta_list: Vec<f64>,
        /// Constant in the well-prepared condition.
        #[arg(long, default_value_t = 1.5)]
        c: f64,
        /// Refuse ladders that fail the well-prepared condition.
        #[arg(long)]
        strict: bool,
    },
    /// Transport a separated atomic measure.
    Meanfield,
    /// Write an initial configuration.
    SampleInit {
        #[arg(long, value_parser = ["separated", "gaussian-mixture", "uniform", "well-prepared", "separated-measure"])]
        kind: String,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0.02)]
        eps: f64,
        #[arg(long, default_value_t = 12.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.02)]
        c0: f64,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        #[arg(long, default_value_t = 0.002)]
        sigma: f64,
        #[arg(long, default_value_t = 100)]
        atoms_per_cap: usize,
    },
    /// Numerical checks.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
    },
    /// Long-format CSV for plots.
    FigureData {
        #[arg(long, value_parser = ["trajectory", "staircase"])]
        which: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Gradients,
    Hessian,
    Lemmas,
    Pl,
    Acceptance,
}

fn load_or(path: Option<&Path>, default: fn() -> ExperimentConfig) -> CliResult<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(default()),
    }
}

fn run(cli: Cli) -> CliResult<i32> {
    if let Some(k) = cli.workers {
        if k == 0 {
            return error::invalid("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| error::CliError::Invalid(e.to_string()))?;
    }
    let cfg_path = cli.config.as_deref();
    let out = cli.out.as_path();
    match cli.command {
        Command::Simulate => {
            let cfg = load_or(cfg_path, commands::default_simulate)?;
            commands::simulate(&cfg, &cfg.seeds(cli.seed), out)
        }
        Command::Metastability => {
            let cfg = load_or(cfg_path, commands::default_metastability)?;
            commands::metastability(&cfg, &cfg.seeds(cli.seed), out)
        }
        Command::Staircase { n, c0, beta_list, c, strict } => commands::staircase(n, c0, &beta_list, c, strict, out),
        Command::Meanfield => {
            let cfg = load_or(cfg_path, commands::default_meanfield)?;
            commands::meanfield(&cfg, &cfg.seeds(cli.seed), out)
        }
        Command::SampleInit { kind, dim, n, k, eps, beta, c0, r, sigma, atoms_per_cap } => {
            let a = commands::SampleArgs { kind, dim, n, k, eps, beta, c0, r, sigma, atoms_per_cap };
            commands::sample_init(&a, cli.seed.unwrap_or(0), out)
        }
        Command::Verify { suite } => {
            let name = match suite {
                Suite::Gradients => "gradients",
                Suite::Hessian => "hessian",
                Suite::Lemmas => "lemmas",
                Suite::Pl => "pl",
                Suite::Acceptance => "acceptance",
            };
            commands::verify_suite(name, cli.seed.unwrap_or(1), out)
        }
        Command::FigureData { which } => {
            let cfg = load_or(cfg_path, commands::default_simulate)?;
            commands::figure_data(&which, &cfg, cli.seed.unwrap_or(0), out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
