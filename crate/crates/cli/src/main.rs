use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use assistgame_core::game::MIN_SAMPLES;
use assistgame_core::harness::{self, ExperimentConfig};
use assistgame_core::{BivariateBelief, Error};
use clap::{Args, Parser, Subcommand};

/// Assistance and shutdown game experiments.
#[derive(Debug, Parser)]
#[command(name = "assistgame", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Small settings for a fast smoke run.
    #[arg(long, global = true)]
    quick: bool,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decision shares of MAP, Laplace and EP over simulated games.
    Fig9,
    /// Posterior fit of the eight-preference example.
    Example2,
    /// Two-utility recovery from choices.
    Example3,
    /// Shutdown desiderata, multi-task failure and the skewed dataset.
    ShutdownDemo,
    /// Honest against flipped preference messages.
    HonestMessage,
    /// Closed-form payoffs against Monte Carlo for one belief.
    PayoffOracle(OracleArgs),
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, allow_hyphen_values = true)]
    mu_x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu_o: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    k_xx: f64,
    #[arg(long, default_value_t = 1.0)]
    k_oo: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    k_xo: f64,
    /// Human noise; the config's sigma when unset.
    #[arg(long)]
    sigma: Option<f64>,
    /// Semiorder band width.
    #[arg(long)]
    band: Option<f64>,
    /// Imprecision penalty; half the band when unset.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.into())
        } else {
            Failure::Config(e.into())
        }
    }
}

fn load_config(c: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => harness::parse_config(p)
            .with_context(|| format!("reading config {}", p.display()))
            .map_err(Failure::Config)?,
        None => ExperimentConfig::default(),
    };
    if c.quick {
        cfg = cfg.quick();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.common)?;
    let out = cfg.out.clone();
    match cli.command {
        Command::Fig9 => {
            let r = harness::run_fig9_to(&cfg, &out)?;
            print!("{}", r.summary_text());
        }
        Command::Example2 => {
            let r = harness::run_example2_to(&cfg, &out)?;
            print!("{}", r.summary_text());
        }
        Command::Example3 => {
            let r = harness::run_example3_to(&cfg, &out)?;
            print!("{}", r.summary_text());
        }
        Command::ShutdownDemo => {
            let r = harness::run_shutdown_demo_to(&cfg, &out)?;
            print!("{}", r.to_text());
        }
        Command::HonestMessage => {
            let r = harness::run_honest_to(&cfg, &out)?;
            print!("{}", harness::honest_summary(&r));
        }
        Command::PayoffOracle(a) => {
            let belief = match (a.mu_x, a.mu_o) {
                (Some(mx), Some(mo)) => BivariateBelief::new(mx, mo, a.k_xx, a.k_oo, a.k_xo)?,
                (None, None) => harness::random_belief(cfg.seed),
                _ => {
                    return Err(Failure::Config(anyhow::anyhow!("give both --mu-x and --mu-o or neither")));
                }
            };
            let sigma = a.sigma.unwrap_or(cfg.sigma);
            let band = a.band.map(|b| (b, a.epsilon.unwrap_or(b / 2.0)));
            let n = a.samples.unwrap_or(cfg.oracle_samples).max(MIN_SAMPLES);
            let r = harness::run_payoff_oracle(&belief, sigma, band, n, cfg.seed)?;
            println!("belief = {} {} {} {} {}", belief.mu_x, belief.mu_o, belief.k_xx, belief.k_oo, belief.k_xo);
            print!("{}", r.to_text());
            println!("max_z = {:.2}", r.max_z());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors; help and version are not errors
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(2)
        }
    }
}
