//! `dunes`: experiments for wind-driven dune evolution on a periodic domain.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 on
//! any error.

mod commands;
mod config;
mod output;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use output::{Check, Outputs};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "dunes", version, about = "Two-scale dune evolution experiments")]
struct Cli {
    /// TOML experiment file; every block is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Comma-separated ε values, overriding `sweep.eps`.
    #[arg(long, global = true, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    /// Seed of the random initial state, overriding `initial.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the structural hypotheses of the configured flux closure.
    Validate {
        #[arg(long, default_value_t = 4000)]
        samples: usize,
    },
    /// Nondimensionalize the tabulated regimes and compare with reported constants.
    Scale {
        /// Every preset, even when the config names one.
        #[arg(long)]
        all: bool,
    },
    /// Integrate the parabolic model on the torus.
    Solve,
    /// Solve the periodic cell problem at one slow time.
    Cell,
    /// Compare the ε-dependent solution with its two-scale limit.
    Homogenize,
    /// Solve the first-order corrector and check the O(ε) error scaling.
    Corrector,
    /// Fit ε-exponents of the a priori norms.
    Estimate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Scale { .. } => "scale",
            Command::Solve => "solve",
            Command::Cell => "cell",
            Command::Homogenize => "homogenize",
            Command::Corrector => "corrector",
            Command::Estimate => "estimate",
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &cli.out {
        cfg.output.dir = d.clone();
    }
    if let Some(e) = &cli.eps_list {
        cfg.sweep.eps = e.clone();
    }
    if let Some(s) = cli.seed {
        cfg.initial.seed = s;
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Vec<Check>> {
    let cfg = load(cli)?;
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    let out = Outputs::open(&cfg.output.dir)?;
    out.log(&format!("dunes {} {}", env!("CARGO_PKG_VERSION"), cli.command.name()));
    out.text("config.toml", &cfg.to_toml()?)?;
    let checks = match &cli.command {
        Command::Validate { samples } => commands::validate(&cfg, &out, *samples),
        Command::Scale { all } => commands::scale(&cfg, &out, *all),
        Command::Solve => commands::solve(&cfg, &out),
        Command::Cell => commands::cell(&cfg, &out),
        Command::Homogenize => commands::homogenize(&cfg, &out),
        Command::Corrector => commands::corrector(&cfg, &out),
        Command::Estimate => commands::estimate(&cfg, &out),
    };
    let checks = match checks {
        Ok(c) => c,
        Err(e) => {
            out.log(&format!("error: {e:#}"));
            return Err(e);
        }
    };
    out.json("checks.json", &checks)?;
    for c in &checks {
        out.log(&format!("{} {}", if c.passed { "pass" } else { "FAIL" }, c.name));
    }
    out.log("done");
    Ok(checks)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(checks) => {
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failing checks: {}", failed.join(", "));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
