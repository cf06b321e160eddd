//! `pnlab`: command line front end for the layer, corrector, particle,
//! field-evolution and convergence experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pnlab::harness::{self, Battery, BatteryReport, ExperimentConfig, PotentialConfig, StressConfig, SuiteConfig};

#[derive(Parser)]
#[command(name = "pnlab", version, about = "Peierls-Nabarro half-Laplacian laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relax (or evaluate) the layer profile and check its tail.
    Layer(Common),
    /// Solve the corrector equation.
    Corrector(Common),
    /// Integrate the particle system and check the distance bound.
    Particles(Common),
    /// Evolve the rescaled field for the first eps and track its layers.
    Evolve(Common),
    /// Convergence sweep in eps against the particle system.
    Converge(Common),
    /// Run every scenario of a suite file (or the built-in suite).
    Suite {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV and JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `pn` or `fourier`.
    #[arg(long)]
    potential: Option<String>,
    /// PN parameter `a`.
    #[arg(long)]
    a: Option<f64>,
    /// Cosine coefficients of `W''` for the Fourier potential.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coefficients: Option<Vec<f64>>,
    /// Half-width of the layer domain.
    #[arg(long)]
    domain: Option<f64>,
    /// Layer grid points.
    #[arg(long)]
    n: Option<usize>,
    /// Layer residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Use the closed-form PN layer.
    #[arg(long)]
    exact: bool,
    /// Initial positions, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    positions: Option<Vec<f64>>,
    /// Mobility: a number or `from-layer`.
    #[arg(long)]
    gamma: Option<String>,
    /// Uniform applied stress.
    #[arg(long, allow_hyphen_values = true)]
    stress: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Number of sampling intervals (snapshot cadence `t_end / samples`).
    #[arg(long)]
    samples: Option<usize>,
    /// Values of eps, comma separated and strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        match (self.potential.as_deref(), &self.coefficients) {
            (Some("pn"), _) | (None, None) => {
                if self.potential.is_some() || self.a.is_some() {
                    cfg.potential = PotentialConfig::Pn {
                        a: self.a.unwrap_or(1.0),
                    };
                }
            }
            (Some("fourier") | None, Some(c)) => {
                cfg.potential = PotentialConfig::Fourier {
                    coefficients: c.clone(),
                };
            }
            (Some("fourier"), None) => bail!("--potential fourier needs --coefficients"),
            (Some(other), _) => bail!("unknown potential {other:?}"),
        }
        if let Some(v) = self.domain {
            cfg.layer.half_width = v;
        }
        if let Some(v) = self.n {
            cfg.layer.n = v;
        }
        if let Some(v) = self.tol {
            cfg.layer.tol = v;
        }
        cfg.layer.exact |= self.exact;
        if let Some(v) = &self.positions {
            cfg.positions = v.clone();
        }
        match self.gamma.as_deref() {
            None => {}
            Some("from-layer") => cfg.gamma = None,
            Some(v) => cfg.gamma = Some(v.parse().with_context(|| format!("bad --gamma {v:?}"))?),
        }
        if let Some(v) = self.stress {
            cfg.stress = if v == 0.0 {
                StressConfig::Zero
            } else {
                StressConfig::Constant { value: v }
            };
        }
        if let Some(v) = self.t_end {
            cfg.t_end = v;
        }
        if let Some(v) = self.samples {
            cfg.samples = v;
        }
        if let Some(v) = &self.eps {
            cfg.eps = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_report(r: &BatteryReport) {
    for c in &r.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        let op = match c.kind {
            "at_most" => "<=",
            "at_least" => ">=",
            "below" => "<",
            _ => "==",
        };
        println!("{tag} {}/{}: {:.3e} {op} {:.3e}", r.scenario, c.name, c.value, c.limit);
    }
    if let Some(e) = &r.error {
        println!("FAIL {}: {e}", r.scenario);
    }
}

fn battery(kind: Battery, common: &Common) -> Result<bool> {
    let cfg = common.resolve()?;
    let out = common.out.as_deref();
    let report = match kind {
        Battery::Layer => harness::run_layer(&cfg, out),
        Battery::Corrector => harness::run_corrector(&cfg, out),
        Battery::Particles => harness::run_particles(&cfg, out),
        Battery::Evolve => harness::run_evolve(&cfg, out),
        Battery::Converge => harness::run_converge(&cfg, out),
    }?;
    print_report(&report);
    Ok(report.all_pass)
}

fn suite(config: Option<&Path>, out: Option<&Path>) -> Result<bool> {
    let suite = match config {
        Some(path) => SuiteConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => SuiteConfig::default_suite(),
    };
    let summary = harness::run_suite(&suite, out)?;
    for r in &summary.results {
        print_report(r);
    }
    println!("{} passed, {} failed", summary.passed, summary.failed);
    Ok(summary.all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Layer(c) => battery(Battery::Layer, c),
        Command::Corrector(c) => battery(Battery::Corrector, c),
        Command::Particles(c) => battery(Battery::Particles, c),
        Command::Evolve(c) => battery(Battery::Evolve, c),
        Command::Converge(c) => battery(Battery::Converge, c),
        Command::Suite { config, out } => suite(config.as_deref(), out.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
