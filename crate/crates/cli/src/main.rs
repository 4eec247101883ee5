//! `dgmg`: contraction tables, convergence studies, eigenvalue reports and
//! identity checks for the DG optimal control multigrid solver.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dgmg::experiment::{self, ExperimentConfig, OutputFormat};
use dgmg::{CycleKind, Domain, PropertySuite, Variant};

#[derive(Parser)]
#[command(name = "dgmg", version, about)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure a contraction table (rows k, columns m).
    Table(Common),
    /// Manufactured-solution convergence study with direct solves.
    Converge(Common),
    /// Extreme eigenvalue estimates of the preconditioned normal operator.
    Eigs(Common),
    /// Run the identity suite and report pass/fail per identity.
    Props(PropsArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// `key = value` configuration file; flags override its entries.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// unit_square (square) or l_shaped.
    #[arg(long)]
    domain: Option<Domain>,

    /// Regularization parameter; repeat for several values.
    #[arg(long = "beta", value_name = "BETA")]
    betas: Vec<f64>,

    /// Finest level.
    #[arg(long)]
    levels: Option<usize>,

    /// Smoothing steps m1 = m2 = m; repeat for several values.
    #[arg(long = "m", value_name = "M")]
    m_values: Vec<usize>,

    /// w or v.
    #[arg(long)]
    cycle: Option<CycleKind>,

    /// primal or dual.
    #[arg(long)]
    variant: Option<Variant>,

    /// Interior penalty parameter.
    #[arg(long)]
    sigma: Option<f64>,

    #[arg(long)]
    seed: Option<u64>,

    /// Write the result here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// table or csv.
    #[arg(long)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct PropsArgs {
    #[command(flatten)]
    common: Common,

    /// Random inputs per identity, level and beta.
    #[arg(long, default_value_t = 20)]
    samples: usize,

    /// Relative tolerance.
    #[arg(long, default_value_t = 1e-11)]
    tol: f64,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(d) = self.domain {
            cfg.domain = d;
        }
        if !self.betas.is_empty() {
            cfg.betas = self.betas.clone();
        }
        if let Some(l) = self.levels {
            cfg.levels = l;
        }
        if !self.m_values.is_empty() {
            cfg.m_values = self.m_values.clone();
        }
        if let Some(c) = self.cycle {
            cfg.cycle = c;
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(s) = self.sigma {
            cfg.sigma = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(cfg: &ExperimentConfig, text: &str) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run_table(args: &Common) -> Result<()> {
    let cfg = args.resolve()?;
    let table = experiment::run_table(&cfg)?;
    emit(&cfg, &table.render(cfg.format))
}

fn run_converge(args: &Common) -> Result<()> {
    let cfg = args.resolve()?;
    let mut text = String::new();
    for &beta in &cfg.betas {
        let study = experiment::convergence_study_with(
            cfg.domain,
            beta,
            cfg.sigma,
            cfg.levels,
            &experiment::Manufactured::sine_product(beta),
        )?
        .0;
        text.push_str(&match cfg.format {
            OutputFormat::Table => study.to_text(),
            OutputFormat::Csv => study.to_csv(),
        });
    }
    emit(&cfg, &text)
}

fn run_eigs(args: &Common) -> Result<()> {
    let cfg = args.resolve()?;
    let report = experiment::eigen_report(&cfg)?;
    emit(&cfg, &report.render(cfg.format))
}

fn run_props(args: &PropsArgs) -> Result<bool> {
    let mut suite = PropertySuite {
        samples: args.samples,
        tolerance: args.tol,
        ..PropertySuite::default()
    };
    let c = &args.common;
    if c.config.is_some() {
        let cfg = c.resolve()?;
        suite.domain = cfg.domain;
        suite.betas = cfg.betas;
        suite.levels = (1..=cfg.levels).collect();
        suite.sigma = cfg.sigma;
        suite.seed = cfg.seed;
    }
    if let Some(d) = c.domain {
        suite.domain = d;
    }
    if !c.betas.is_empty() {
        suite.betas = c.betas.clone();
    }
    if let Some(l) = c.levels {
        suite.levels = (1..=l).collect();
    }
    if let Some(s) = c.sigma {
        suite.sigma = s;
    }
    if let Some(s) = c.seed {
        suite.seed = s;
    }
    if !c.m_values.is_empty() || c.cycle.is_some() || c.variant.is_some() || c.format.is_some() {
        bail!("props accepts --domain, --beta, --levels, --sigma, --seed, --out, --samples and --tol");
    }
    let reports = suite.run()?;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&format!("{r}\n"));
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    text.push_str(&format!("{} of {} identities passed\n", reports.len() - failed, reports.len()));
    let cfg = ExperimentConfig {
        output: c.out.clone(),
        ..ExperimentConfig::default()
    };
    emit(&cfg, &text)?;
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Table(a) => run_table(a).map(|_| true),
        Command::Converge(a) => run_converge(a).map(|_| true),
        Command::Eigs(a) => run_eigs(a).map(|_| true),
        Command::Props(a) => run_props(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
