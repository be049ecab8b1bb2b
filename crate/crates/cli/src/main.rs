use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use lrp_cli::acceptance::{run_criterion, suite_report, CRITERIA};
use lrp_cli::commands;
use lrp_cli::config::{ExperimentConfig, OutputFormat, Scale, OUTPUT_DIR_ENV};
use lrp_cli::output::{
    write_error, write_manifest, write_report, write_resolved_config, ErrorRecord, Report, RunManifest, RunStatus,
    DATA_FORMAT_VERSION,
};

/// Monte Carlo lab for long-range percolation on Z^d.
#[derive(Parser)]
#[command(name = "lrp", version)]
struct Cli {
    /// TOML experiment config; built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, overriding run.workers (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, overriding run.output_dir.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Sample one box and write its long edges.
    Sample,
    /// Corner-to-corner distance statistics.
    Distance,
    /// Estimate Lambda(n) = E[D] + 1 at one size.
    Lambda,
    /// Fit the growth exponent over sizes.n_grid.
    Theta,
    /// Compare Lambda(mn) with Lambda(m) Lambda(n).
    Submult,
    /// Exponent against beta over model.betas.
    ThetaVsBeta,
    /// Upper tail of the normalized distance.
    Tail,
    /// Point-to-box and box-to-box quantile bands.
    Quantiles,
    /// Diameter growth over sizes.n_grid.
    Diameter,
    /// Compare two kernel families under a shared coupling.
    CompareKernels,
    /// Check distances under coarsening of a Poisson cloud.
    CouplingCheck,
    /// Connected sets around the origin.
    Consets,
    /// Cut points and separation points on the line.
    Cutpoints,
    /// Probability that a sphere is joined to its outside.
    Sphere,
    /// Exact laws by enumeration on tiny boxes.
    Oracle,
    /// Run the acceptance criteria.
    Verify {
        /// Smoke scale: reduced replicates and grids.
        #[arg(long)]
        smoke: bool,
        /// Criteria to run, e.g. `--criteria 1,2,8`.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u32>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Distance => "distance",
            Command::Lambda => "lambda",
            Command::Theta => "theta",
            Command::Submult => "submult",
            Command::ThetaVsBeta => "theta-vs-beta",
            Command::Tail => "tail",
            Command::Quantiles => "quantiles",
            Command::Diameter => "diameter",
            Command::CompareKernels => "compare-kernels",
            Command::CouplingCheck => "coupling-check",
            Command::Consets => "consets",
            Command::Cutpoints => "cutpoints",
            Command::Sphere => "sphere",
            Command::Oracle => "oracle",
            Command::Verify { .. } => "verify",
        }
    }
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
    Check(String, Vec<String>),
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.run.output_dir = Some(o.clone());
    }
    if let Some(f) = cli.format {
        cfg.run.format = f;
    }
    if let Command::Verify { smoke, criteria } = &cli.command {
        if *smoke {
            cfg.verify.scale = Scale::Smoke;
        }
        if !criteria.is_empty() {
            cfg.verify.criteria = criteria.clone();
        }
    }
    cfg.resolve_output_dir();
    if cli.command.name() == "verify" {
        cfg.validate()?;
    } else {
        cfg.validate_for(cli.command.name())?;
    }
    Ok(cfg)
}

fn verify(cfg: &ExperimentConfig) -> Result<Report> {
    let ids: Vec<u32> = if cfg.verify.criteria.is_empty() {
        CRITERIA.collect()
    } else {
        cfg.verify.criteria.clone()
    };
    let mut outcomes = Vec::new();
    for id in ids {
        let o = run_criterion(id, cfg.verify.scale, cfg.run.seed)?;
        println!("{}", o.line());
        outcomes.push(o);
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} criteria passed", outcomes.len());
    Ok(suite_report(&outcomes, cfg.verify.scale, cfg.run.seed))
}

fn execute(command: &Command, cfg: &ExperimentConfig) -> Result<(Vec<String>, bool, Option<String>)> {
    let dir = cfg.run.output_dir.clone().expect("resolved");
    let mut files = vec![write_resolved_config(&dir, cfg)?];
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .context("starting worker pool")?;
    let report = pool.install(|| match command {
        Command::Verify { .. } => verify(cfg),
        other => commands::run(other.name(), cfg),
    })?;
    files.extend(write_report(&dir, &report, cfg.run.format)?);
    Ok((files, report.passed, report.failure))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let start = Instant::now();
    let fallback_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(lrp_cli::config::DEFAULT_OUTPUT_DIR));

    let (outcome, cfg) = match resolve(&cli) {
        Err(e) => (Err(Failure::Config(e)), None),
        Ok(cfg) => {
            let r = match execute(&cli.command, &cfg) {
                Err(e) => Err(Failure::Run(e)),
                Ok((files, true, _)) => Ok(files),
                Ok((files, false, why)) => Err(Failure::Check(why.unwrap_or_else(|| "check failed".into()), files)),
            };
            (r, Some(cfg))
        }
    };
    let dir = cfg
        .as_ref()
        .and_then(|c| c.run.output_dir.clone())
        .unwrap_or(fallback_dir);

    let (status, code, files) = match &outcome {
        Ok(files) => (RunStatus::Completed, 0u8, files.clone()),
        Err(f) => {
            let (kind, message, code, written) = match f {
                Failure::Config(e) => ("config", format!("{e:#}"), 2u8, Vec::new()),
                Failure::Run(e) => ("runtime", format!("{e:#}"), 1, Vec::new()),
                Failure::Check(m, files) => ("check_failed", m.clone(), 1, files.clone()),
            };
            eprintln!("lrp {name}: {message}");
            let record = ErrorRecord {
                format: "lrp-error",
                version: DATA_FORMAT_VERSION,
                command: name,
                kind,
                message,
            };
            if let Err(e) = write_error(&dir, &record) {
                eprintln!("lrp {name}: could not write error record: {e:#}");
            }
            (RunStatus::Failed, code, written)
        }
    };
    if let Some(cfg) = &cfg {
        let mut files = files;
        if code != 0 {
            files.push(lrp_cli::output::ERROR_FILE.to_string());
        }
        let manifest = RunManifest {
            format: "lrp-manifest",
            version: DATA_FORMAT_VERSION,
            artifact_version: lrp_cli::output::ARTIFACT_VERSION,
            command: name,
            config: cfg,
            files: &files,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            status,
        };
        if let Err(e) = write_manifest(&dir, &manifest) {
            eprintln!("lrp {name}: could not write manifest: {e:#}");
            return ExitCode::from(1);
        }
        if code == 0 {
            println!("wrote {} files to {}", files.len(), dir.display());
        }
    }
    ExitCode::from(code)
}
