use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bosonstat::experiments::{self, Experiment, ExperimentConfig, ExperimentOutput, Mode};
use bosonstat::samplers::{BosonMethod, SamplerKind};
use bosonstat::ComplexMatrix;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Seeded sampling and distinguishing experiments for linear-optical
/// sampling distributions.
#[derive(Parser, Debug)]
#[command(name = "bosonstat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Density histograms of P = |Per|^2/n! and D = |Det|^2/n! for Gaussian matrices.
    Pdf(Common),
    /// Mean absolute deviation of P from 1 and the probability of |P - 1| >= 1/2.
    Deviation(Common),
    /// Exact distance between the boson distribution and uniform, per Haar draw.
    Tv(Common),
    /// Row-norm distinguisher acceptance for boson, uniform, mockup and fermion arms.
    Distinguish(Common),
    /// Permanent-product verifier on boson and uniform batches.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Batch size checked against the acceptance thresholds.
        #[arg(long)]
        k: Option<usize>,
        /// Haar trials behind the k sweep.
        #[arg(long)]
        sweep_trials: Option<usize>,
    },
    /// Fermion sampler validation and lognormal convergence.
    Fermion {
        #[command(flatten)]
        common: Common,
        /// Draws per law for the Kolmogorov-Smirnov comparisons.
        #[arg(long)]
        ks_samples: Option<usize>,
        /// Draws per degree of freedom for the log-chi-square cumulants.
        #[arg(long)]
        cumulant_samples: Option<usize>,
    },
    /// Raw sample batches as JSON lines.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = KindArg::BosonExact)]
        kind: KindArg,
        /// Per-photon loss probability for lossy-boson.
        #[arg(long)]
        loss: Option<f64>,
        /// Column-orthonormal matrix JSON to sample from instead of a Haar draw.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Haar re-draws.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// Fraction of trials that must pass per-trial checks.
    #[arg(long)]
    pass_fraction: Option<f64>,
    #[arg(long, value_enum)]
    boson_method: Option<MethodArg>,
    /// Full experiment config as JSON; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path. Side files are written next to it with suffixed names.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Exact,
    Surrogate,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Auto,
    Table,
    Rejection,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindArg {
    BosonExact,
    Fermion,
    MockupClassical,
    MockupRownorm,
    Uniform,
    LossyBoson,
}

impl From<KindArg> for SamplerKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::BosonExact => SamplerKind::BosonExact,
            KindArg::Fermion => SamplerKind::Fermion,
            KindArg::MockupClassical => SamplerKind::MockupClassical,
            KindArg::MockupRownorm => SamplerKind::MockupRownorm,
            KindArg::Uniform => SamplerKind::Uniform,
            KindArg::LossyBoson => SamplerKind::LossyBoson,
        }
    }
}

fn build_config(exp: Experiment, c: &Common) -> Result<ExperimentConfig, String> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let cfg: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if cfg.experiment != exp {
                return Err(format!("config is for {}, not {}", cfg.experiment.tag(), exp.tag()));
            }
            cfg
        }
        None => {
            let n = c.n.ok_or("--n is required")?;
            let seed = c.seed.ok_or("--seed is required")?;
            ExperimentConfig::new(exp, n, seed)
        }
    };
    if let Some(n) = c.n {
        cfg.n = n;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.m = c.m.or(cfg.m);
    cfg.samples = c.samples.or(cfg.samples);
    cfg.trials = c.trials.or(cfg.trials);
    cfg.pass_fraction = c.pass_fraction.or(cfg.pass_fraction);
    if c.config.is_none() || !matches!(c.mode, ModeArg::Exact) {
        cfg.mode = match c.mode {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Surrogate => Mode::Surrogate,
        };
    }
    if let Some(method) = c.boson_method {
        cfg.boson_method = Some(match method {
            MethodArg::Auto => BosonMethod::Auto,
            MethodArg::Table => BosonMethod::Table,
            MethodArg::Rejection => BosonMethod::Rejection,
        });
    }
    Ok(cfg)
}

fn side_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

fn emit(output: &ExperimentOutput, common: &Common) -> Result<(), String> {
    let report = match common.format {
        Format::Json => output.report.to_json(),
        Format::Csv => output.report.to_csv(),
    }
    .map_err(|e| e.to_string())?;
    match &common.out {
        Some(path) => {
            fs::write(path, report).map_err(|e| format!("{}: {e}", path.display()))?;
            for artifact in &output.artifacts {
                let p = side_path(path, &artifact.suffix);
                fs::write(&p, &artifact.contents).map_err(|e| format!("{}: {e}", p.display()))?;
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            print!("{report}");
            if !output.artifacts.is_empty() {
                eprintln!("note: pass --out to also write {} side file(s)", output.artifacts.len());
            }
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool, String> {
    let (common, cfg, matrix) = match &cli.command {
        Command::Pdf(c) => (c, build_config(Experiment::Pdf, c)?, None),
        Command::Deviation(c) => (c, build_config(Experiment::Deviation, c)?, None),
        Command::Tv(c) => (c, build_config(Experiment::Tv, c)?, None),
        Command::Distinguish(c) => (c, build_config(Experiment::Distinguish, c)?, None),
        Command::Verify { common, k, sweep_trials } => {
            let mut cfg = build_config(Experiment::Verify, common)?;
            cfg.k = k.or(cfg.k);
            cfg.sweep_trials = sweep_trials.or(cfg.sweep_trials);
            (common, cfg, None)
        }
        Command::Fermion { common, ks_samples, cumulant_samples } => {
            let mut cfg = build_config(Experiment::Fermion, common)?;
            cfg.ks_samples = ks_samples.or(cfg.ks_samples);
            cfg.cumulant_samples = cumulant_samples.or(cfg.cumulant_samples);
            (common, cfg, None)
        }
        Command::Sample { common, kind, loss, matrix } => {
            let mut cfg = build_config(Experiment::Sample, common)?;
            cfg.kind = Some((*kind).into());
            cfg.loss = loss.or(cfg.loss);
            let a = match matrix {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                    let a = ComplexMatrix::from_json(&text).map_err(|e| e.to_string())?;
                    cfg.m = Some(a.rows());
                    Some(a)
                }
                None => None,
            };
            (common, cfg, a)
        }
    };
    let start = Instant::now();
    let output = match matrix {
        Some(a) => experiments::run_sample_with_matrix(&cfg, &a),
        None => experiments::run(&cfg),
    }
    .map_err(|e| e.to_string())?;
    eprintln!("{} finished in {:.2}s", cfg.experiment.tag(), start.elapsed().as_secs_f64());
    for check in &output.report.checks {
        eprintln!(
            "{} {} (measured {}, needs {} {})",
            if check.passed { "PASS" } else { "FAIL" },
            check.claim,
            check.measured,
            serde_json::to_value(check.comparison).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default(),
            check.threshold
        );
    }
    emit(&output, common)?;
    Ok(output.report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
