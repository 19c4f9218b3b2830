//! Command-line front end: `fit`, `sample`, `cv`, `simulate`, `diagnose`.
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 numerical failure. Failures
//! print a JSON object on stderr.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::diagnostics::{diagnose, DiagnoseOptions};
use crate::error::{Error, Result};
use crate::io::{
    load_csv, read_batch, write_batch, write_cv_csv, write_json, write_replicates_csv, write_report_csv, SimManifest,
    SOFTWARE_VERSION,
};
use crate::model::Dataset;
use crate::sampler::{
    cross_validate, default_lambda_grid, one_step_sample, residual_bootstrap, two_step_sample, CvMode, CvResult,
    Procedure,
};
use crate::sim::{run_experiment, ExperimentConfig, Method, ReferenceSpec, SimSetting};
use crate::solver::{solve_lasso, SolverConfig};
use crate::weights::{WeightDistribution, WeightScheme};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSpec {
    Value(f64),
    Cv,
}

impl FromStr for LambdaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("cv") {
            return Ok(LambdaSpec::Cv);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(LambdaSpec::Value(v)),
            _ => Err(Error::invalid(format!("lambda must be a number >= 0 or 'cv', got '{s}'"))),
        }
    }
}

impl fmt::Display for LambdaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaSpec::Value(v) => write!(f, "{v}"),
            LambdaSpec::Cv => f.write_str("cv"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rwlasso", version, about = "Random-weighting inference for LASSO regression")]
pub struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, env = "RW_LASSO_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the standard LASSO at one λ.
    Fit(FitArgs),
    /// Draw a random-weighting or residual-bootstrap batch.
    Sample(SampleArgs),
    /// Cross-validate λ.
    Cv(CvArgs),
    /// Run a simulation setting.
    Simulate(SimulateArgs),
    /// Summarize a stored batch.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    pub response: String,
}

#[derive(Debug, Args)]
pub struct CvOpts {
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 100)]
    pub grid_len: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub grid_ratio: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// λ value or `cv`.
    #[arg(long)]
    pub lambda: LambdaSpec,
    #[arg(long, default_value = "one-step")]
    pub cv_mode: CvMode,
    #[command(flatten)]
    pub cv: CvOpts,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report the intercept-free centered fit.
    #[arg(long)]
    pub centered: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "two-step")]
    pub procedure: Procedure,
    /// rw1, rw2 or rw3 (default rw1; not allowed with residual-bootstrap).
    #[arg(long)]
    pub scheme: Option<WeightScheme>,
    /// Weight law, e.g. `exponential:1`, `gamma:2,2`, `uniform:0.5,1.5`.
    #[arg(long = "dist")]
    pub dist: Option<WeightDistribution>,
    #[arg(long)]
    pub lambda: LambdaSpec,
    /// CV criterion when `--lambda cv` (default: one-step for the residual
    /// bootstrap, two-step otherwise).
    #[arg(long)]
    pub cv_mode: Option<CvMode>,
    #[command(flatten)]
    pub cv: CvOpts,
    #[arg(long = "B", alias = "b", default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.90)]
    pub level: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "two-step")]
    pub mode: CvMode,
    #[command(flatten)]
    pub cv: CvOpts,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Setting 1..=8.
    #[arg(long)]
    pub setting: u8,
    #[arg(long = "T", alias = "t", default_value_t = 500)]
    pub replicates: usize,
    #[arg(long = "B", alias = "b", default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated, e.g. `rw1-two-step,rw3-two-step,rb`.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long = "dist")]
    pub dist: Option<WeightDistribution>,
    /// Draws in a per-replicate RW1 two-step reference batch for ecdf distances.
    #[arg(long)]
    pub reference_draws: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0.90)]
    pub level: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Directory written by `sample`.
    #[arg(long)]
    pub batch: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Held-out CSV with the same columns.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// True coefficients, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta0: Option<Vec<f64>>,
    /// Reference batch directory for ecdf distances.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 0.90)]
    pub level: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Validated, serializable record of what a command was asked to do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub data: Option<PathBuf>,
    pub response: Option<String>,
    pub lambda: Option<LambdaSpec>,
    pub scheme: Option<WeightScheme>,
    pub distribution: Option<WeightDistribution>,
    pub draws: Option<usize>,
    pub seed: u64,
    pub procedure: Option<Procedure>,
    pub out: Option<PathBuf>,
    pub level: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws == Some(0) {
            return Err(Error::invalid("B must be at least 1"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid(format!("level must be in (0, 1), got {}", self.level)));
        }
        if self.procedure == Some(Procedure::ResidualBootstrap) && (self.scheme.is_some() || self.distribution.is_some()) {
            return Err(Error::invalid(
                "--scheme and --dist do not apply to the residual bootstrap",
            ));
        }
        if let Some(d) = &self.distribution {
            d.validate()?;
        }
        if let Some(p) = &self.data {
            if !p.exists() {
                return Err(Error::Data(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::Singular { .. } => EXIT_NUMERICAL,
        Error::Parse { .. } | Error::Data(_) | Error::Io { .. } | Error::Format { .. } => EXIT_DATA,
    }
}

pub fn error_json(e: &Error) -> serde_json::Value {
    let mut v = json!({ "error": e.kind(), "message": e.to_string() });
    if let Error::Parse { row, column, .. } = e {
        v["row"] = json!(row);
        v["column"] = json!(column);
    }
    v
}

fn lambda_from_cv(
    data: &Dataset,
    mode: CvMode,
    opts: &CvOpts,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<CvResult> {
    let grid = default_lambda_grid(data, opts.grid_len, opts.grid_ratio);
    cross_validate(data, opts.folds, &grid, mode, seed, cfg)
}

fn resolve_lambda(
    spec: LambdaSpec,
    data: &Dataset,
    mode: CvMode,
    opts: &CvOpts,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<(f64, Option<CvResult>)> {
    match spec {
        LambdaSpec::Value(v) => Ok((v, None)),
        LambdaSpec::Cv => {
            let cv = lambda_from_cv(data, mode, opts, seed, cfg)?;
            Ok((cv.chosen_lambda, Some(cv)))
        }
    }
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_fit(a: FitArgs, stdout: &mut dyn Write) -> Result<()> {
    let rc = RunConfig {
        command: "fit".into(),
        data: Some(a.data.data.clone()),
        response: Some(a.data.response.clone()),
        lambda: Some(a.lambda),
        scheme: None,
        distribution: None,
        draws: None,
        seed: a.seed,
        procedure: None,
        out: a.out.clone(),
        level: 0.90,
    };
    rc.validate()?;
    let data = load_csv(&a.data.data, &a.data.response)?;
    let cfg = SolverConfig::default();
    let (lambda, cv) = resolve_lambda(a.lambda, &data, a.cv_mode, &a.cv, a.seed, &cfg)?;
    let fit = solve_lasso(&data, lambda, &cfg)?;
    let coefficients: serde_json::Map<String, serde_json::Value> = data
        .names()
        .iter()
        .zip(&fit.beta)
        .map(|(n, b)| (n.clone(), json!(b)))
        .collect();
    let intercept = if a.centered { 0.0 } else { data.intercept(&fit.beta) };
    let out = json!({
        "lambda": lambda,
        "scale": if a.centered { "centered" } else { "original" },
        "intercept": intercept,
        "coefficients": coefficients,
        "selected": fit.active.to_one_based(),
        "kkt_residual": fit.kkt_residual,
        "iterations": fit.iterations,
        "converged": fit.converged,
    });
    if let Some(dir) = &a.out {
        out_dir(dir)?;
        write_json(&out, dir.join("fit.json"))?;
        if let Some(cv) = &cv {
            write_cv_csv(cv, dir.join("cv.csv"))?;
        }
    }
    writeln!(stdout, "{}", serde_json::to_string_pretty(&out).expect("json")).map_err(|e| Error::io("<stdout>", e))
}

fn cmd_sample(a: SampleArgs, stdout: &mut dyn Write) -> Result<()> {
    let rc = RunConfig {
        command: "sample".into(),
        data: Some(a.data.data.clone()),
        response: Some(a.data.response.clone()),
        lambda: Some(a.lambda),
        scheme: a.scheme,
        distribution: a.dist,
        draws: Some(a.draws),
        seed: a.seed,
        procedure: Some(a.procedure),
        out: Some(a.out.clone()),
        level: a.level,
    };
    rc.validate()?;
    let data = load_csv(&a.data.data, &a.data.response)?;
    let cfg = SolverConfig::default();
    let mode = a.cv_mode.unwrap_or(match a.procedure {
        Procedure::ResidualBootstrap => CvMode::OneStepLasso,
        _ => CvMode::TwoStepLassoLs,
    });
    let (lambda, cv) = resolve_lambda(a.lambda, &data, mode, &a.cv, a.seed, &cfg)?;
    let scheme = a.scheme.unwrap_or(WeightScheme::ObsOnly);
    let dist = a.dist.unwrap_or_default();
    let batch = match a.procedure {
        Procedure::OneStep => one_step_sample(&data, lambda, a.draws, &dist, scheme, a.seed, &cfg)?,
        Procedure::TwoStep => two_step_sample(&data, lambda, a.draws, &dist, scheme, a.seed, &cfg)?,
        Procedure::ResidualBootstrap => residual_bootstrap(&data, lambda, a.draws, a.seed, &cfg)?,
    };
    let report = diagnose(
        &batch,
        &data,
        &DiagnoseOptions {
            level: Some(a.level),
            ..Default::default()
        },
    )?;
    write_batch(&batch, &a.out)?;
    write_report_csv(&report, &batch.names, a.out.join("diagnostics.csv"))?;
    write_json(&report, a.out.join("diagnostics.json"))?;
    if let Some(cv) = &cv {
        write_cv_csv(cv, a.out.join("cv.csv"))?;
    }
    write_json(&rc, a.out.join("run.json"))?;
    let summary = json!({
        "out": a.out,
        "lambda": lambda,
        "draws": batch.len(),
        "flagged_draws": batch.flagged_draws(),
        "mse": report.mse,
    });
    writeln!(stdout, "{summary}").map_err(|e| Error::io("<stdout>", e))
}

fn cmd_cv(a: CvArgs, stdout: &mut dyn Write) -> Result<()> {
    let rc = RunConfig {
        command: "cv".into(),
        data: Some(a.data.data.clone()),
        response: Some(a.data.response.clone()),
        lambda: Some(LambdaSpec::Cv),
        scheme: None,
        distribution: None,
        draws: None,
        seed: a.seed,
        procedure: None,
        out: a.out.clone(),
        level: 0.90,
    };
    rc.validate()?;
    let data = load_csv(&a.data.data, &a.data.response)?;
    let cv = lambda_from_cv(&data, a.mode, &a.cv, a.seed, &SolverConfig::default())?;
    if let Some(dir) = &a.out {
        out_dir(dir)?;
        write_cv_csv(&cv, dir.join("cv.csv"))?;
        write_json(&cv, dir.join("cv.json"))?;
    }
    let summary = json!({
        "mode": cv.mode,
        "chosen_lambda": cv.chosen_lambda,
        "folds": cv.folds,
        "fallbacks": cv.fallbacks.len(),
    });
    writeln!(stdout, "{summary}").map_err(|e| Error::io("<stdout>", e))
}

fn cmd_simulate(a: SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let rc = RunConfig {
        command: "simulate".into(),
        data: None,
        response: None,
        lambda: Some(LambdaSpec::Cv),
        scheme: None,
        distribution: a.dist,
        draws: Some(a.draws),
        seed: a.seed,
        procedure: None,
        out: Some(a.out.clone()),
        level: a.level,
    };
    rc.validate()?;
    if a.replicates == 0 {
        return Err(Error::invalid("T must be at least 1"));
    }
    let setting = SimSetting::table1(a.setting)?.with_scale(a.replicates, a.draws);
    let cfg = ExperimentConfig {
        methods: a.methods.unwrap_or_else(|| Method::DEFAULT.to_vec()),
        dist: a.dist.unwrap_or_default(),
        folds: a.folds,
        level: a.level,
        reference: a.reference_draws.map(|draws| ReferenceSpec {
            draws,
            ..Default::default()
        }),
        ..Default::default()
    };
    let results = run_experiment(&setting, &cfg, a.seed)?;
    out_dir(&a.out)?;
    let names: Vec<String> = (1..=setting.p).map(|j| format!("x{j}")).collect();
    let path = a.out.join("simulation.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_replicates_csv(&results, &names, std::io::BufWriter::new(file))?;
    write_json(&SimManifest::of(&setting, a.seed, &results), a.out.join("manifest.json"))?;
    let failures: usize = results
        .iter()
        .map(|r| r.methods.iter().filter(|m| m.error.is_some()).count())
        .sum();
    let summary = json!({
        "out": a.out,
        "setting": setting.label(),
        "replicates": results.len(),
        "methods": cfg.methods.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        "failed_method_runs": failures,
    });
    writeln!(stdout, "{summary}").map_err(|e| Error::io("<stdout>", e))
}

fn cmd_diagnose(a: DiagnoseArgs, stdout: &mut dyn Write) -> Result<()> {
    let rc = RunConfig {
        command: "diagnose".into(),
        data: Some(a.data.data.clone()),
        response: Some(a.data.response.clone()),
        lambda: None,
        scheme: None,
        distribution: None,
        draws: None,
        seed: 0,
        procedure: None,
        out: Some(a.out.clone()),
        level: a.level,
    };
    rc.validate()?;
    let batch = read_batch(&a.batch)?;
    let data = load_csv(&a.data.data, &a.data.response)?;
    let test = a.test.as_ref().map(|p| load_csv(p, &a.data.response)).transpose()?;
    let reference = a.reference.as_ref().map(read_batch).transpose()?;
    let report = diagnose(
        &batch,
        &data,
        &DiagnoseOptions {
            test: test.as_ref(),
            beta0: a.beta0.as_deref(),
            reference: reference.as_ref(),
            level: Some(a.level),
            tv_step: None,
        },
    )?;
    out_dir(&a.out)?;
    write_report_csv(&report, &batch.names, a.out.join("diagnostics.csv"))?;
    write_json(&report, a.out.join("diagnostics.json"))?;
    let summary = json!({ "out": a.out, "mse": report.mse, "mspe": report.mspe, "tv_mean": report.tv_mean() });
    writeln!(stdout, "{summary}").map_err(|e| Error::io("<stdout>", e))
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Fit(a) => cmd_fit(a, stdout),
        Command::Sample(a) => cmd_sample(a, stdout),
        Command::Cv(a) => cmd_cv(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Diagnose(a) => cmd_diagnose(a, stdout),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let v = json!({ "error": "usage", "message": e.render().to_string().trim() });
            let _ = writeln!(stderr, "{v}");
            return EXIT_USAGE;
        }
    };
    let pool = match cli.workers {
        Some(0) => {
            let _ = writeln!(stderr, "{}", json!({ "error": "usage", "message": "--workers must be at least 1" }));
            return EXIT_USAGE;
        }
        Some(w) => rayon::ThreadPoolBuilder::new().num_threads(w).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "{}", json!({ "error": "runtime", "message": e.to_string() }));
            return EXIT_NUMERICAL;
        }
    };
    let mut buf = Vec::new();
    let result = pool.install(|| dispatch(cli.command, &mut buf));
    let _ = stdout.write_all(&buf);
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_json(&e));
            exit_code(&e)
        }
    }
}

pub fn version() -> &'static str {
    SOFTWARE_VERSION
}
