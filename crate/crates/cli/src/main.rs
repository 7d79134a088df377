//! `dkr` command-line tool: fit and apply distributed kernel regression
//! models, and run the reproduction experiments.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 data error,
//! 4 numerical failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dkr::data::{load_csv, load_points_csv, CsvOptions, LabelColumn};
use dkr::dkr::{fit_dkr_detailed, FitConfig, Method};
use dkr::eval::{rmse, time_fit};
use dkr::experiment::{self, default_lambda, ExperimentConfig, ExperimentKind, ExperimentOutput};
use dkr::kernel::KernelSpec;
use dkr::losses::LossSpec;
use dkr::model::AveragedEstimator;
use dkr::solvers::PenaltySpec;
use dkr::{DkrError, ErrorClass};

#[derive(Parser)]
#[command(name = "dkr", version, about = "Distributed kernel regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a CSV file and save it as JSON.
    Fit(FitArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Coefficient estimation errors of distributed linear ridge versus m.
    LinearSweep(ExperimentArgs),
    /// Sinc surface with Gaussian noise: RMSE versus m.
    SincCase1(ExperimentArgs),
    /// Sinc surface with 20% uniform outliers: RMSE versus m.
    SincCase2(ExperimentArgs),
    /// DKR on user CSV data: test RMSE per method and m.
    CsvRun(ExperimentArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Training CSV.
    #[arg(long)]
    train: PathBuf,
    /// Label column: index or header name.
    #[arg(long)]
    label: String,
    /// The CSV starts with a header row.
    #[arg(long)]
    header: bool,
    /// ridge, lasso, svr, lad or lad-lasso (overrides --loss/--penalty).
    #[arg(long)]
    method: Option<String>,
    /// quadratic, absolute or epsilon_insensitive.
    #[arg(long)]
    loss: Option<String>,
    /// rkhs_norm_sq or coefficient_l1.
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Defaults to the method's experiment default.
    #[arg(long)]
    lambda: Option<f64>,
    /// Gaussian kernel bandwidth.
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    /// Truncation level M.
    #[arg(long)]
    trunc: f64,
    #[arg(long, default_value_t = dkr::losses::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Also time this many single-worker refits and write `<out>.metrics.json`.
    #[arg(long)]
    repeats: Option<usize>,
    /// Model JSON path.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// CSV of query points.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    header: bool,
    /// Label column in the input; when given, RMSE is reported.
    #[arg(long)]
    label: Option<String>,
    /// Predictions CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Experiment flags. Each one overrides the matching key of `--config`.
#[derive(Args)]
struct ExperimentArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated segment counts.
    #[arg(long)]
    m: Option<String>,
    /// Training size.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    n_test: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    outlier_fraction: Option<String>,
    #[arg(long, alias = "reps")]
    repeats: Option<String>,
    /// Comma-separated methods.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    trunc: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    max_iterations: Option<String>,
    #[arg(long)]
    tolerance: Option<String>,
    #[arg(long)]
    train: Option<String>,
    #[arg(long)]
    test: Option<String>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    header: bool,
    #[arg(long)]
    holdout: Option<String>,
    /// Fit on raw covariates.
    #[arg(long)]
    no_standardize: bool,
    /// Results CSV; timings and plot data go next to it. Stdout when omitted.
    #[arg(long)]
    out: Option<String>,
}

impl ExperimentArgs {
    fn config(&self, kind: ExperimentKind) -> dkr::Result<ExperimentConfig> {
        let mut config = ExperimentConfig::new(kind);
        if let Some(path) = &self.config {
            config.apply_file(path)?;
            if config.experiment != kind {
                return Err(DkrError::InvalidArgument(format!(
                    "config file describes {} but the command is {}",
                    config.experiment.name(),
                    kind.name()
                )));
            }
        }
        let pairs = [
            ("m", &self.m),
            ("n", &self.n),
            ("n_test", &self.n_test),
            ("d", &self.d),
            ("sigma", &self.sigma),
            ("outlier_fraction", &self.outlier_fraction),
            ("repetitions", &self.repeats),
            ("method", &self.method),
            ("loss", &self.loss),
            ("penalty", &self.penalty),
            ("tau", &self.tau),
            ("lambda", &self.lambda),
            ("trunc", &self.trunc),
            ("epsilon", &self.epsilon),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("max_iterations", &self.max_iterations),
            ("tolerance", &self.tolerance),
            ("train", &self.train),
            ("test", &self.test),
            ("label", &self.label),
            ("holdout", &self.holdout),
            ("out", &self.out),
        ];
        for (key, value) in pairs {
            if let Some(value) = value {
                config.apply_kv(key, value)?;
            }
        }
        if self.header {
            config.header = true;
        }
        if self.no_standardize {
            config.standardize = false;
        }
        Ok(config)
    }
}

fn fit_config(args: &FitArgs) -> dkr::Result<FitConfig> {
    let method = match &args.method {
        Some(name) => name.parse::<Method>()?,
        None => {
            let loss =
                LossSpec::from_name(args.loss.as_deref().unwrap_or("quadratic"), args.epsilon)?;
            let penalty =
                PenaltySpec::from_name(args.penalty.as_deref().unwrap_or("rkhs_norm_sq"))?;
            Method::from_parts(&loss, penalty).ok_or_else(|| {
                DkrError::InvalidArgument(format!(
                    "no method combines loss {} with penalty {}",
                    loss.name(),
                    penalty.name()
                ))
            })?
        }
    };
    let lambda = args.lambda.unwrap_or_else(|| default_lambda(method));
    let mut config = FitConfig::for_method(
        method,
        args.tau,
        lambda,
        args.m,
        args.trunc,
        args.epsilon,
        args.seed,
    )?;
    if let Some(it) = args.max_iterations {
        config.solver.max_iterations = it;
    }
    if let Some(tol) = args.tolerance {
        config.solver.tolerance = tol;
    }
    config.validate()?;
    Ok(config)
}

fn write_file(path: &Path, text: &str) -> dkr::Result<()> {
    std::fs::write(path, text).map_err(|source| DkrError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run_fit(args: &FitArgs) -> dkr::Result<()> {
    let config = fit_config(args)?;
    let options = CsvOptions {
        has_header: args.header,
    };
    let label: LabelColumn = args.label.parse().expect("label parsing is infallible");
    let data = load_csv(&args.train, &label, options)?;
    let fit = fit_dkr_detailed(&data, &config, args.workers)?;
    fit.estimator.save(&args.out)?;
    let unconverged = fit.segments.iter().filter(|s| !s.converged).count();
    let KernelSpec::Gaussian { bandwidth } = config.kernel;
    println!(
        "fitted {} segments on {} rows (loss {}, penalty {}, lambda {}, tau {bandwidth}, M {}), training RMSE {:.6}",
        config.m,
        data.len(),
        config.loss.name(),
        config.penalty.name(),
        config.lambda,
        config.truncation,
        rmse(&fit.estimator, &data)?
    );
    if unconverged > 0 {
        eprintln!("warning: {unconverged} segment solves hit the iteration limit");
    }
    println!("model written to {}", args.out.display());
    if let Some(repeats) = args.repeats {
        let report = time_fit(&data, &config, repeats)?;
        let path = experiment::sibling_path(&args.out, "metrics").with_extension("json");
        write_file(&path, &report.to_json())?;
        println!(
            "solver seconds: total {:.6}, critical path {:.6} (mean of {repeats}); metrics written to {}",
            report.fit_seconds,
            report.critical_path_seconds,
            path.display()
        );
    }
    Ok(())
}

fn run_predict(args: &PredictArgs) -> dkr::Result<()> {
    let model = AveragedEstimator::load(&args.model)?;
    let options = CsvOptions {
        has_header: args.header,
    };
    let (points, labels) = match &args.label {
        Some(label) => {
            let data = load_csv(
                &args.input,
                &label.parse().expect("label parsing is infallible"),
                options,
            )?;
            (data.covariates().clone(), Some(data.labels().to_vec()))
        }
        None => (load_points_csv(&args.input, options)?, None),
    };
    let predictions = model.predict_many(&points)?;
    let mut out = String::from("prediction\n");
    for p in &predictions {
        let _ = writeln!(out, "{p}");
    }
    match &args.out {
        Some(path) => write_file(path, &out)?,
        None => print!("{out}"),
    }
    if let Some(labels) = labels {
        let err = dkr::eval::rmse_of(&predictions, &labels)?;
        eprintln!("rmse {err}");
    }
    Ok(())
}

fn run_experiment(kind: ExperimentKind, args: &ExperimentArgs) -> dkr::Result<()> {
    let config = args.config(kind)?;
    let output: ExperimentOutput = experiment::run(&config)?;
    match &config.out {
        Some(path) => {
            for written in output.write(path)? {
                eprintln!("wrote {}", written.display());
            }
        }
        None => print!("{}", output.results.to_csv()),
    }
    Ok(())
}

fn exit_code(err: &DkrError) -> u8 {
    match err.class() {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(args) => run_fit(args),
        Command::Predict(args) => run_predict(args),
        Command::LinearSweep(args) => run_experiment(ExperimentKind::LinearSweep, args),
        Command::SincCase1(args) => run_experiment(ExperimentKind::SincCaseI, args),
        Command::SincCase2(args) => run_experiment(ExperimentKind::SincCaseII, args),
        Command::CsvRun(args) => run_experiment(ExperimentKind::CsvRun, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
