//! Experiment runners: the linear coefficient sweep, the two sinc studies and
//! DKR on user CSV data.
//!
//! A run is described by an [`ExperimentConfig`], read from a flat
//! `key = value` file and/or set key by key. Every runner returns typed rows
//! and can render three CSV tables: deterministic results (each row echoes
//! the full configuration), timings (nondeterministic, kept in their own file)
//! and plot data.
//!
//! Config keys (`-` and `_` are interchangeable; `#` starts a comment):
//!
//! | key | meaning |
//! |-----|---------|
//! | `experiment` | `linear-sweep`, `sinc-case1`, `sinc-case2`, `csv-run` |
//! | `m` | comma-separated segment counts |
//! | `n` | training size (Case II: clean + outlier rows) |
//! | `n_test` | size of the generated noiseless test set |
//! | `d` | covariate dimension of the linear sweep |
//! | `sigma` | Gaussian noise level (Case II: of the clean rows) |
//! | `outlier_fraction`, `outlier_lo`, `outlier_hi` | Case II uniform outliers |
//! | `repetitions` (`reps`, `repeats`) | independent repetitions |
//! | `method` (`methods`) | comma-separated `ridge, lasso, svr, lad, lad-lasso` |
//! | `loss`, `penalty` | alternative to `method` |
//! | `tau`, `lambda`, `trunc`, `epsilon` | kernel bandwidth, regularization, truncation level, SVR tube |
//! | `seed`, `workers`, `out` | base seed, worker threads, results path |
//! | `max_iterations`, `tolerance` | iterative solver limits |
//! | `train`, `test`, `label`, `header`, `holdout`, `standardize` | CSV runs |

mod csv_run;
mod linear;
mod sinc;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::LabelColumn;
use crate::dkr::Method;
use crate::error::{DkrError, Result};
use crate::losses::LossSpec;
use crate::rng::{self, derive_seed, stream};
use crate::solvers::{PenaltySpec, SolverOptions};

pub use csv_run::{holdout_split, run_csv, CsvReport, CsvRow};
pub use linear::{linear_ridge, run_linear_sweep, LinearReport, LinearRow};
pub use sinc::{
    run_sinc_case, sinc_test_data, sinc_training_data, CellTiming, SincReport, SincRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    LinearSweep,
    SincCaseI,
    SincCaseII,
    CsvRun,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LinearSweep => "linear-sweep",
            ExperimentKind::SincCaseI => "sinc-case1",
            ExperimentKind::SincCaseII => "sinc-case2",
            ExperimentKind::CsvRun => "csv-run",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = DkrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "linear-sweep" | "linear" => Ok(ExperimentKind::LinearSweep),
            "sinc-case1" | "sinc-case-i" | "case1" => Ok(ExperimentKind::SincCaseI),
            "sinc-case2" | "sinc-case-ii" | "case2" => Ok(ExperimentKind::SincCaseII),
            "csv-run" | "csv" => Ok(ExperimentKind::CsvRun),
            _ => Err(DkrError::invalid(format!("unknown experiment {s:?}"))),
        }
    }
}

/// Default regularization per method for the sinc studies and CSV runs,
/// picked from pilot runs on desk-scale sinc data.
pub fn default_lambda(method: Method) -> f64 {
    match method {
        Method::Lasso => 1e-4,
        _ => 1e-3,
    }
}

/// Seeds of one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepSeeds {
    pub train: u64,
    pub test: u64,
    pub partition: u64,
}

pub fn rep_seeds(seed: u64, rep: usize) -> RepSeeds {
    let base = derive_seed(seed, rep as u64);
    RepSeeds {
        train: derive_seed(base, stream::TRAIN),
        test: derive_seed(base, stream::TEST),
        partition: derive_seed(base, stream::PARTITION),
    }
}

/// Fields left as `None` take defaults that depend on the experiment kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub m: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub n_test: usize,
    pub d: usize,
    pub sigma: Option<f64>,
    pub outlier_fraction: f64,
    pub outlier_lo: f64,
    pub outlier_hi: f64,
    pub repetitions: usize,
    pub methods: Option<Vec<Method>>,
    pub loss: Option<String>,
    pub penalty: Option<String>,
    pub tau: f64,
    pub lambda: Option<f64>,
    pub truncation: Option<f64>,
    pub epsilon: f64,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub solver: SolverOptions,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub label: Option<LabelColumn>,
    pub header: bool,
    pub holdout: f64,
    pub standardize: bool,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            m: None,
            n: None,
            n_test: 2000,
            d: 10,
            sigma: None,
            outlier_fraction: 0.2,
            outlier_lo: -2.0,
            outlier_hi: 2.0,
            repetitions: 10,
            methods: None,
            loss: None,
            penalty: None,
            tau: 0.05,
            lambda: None,
            truncation: None,
            epsilon: crate::losses::DEFAULT_EPSILON,
            seed: 0,
            workers: None,
            out: None,
            solver: SolverOptions::default(),
            train: None,
            test: None,
            label: None,
            header: false,
            holdout: 0.2,
            standardize: true,
        }
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                DkrError::invalid(format!("config line {}: expected key = value", i + 1))
            })?;
            self.apply_kv(key, value)
                .map_err(|e| DkrError::invalid(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DkrError::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "experiment" => self.experiment = value.parse()?,
            "m" => self.m = Some(parse_list(&key, value)?),
            "n" => self.n = Some(parse(&key, value)?),
            "n_test" => self.n_test = parse(&key, value)?,
            "d" => self.d = parse(&key, value)?,
            "sigma" => self.sigma = Some(parse(&key, value)?),
            "outlier_fraction" => self.outlier_fraction = parse(&key, value)?,
            "outlier_lo" => self.outlier_lo = parse(&key, value)?,
            "outlier_hi" => self.outlier_hi = parse(&key, value)?,
            "repetitions" | "reps" | "repeats" => self.repetitions = parse(&key, value)?,
            "method" | "methods" => self.methods = Some(parse_list(&key, value)?),
            "loss" => self.loss = Some(value.to_string()),
            "penalty" => self.penalty = Some(value.to_string()),
            "tau" => self.tau = parse(&key, value)?,
            "lambda" => self.lambda = Some(parse(&key, value)?),
            "trunc" | "truncation" => self.truncation = Some(parse(&key, value)?),
            "epsilon" => self.epsilon = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "workers" => self.workers = Some(parse(&key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "max_iterations" => self.solver.max_iterations = parse(&key, value)?,
            "tolerance" => self.solver.tolerance = parse(&key, value)?,
            "train" => self.train = Some(PathBuf::from(value)),
            "test" => self.test = Some(PathBuf::from(value)),
            "label" => self.label = Some(value.parse().expect("label parsing is infallible")),
            "header" => self.header = parse_bool(&key, value)?,
            "holdout" => self.holdout = parse(&key, value)?,
            "standardize" => self.standardize = parse_bool(&key, value)?,
            _ => return Err(DkrError::invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Training size, including outliers for Case II.
    pub fn train_size(&self) -> usize {
        self.n.unwrap_or(10_000)
    }

    pub fn m_values(&self) -> Vec<usize> {
        if let Some(m) = &self.m {
            return m.clone();
        }
        match self.experiment {
            ExperimentKind::LinearSweep => {
                let top = (self.train_size() / 2).max(1);
                std::iter::successors(Some(1usize), |m| m.checked_mul(2))
                    .take_while(|&m| m <= top)
                    .collect()
            }
            _ => vec![5, 10, 20, 50, 100, 200],
        }
    }

    pub fn noise_sigma(&self) -> f64 {
        self.sigma.unwrap_or(match self.experiment {
            ExperimentKind::LinearSweep => 1.0,
            ExperimentKind::SincCaseII => 0.1,
            _ => 0.2,
        })
    }

    pub fn resolved_methods(&self) -> Result<Vec<Method>> {
        if let Some(methods) = &self.methods {
            return Ok(methods.clone());
        }
        if self.loss.is_some() || self.penalty.is_some() {
            let loss =
                LossSpec::from_name(self.loss.as_deref().unwrap_or("quadratic"), self.epsilon)?;
            let penalty =
                PenaltySpec::from_name(self.penalty.as_deref().unwrap_or("rkhs_norm_sq"))?;
            return Method::from_parts(&loss, penalty)
                .map(|m| vec![m])
                .ok_or_else(|| {
                    DkrError::invalid(format!(
                        "no method combines loss {} with penalty {}",
                        loss.name(),
                        penalty.name()
                    ))
                });
        }
        Ok(match self.experiment {
            ExperimentKind::SincCaseII => vec![Method::Ridge, Method::Lad],
            _ => vec![Method::Ridge],
        })
    }

    pub fn lambda_for(&self, method: Method) -> f64 {
        self.lambda.unwrap_or_else(|| default_lambda(method))
    }

    pub fn truncation_level(&self) -> Result<f64> {
        match (self.truncation, self.experiment) {
            (Some(m), _) => Ok(m),
            (None, ExperimentKind::CsvRun) => Err(DkrError::invalid(
                "csv runs need an explicit truncation level (trunc)",
            )),
            (None, _) => Ok(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ms = self.m_values();
        if ms.is_empty() {
            return Err(DkrError::invalid("the m list is empty"));
        }
        if ms.contains(&0) {
            return Err(DkrError::invalid("m values must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(DkrError::invalid("repetitions must be at least 1"));
        }
        let methods = self.resolved_methods()?;
        if methods.is_empty() {
            return Err(DkrError::invalid("no method selected"));
        }
        let truncation = self.truncation_level()?;
        if !(truncation.is_finite() && truncation > 0.0) {
            return Err(DkrError::invalid(format!(
                "truncation level must be positive, got {truncation}"
            )));
        }
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(DkrError::invalid(format!(
                    "lambda must be nonnegative, got {l}"
                )));
            }
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(DkrError::invalid(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(DkrError::invalid(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.workers == Some(0) {
            return Err(DkrError::invalid("workers must be at least 1"));
        }
        self.solver.validate()?;
        let max_m = *ms.iter().max().expect("nonempty");
        match self.experiment {
            ExperimentKind::CsvRun => {
                if self.train.is_none() {
                    return Err(DkrError::invalid("csv runs need a training file (train)"));
                }
                if self.label.is_none() {
                    return Err(DkrError::invalid("csv runs need a label column (label)"));
                }
                if self.test.is_none() && !(self.holdout > 0.0 && self.holdout < 1.0) {
                    return Err(DkrError::invalid(format!(
                        "holdout fraction must lie in (0, 1), got {}",
                        self.holdout
                    )));
                }
            }
            kind => {
                let n = self.train_size();
                if n < max_m {
                    return Err(DkrError::invalid(format!(
                        "n = {n} is smaller than the largest m = {max_m}"
                    )));
                }
                if kind != ExperimentKind::LinearSweep && self.n_test == 0 {
                    return Err(DkrError::invalid("n_test must be at least 1"));
                }
                if kind == ExperimentKind::LinearSweep {
                    if methods != [Method::Ridge] {
                        return Err(DkrError::invalid(
                            "the linear sweep uses local ridge estimates only",
                        ));
                    }
                    if self.d == 0 {
                        return Err(DkrError::invalid("d must be at least 1"));
                    }
                }
                let sigma = self.noise_sigma();
                if !(sigma.is_finite() && sigma >= 0.0) {
                    return Err(DkrError::invalid(format!(
                        "sigma must be nonnegative, got {sigma}"
                    )));
                }
                if kind == ExperimentKind::SincCaseII {
                    if !(0.0..1.0).contains(&self.outlier_fraction) {
                        return Err(DkrError::invalid("outlier_fraction must lie in [0, 1)"));
                    }
                    if self.outlier_lo > self.outlier_hi
                        || self.outlier_lo.is_nan()
                        || self.outlier_hi.is_nan()
                    {
                        return Err(DkrError::invalid("outlier_lo must not exceed outlier_hi"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Column names and values repeated at the start of every results row.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let path = |p: &Option<PathBuf>| opt(p.as_ref().map(|p| p.display().to_string()));
        let m_list: Vec<String> = self.m_values().iter().map(usize::to_string).collect();
        vec![
            ("experiment", self.experiment.name().to_string()),
            ("m_list", m_list.join(" ")),
            (
                "n",
                opt((self.experiment != ExperimentKind::CsvRun)
                    .then(|| self.train_size().to_string())),
            ),
            ("n_test", self.n_test.to_string()),
            ("d", self.d.to_string()),
            ("sigma", self.noise_sigma().to_string()),
            ("outlier_fraction", self.outlier_fraction.to_string()),
            ("outlier_lo", self.outlier_lo.to_string()),
            ("outlier_hi", self.outlier_hi.to_string()),
            ("repetitions", self.repetitions.to_string()),
            ("tau", self.tau.to_string()),
            (
                "trunc",
                opt(self.truncation_level().ok().map(|m| m.to_string())),
            ),
            ("epsilon", self.epsilon.to_string()),
            ("max_iterations", self.solver.max_iterations.to_string()),
            ("tolerance", self.solver.tolerance.to_string()),
            ("train", path(&self.train)),
            ("test", path(&self.test)),
            (
                "label",
                opt(self.label.as_ref().map(|l| match l {
                    LabelColumn::Index(i) => i.to_string(),
                    LabelColumn::Name(s) => s.clone(),
                })),
            ),
            ("header", self.header.to_string()),
            ("holdout", self.holdout.to_string()),
            ("standardize", self.standardize.to_string()),
            ("seed", self.seed.to_string()),
            ("rng", rng::RNG_NAME.to_string()),
        ]
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| DkrError::invalid(format!("invalid value {value:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(DkrError::invalid(format!(
            "invalid value {value:?} for {key}"
        ))),
    }
}

/// A CSV table held as strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Index of a header column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| DkrError::io(path, e))
    }
}

/// Results, timings and plot data of one experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentOutput {
    pub results: Table,
    pub timings: Table,
    pub plot: Table,
}

/// `results.csv` → `results.<suffix>.csv`.
pub fn sibling_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = out
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

impl ExperimentOutput {
    /// Writes `out`, plus the timings and plot files next to it.
    pub fn write(&self, out: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let out = out.as_ref();
        let timings = sibling_path(out, "timings");
        let plot = sibling_path(out, "plot");
        self.results.write(out)?;
        self.timings.write(&timings)?;
        self.plot.write(&plot)?;
        Ok(vec![out.to_path_buf(), timings, plot])
    }
}

/// Results table with the config echo prepended to `columns`.
fn echo_table(config: &ExperimentConfig, columns: &[&str]) -> Table {
    let mut header: Vec<&str> = config.echo().iter().map(|(k, _)| *k).collect();
    header.extend_from_slice(columns);
    Table::new(&header)
}

fn echo_row(config: &ExperimentConfig, values: Vec<String>) -> Vec<String> {
    let mut row: Vec<String> = config.echo().into_iter().map(|(_, v)| v).collect();
    row.extend(values);
    row
}

/// Runs whichever experiment `config` names.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    Ok(match config.experiment {
        ExperimentKind::LinearSweep => run_linear_sweep(config)?.output(),
        ExperimentKind::SincCaseI | ExperimentKind::SincCaseII => run_sinc_case(config)?.output(),
        ExperimentKind::CsvRun => run_csv(config)?.output(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_depend_on_kind() {
        let lin = ExperimentConfig::new(ExperimentKind::LinearSweep);
        assert_eq!(lin.m_values().first(), Some(&1));
        assert_eq!(lin.m_values().last(), Some(&4096));
        assert_eq!(lin.noise_sigma(), 1.0);
        assert_eq!(lin.lambda_for(Method::Ridge), 1e-3);
        let c2 = ExperimentConfig::new(ExperimentKind::SincCaseII);
        assert_eq!(c2.m_values(), vec![5, 10, 20, 50, 100, 200]);
        assert_eq!(
            c2.resolved_methods().unwrap(),
            vec![Method::Ridge, Method::Lad]
        );
        assert_eq!(c2.noise_sigma(), 0.1);
        assert!(ExperimentConfig::new(ExperimentKind::CsvRun)
            .truncation_level()
            .is_err());
    }

    #[test]
    fn config_text_and_overrides() {
        let mut c = ExperimentConfig::new(ExperimentKind::SincCaseI);
        c.apply_text("# comment\nm = 2, 4\nmethods = ridge,lad-lasso\nLambda=0.01  # inline\nn-test = 7\n\nstandardize = no\n")
            .unwrap();
        assert_eq!(c.m, Some(vec![2, 4]));
        assert_eq!(
            c.resolved_methods().unwrap(),
            vec![Method::Ridge, Method::LadLasso]
        );
        assert_eq!(c.lambda, Some(0.01));
        assert_eq!(c.n_test, 7);
        assert!(!c.standardize);
        c.apply_kv("lambda", "0.5").unwrap();
        assert_eq!(c.lambda, Some(0.5));
        assert!(c.apply_text("bogus = 1").is_err());
        assert!(c.apply_text("m 3").is_err());
        assert!(c.apply_kv("n", "ten").is_err());
        assert!(c.apply_kv("header", "maybe").is_err());
    }

    #[test]
    fn loss_and_penalty_select_a_method() {
        let mut c = ExperimentConfig::new(ExperimentKind::SincCaseI);
        c.apply_kv("loss", "absolute").unwrap();
        c.apply_kv("penalty", "l1").unwrap();
        assert_eq!(c.resolved_methods().unwrap(), vec![Method::LadLasso]);
        c.apply_kv("loss", "epsilon_insensitive").unwrap();
        assert!(c.resolved_methods().is_err());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new(ExperimentKind::SincCaseI);
        assert!(c.validate().is_ok());
        c.m = Some(vec![0]);
        assert!(c.validate().is_err());
        c.m = Some(vec![20_000]);
        assert!(c.validate().is_err());
        c.m = None;
        c.repetitions = 0;
        assert!(c.validate().is_err());

        let mut lin = ExperimentConfig::new(ExperimentKind::LinearSweep);
        lin.methods = Some(vec![Method::Lad]);
        assert!(lin.validate().is_err());

        let mut csv = ExperimentConfig::new(ExperimentKind::CsvRun);
        csv.train = Some("a.csv".into());
        csv.label = Some(LabelColumn::Index(0));
        assert!(csv.validate().is_err());
        csv.truncation = Some(3.0);
        assert!(csv.validate().is_ok());
        csv.holdout = 1.0;
        assert!(csv.validate().is_err());
    }

    #[test]
    fn rep_seeds_are_distinct() {
        let a = rep_seeds(5, 0);
        let b = rep_seeds(5, 1);
        assert_ne!(a, b);
        assert_ne!(a.train, a.test);
        assert_ne!(a.train, a.partition);
        assert_eq!(a, rep_seeds(5, 0));
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(
            sibling_path(Path::new("/t/res.csv"), "plot"),
            PathBuf::from("/t/res.plot.csv")
        );
        assert_eq!(
            sibling_path(Path::new("out"), "timings"),
            PathBuf::from("out.timings.csv")
        );
    }

    #[test]
    fn table_csv() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x".into()]);
        assert_eq!(t.to_csv(), "a,b\n1,x\n");
        assert_eq!(t.column("b"), Some(1));
    }
}
