use rand::seq::SliceRandom;

use super::sinc::fit_config;
use super::{
    echo_row, echo_table, rep_seeds, ExperimentConfig, ExperimentKind, ExperimentOutput, Table,
};
use crate::data::{load_csv, standardize, CsvOptions, Dataset};
use crate::dkr::{fit_dkr_detailed, Method};
use crate::error::{DkrError, Result};
use crate::eval::rmse;
use crate::rng::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub method: Method,
    pub lambda: f64,
    pub m: usize,
    /// Test RMSE averaged over repetitions (each with its own partition).
    pub rmse: f64,
}

#[derive(Debug, Clone)]
pub struct CsvReport {
    pub config: ExperimentConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub rows: Vec<CsvRow>,
    /// Mean sequential and critical-path solve seconds, in row order.
    pub timings: Vec<(f64, f64)>,
}

/// Seeded split of `data` into (train, test) with `fraction` of rows held out.
pub fn holdout_split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = data.len();
    let n_test = ((n as f64) * fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(DkrError::invalid(format!(
            "holdout fraction {fraction} leaves no training or no test rows out of {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream_rng(seed, stream::SHUFFLE));
    let (test, train) = order.split_at_mut(n_test);
    test.sort_unstable();
    train.sort_unstable();
    Ok((data.subset(train)?, data.subset(test)?))
}

/// DKR on user data: test RMSE per `(method, m)`.
///
/// Covariates are standardized with the training split's statistics unless
/// `standardize` is off. Without a test file a seeded holdout split is used.
pub fn run_csv(config: &ExperimentConfig) -> Result<CsvReport> {
    if config.experiment != ExperimentKind::CsvRun {
        return Err(DkrError::invalid("run_csv needs a csv-run config"));
    }
    config.validate()?;
    let options = CsvOptions {
        has_header: config.header,
    };
    let label = config.label.as_ref().expect("validated");
    let full = load_csv(config.train.as_ref().expect("validated"), label, options)?;
    let (train, test) = match &config.test {
        Some(path) => (full, load_csv(path, label, options)?),
        None => holdout_split(&full, config.holdout, config.seed)?,
    };
    if train.dim() != test.dim() {
        return Err(DkrError::DimensionMismatch {
            expected: train.dim(),
            found: test.dim(),
        });
    }
    let (train, test) = if config.standardize {
        let (train_std, transform) = standardize(&train)?;
        (train_std, transform.apply(&test)?)
    } else {
        (train, test)
    };

    let ms = config.m_values();
    if let Some(&m) = ms.iter().find(|&&m| m > train.len()) {
        return Err(DkrError::invalid(format!(
            "m = {m} exceeds the {} training rows",
            train.len()
        )));
    }
    let methods = config.resolved_methods()?;
    let mut sums = vec![[0.0; 3]; methods.len() * ms.len()];
    for rep in 0..config.repetitions {
        let seeds = rep_seeds(config.seed, rep);
        for (a, &method) in methods.iter().enumerate() {
            for (b, &m) in ms.iter().enumerate() {
                let fit = fit_dkr_detailed(
                    &train,
                    &fit_config(config, method, m, seeds.partition)?,
                    config.workers,
                )?;
                let s = &mut sums[a * ms.len() + b];
                s[0] += rmse(&fit.estimator, &test)?;
                s[1] += fit.segments.iter().map(|r| r.solve_seconds).sum::<f64>();
                s[2] += fit
                    .segments
                    .iter()
                    .map(|r| r.solve_seconds)
                    .fold(0.0, f64::max);
            }
        }
    }
    let reps = config.repetitions as f64;
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (a, &method) in methods.iter().enumerate() {
        for (b, &m) in ms.iter().enumerate() {
            let s = sums[a * ms.len() + b];
            rows.push(CsvRow {
                method,
                lambda: config.lambda_for(method),
                m,
                rmse: s[0] / reps,
            });
            timings.push((s[1] / reps, s[2] / reps));
        }
    }
    Ok(CsvReport {
        config: config.clone(),
        n_train: train.len(),
        n_test: test.len(),
        rows,
        timings,
    })
}

impl CsvReport {
    pub fn row(&self, method: Method, m: usize) -> Option<&CsvRow> {
        self.rows.iter().find(|r| r.method == method && r.m == m)
    }

    pub fn output(&self) -> ExperimentOutput {
        let mut results = echo_table(
            &self.config,
            &["n_train", "n_test_rows", "method", "lambda", "m", "rmse"],
        );
        let mut plot = Table::new(&["method", "m", "rmse"]);
        let mut timings = Table::new(&[
            "experiment",
            "method",
            "m",
            "seed",
            "fit_seconds",
            "critical_path_seconds",
        ]);
        for (r, t) in self.rows.iter().zip(&self.timings) {
            results.push(echo_row(
                &self.config,
                vec![
                    self.n_train.to_string(),
                    self.n_test.to_string(),
                    r.method.name().to_string(),
                    r.lambda.to_string(),
                    r.m.to_string(),
                    r.rmse.to_string(),
                ],
            ));
            plot.push(vec![
                r.method.name().to_string(),
                r.m.to_string(),
                r.rmse.to_string(),
            ]);
            timings.push(vec![
                self.config.experiment.name().to_string(),
                r.method.name().to_string(),
                r.m.to_string(),
                self.config.seed.to_string(),
                t.0.to_string(),
                t.1.to_string(),
            ]);
        }
        ExperimentOutput {
            results,
            timings,
            plot,
        }
    }
}
