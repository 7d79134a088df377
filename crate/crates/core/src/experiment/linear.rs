use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{
    echo_row, echo_table, rep_seeds, ExperimentConfig, ExperimentKind, ExperimentOutput, Table,
};
use crate::data::{gen_linear, Dataset};
use crate::dkr::{partition, Method};
use crate::error::{DkrError, Result};
use crate::eval::{estimation_errors, EstimationErrors};

/// Linear ridge on the rows `indices` of `data`:
/// `(XᵀX + nλI) β = Xᵀy`, the minimizer of `(1/n)‖y − Xβ‖² + λ‖β‖²`.
pub fn linear_ridge(data: &Dataset, indices: &[usize], lambda: f64) -> Result<Vec<f64>> {
    if indices.is_empty() {
        return Err(DkrError::invalid("linear ridge on an empty segment"));
    }
    let d = data.dim();
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut b = DVector::<f64>::zeros(d);
    for &i in indices {
        let x = data.covariates().row(i);
        let y = data.labels()[i];
        for r in 0..d {
            b[r] += x[r] * y;
            for c in 0..=r {
                a[(r, c)] += x[r] * x[c];
            }
        }
    }
    let ridge = indices.len() as f64 * lambda;
    for r in 0..d {
        a[(r, r)] += ridge;
        for c in 0..r {
            a[(c, r)] = a[(r, c)];
        }
    }
    let chol = Cholesky::new(a).ok_or_else(|| {
        DkrError::Numerical(format!(
            "linear ridge system is singular (n = {}, d = {d}, lambda = {lambda})",
            indices.len()
        ))
    })?;
    Ok(chol.solve(&b).as_slice().to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRow {
    pub m: usize,
    /// Errors averaged over repetitions.
    pub errors: EstimationErrors,
}

#[derive(Debug, Clone)]
pub struct LinearReport {
    pub config: ExperimentConfig,
    pub lambda: f64,
    pub rows: Vec<LinearRow>,
    /// Mean seconds spent on the local fits of each `m`, in row order.
    pub seconds: Vec<f64>,
}

/// Distributed linear ridge over a sweep of `m`, in the native parameter space.
///
/// Each repetition draws fresh data and a fresh true `β`; `e1` uses the
/// full-data ridge estimate at the same `λ`.
pub fn run_linear_sweep(config: &ExperimentConfig) -> Result<LinearReport> {
    if config.experiment != ExperimentKind::LinearSweep {
        return Err(DkrError::invalid(
            "run_linear_sweep needs a linear-sweep config",
        ));
    }
    config.validate()?;
    let ms = config.m_values();
    let lambda = config.lambda_for(Method::Ridge);
    let n = config.train_size();
    let all: Vec<usize> = (0..n).collect();
    let mut sums = vec![[0.0; 3]; ms.len()];
    let mut seconds = vec![0.0; ms.len()];
    for rep in 0..config.repetitions {
        let seeds = rep_seeds(config.seed, rep);
        let (data, beta) = gen_linear(n, config.d, config.noise_sigma(), seeds.train)?;
        let full = linear_ridge(&data, &all, lambda)?;
        for (k, &m) in ms.iter().enumerate() {
            let started = Instant::now();
            let plan = partition(n, m, seeds.partition)?;
            let locals = plan
                .segments()
                .iter()
                .map(|rows| linear_ridge(&data, rows, lambda))
                .collect::<Result<Vec<_>>>()?;
            seconds[k] += started.elapsed().as_secs_f64();
            let e = estimation_errors(&beta, &full, &locals)?;
            sums[k][0] += e.e1;
            sums[k][1] += e.e2;
            sums[k][2] += e.e3;
        }
    }
    let reps = config.repetitions as f64;
    let rows = ms
        .iter()
        .zip(&sums)
        .map(|(&m, s)| LinearRow {
            m,
            errors: EstimationErrors {
                e1: s[0] / reps,
                e2: s[1] / reps,
                e3: s[2] / reps,
            },
        })
        .collect();
    Ok(LinearReport {
        config: config.clone(),
        lambda,
        rows,
        seconds: seconds.iter().map(|s| s / reps).collect(),
    })
}

impl LinearReport {
    pub fn row(&self, m: usize) -> Option<&LinearRow> {
        self.rows.iter().find(|r| r.m == m)
    }

    pub fn output(&self) -> ExperimentOutput {
        let mut results = echo_table(&self.config, &["method", "lambda", "m", "e1", "e2", "e3"]);
        let mut plot = Table::new(&["m", "e1", "e2", "e3"]);
        let mut timings = Table::new(&["experiment", "method", "m", "seed", "fit_seconds"]);
        for (r, secs) in self.rows.iter().zip(&self.seconds) {
            timings.push(vec![
                self.config.experiment.name().to_string(),
                Method::Ridge.name().to_string(),
                r.m.to_string(),
                self.config.seed.to_string(),
                secs.to_string(),
            ]);
            let e = r.errors;
            results.push(echo_row(
                &self.config,
                vec![
                    Method::Ridge.name().to_string(),
                    self.lambda.to_string(),
                    r.m.to_string(),
                    e.e1.to_string(),
                    e.e2.to_string(),
                    e.e3.to_string(),
                ],
            ));
            plot.push(vec![
                r.m.to_string(),
                e.e1.to_string(),
                e.e2.to_string(),
                e.e3.to_string(),
            ]);
        }
        ExperimentOutput {
            results,
            timings,
            plot,
        }
    }
}
