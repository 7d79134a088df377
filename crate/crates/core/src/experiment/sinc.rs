use super::{
    echo_row, echo_table, rep_seeds, ExperimentConfig, ExperimentKind, ExperimentOutput, Table,
};
use crate::data::{gen_sinc, gen_sinc_mixture, Dataset, NoiseSpec};
use crate::dkr::{fit_dkr_detailed, FitConfig, Method};
use crate::error::{DkrError, Result};
use crate::eval::rmse;

/// One `(method, m)` cell, averaged over repetitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SincRow {
    pub method: Method,
    pub lambda: f64,
    pub m: usize,
    /// Test RMSE of the averaged estimator.
    pub rmse_average: f64,
    /// Test RMSE of the first truncated local estimator alone.
    pub rmse_first: f64,
    /// Averaged prediction at the surface peak (0.5, 0.5), where the truth is 1.
    pub center_prediction: f64,
}

/// Solver timings of one cell, averaged over repetitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellTiming {
    pub solve_seconds: f64,
    pub critical_path_seconds: f64,
    pub gram_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SincReport {
    pub config: ExperimentConfig,
    /// Ordered by method, then by `m`.
    pub rows: Vec<SincRow>,
    pub timings: Vec<CellTiming>,
}

/// Training sample of one repetition.
pub fn sinc_training_data(config: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    let n = config.train_size();
    match config.experiment {
        ExperimentKind::SincCaseI => gen_sinc(
            n,
            NoiseSpec::Gaussian {
                sigma: config.noise_sigma(),
            },
            seed,
        ),
        ExperimentKind::SincCaseII => {
            let n_outlier = (n as f64 * config.outlier_fraction).round() as usize;
            gen_sinc_mixture(
                n - n_outlier,
                n_outlier,
                config.noise_sigma(),
                config.outlier_lo,
                config.outlier_hi,
                seed,
            )
        }
        _ => Err(DkrError::invalid(
            "sinc data needs a sinc-case1 or sinc-case2 config",
        )),
    }
}

/// Noiseless test sample of one repetition.
pub fn sinc_test_data(config: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    gen_sinc(config.n_test, NoiseSpec::None, seed)
}

pub(super) fn fit_config(
    config: &ExperimentConfig,
    method: Method,
    m: usize,
    seed: u64,
) -> Result<FitConfig> {
    let mut fit = FitConfig::for_method(
        method,
        config.tau,
        config.lambda_for(method),
        m,
        config.truncation_level()?,
        config.epsilon,
        seed,
    )?;
    fit.solver = config.solver;
    Ok(fit)
}

/// RMSE of the averaged and first-local estimators over a sweep of `m`.
pub fn run_sinc_case(config: &ExperimentConfig) -> Result<SincReport> {
    if !matches!(
        config.experiment,
        ExperimentKind::SincCaseI | ExperimentKind::SincCaseII
    ) {
        return Err(DkrError::invalid(
            "run_sinc_case needs a sinc-case1 or sinc-case2 config",
        ));
    }
    config.validate()?;
    let ms = config.m_values();
    let methods = config.resolved_methods()?;
    let cells = methods.len() * ms.len();
    let mut sums = vec![[0.0; 6]; cells];
    for rep in 0..config.repetitions {
        let seeds = rep_seeds(config.seed, rep);
        let train = sinc_training_data(config, seeds.train)?;
        let test = sinc_test_data(config, seeds.test)?;
        for (a, &method) in methods.iter().enumerate() {
            for (b, &m) in ms.iter().enumerate() {
                let fit_cfg = fit_config(config, method, m, seeds.partition)?;
                let fit = fit_dkr_detailed(&train, &fit_cfg, config.workers)?;
                let est = &fit.estimator;
                let s = &mut sums[a * ms.len() + b];
                s[0] += rmse(est, &test)?;
                s[1] += rmse(&est.single_local(0)?, &test)?;
                s[2] += est.predict(&[0.5, 0.5])?;
                s[3] += fit.segments.iter().map(|r| r.solve_seconds).sum::<f64>();
                s[4] += fit
                    .segments
                    .iter()
                    .map(|r| r.solve_seconds)
                    .fold(0.0, f64::max);
                s[5] += fit.segments.iter().map(|r| r.gram_seconds).sum::<f64>();
            }
        }
    }
    let reps = config.repetitions as f64;
    let mut rows = Vec::with_capacity(cells);
    let mut timings = Vec::with_capacity(cells);
    for (a, &method) in methods.iter().enumerate() {
        for (b, &m) in ms.iter().enumerate() {
            let s = sums[a * ms.len() + b];
            rows.push(SincRow {
                method,
                lambda: config.lambda_for(method),
                m,
                rmse_average: s[0] / reps,
                rmse_first: s[1] / reps,
                center_prediction: s[2] / reps,
            });
            timings.push(CellTiming {
                solve_seconds: s[3] / reps,
                critical_path_seconds: s[4] / reps,
                gram_seconds: s[5] / reps,
            });
        }
    }
    Ok(SincReport {
        config: config.clone(),
        rows,
        timings,
    })
}

impl SincReport {
    pub fn row(&self, method: Method, m: usize) -> Option<&SincRow> {
        self.rows.iter().find(|r| r.method == method && r.m == m)
    }

    pub fn output(&self) -> ExperimentOutput {
        let mut results = echo_table(
            &self.config,
            &[
                "method",
                "lambda",
                "m",
                "rmse_average",
                "rmse_first_local",
                "center_prediction",
            ],
        );
        let mut plot = Table::new(&["method", "m", "rmse_average", "rmse_first_local"]);
        let mut timings = Table::new(&[
            "experiment",
            "method",
            "m",
            "seed",
            "fit_seconds",
            "critical_path_seconds",
            "gram_seconds",
        ]);
        for (r, t) in self.rows.iter().zip(&self.timings) {
            results.push(echo_row(
                &self.config,
                vec![
                    r.method.name().to_string(),
                    r.lambda.to_string(),
                    r.m.to_string(),
                    r.rmse_average.to_string(),
                    r.rmse_first.to_string(),
                    r.center_prediction.to_string(),
                ],
            ));
            plot.push(vec![
                r.method.name().to_string(),
                r.m.to_string(),
                r.rmse_average.to_string(),
                r.rmse_first.to_string(),
            ]);
            timings.push(vec![
                self.config.experiment.name().to_string(),
                r.method.name().to_string(),
                r.m.to_string(),
                self.config.seed.to_string(),
                t.solve_seconds.to_string(),
                t.critical_path_seconds.to_string(),
                t.gram_seconds.to_string(),
            ]);
        }
        ExperimentOutput {
            results,
            timings,
            plot,
        }
    }
}
