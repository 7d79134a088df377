//! Test RMSE, linear estimation errors and fit timing.

use serde::Serialize;

use crate::data::Dataset;
use crate::dkr::{fit_dkr_detailed, FitConfig};
use crate::error::{DkrError, Result};
use crate::model::AveragedEstimator;

/// Root mean squared error of the averaged predictor on `test`.
pub fn rmse(estimator: &AveragedEstimator, test: &Dataset) -> Result<f64> {
    let predictions = estimator.predict_many(test.covariates())?;
    rmse_of(&predictions, test.labels())
}

/// RMSE between two equal-length vectors.
pub fn rmse_of(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if labels.is_empty() {
        return Err(DkrError::invalid("RMSE of an empty test set"));
    }
    if predictions.len() != labels.len() {
        return Err(DkrError::DimensionMismatch {
            expected: labels.len(),
            found: predictions.len(),
        });
    }
    let sse: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok((sse / labels.len() as f64).sqrt())
}

/// Squared distances to the true parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimationErrors {
    /// Full-data estimate.
    pub e1: f64,
    /// Mean of the local estimates.
    pub e2: f64,
    /// Best single local estimate.
    pub e3: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(DkrError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

pub fn estimation_errors(
    beta_true: &[f64],
    beta_full: &[f64],
    beta_locals: &[Vec<f64>],
) -> Result<EstimationErrors> {
    if beta_locals.is_empty() {
        return Err(DkrError::invalid("at least one local estimate is required"));
    }
    let d = beta_true.len();
    let e1 = squared_distance(beta_true, beta_full)?;
    let mut mean = vec![0.0; d];
    let mut e3 = f64::INFINITY;
    for local in beta_locals {
        e3 = e3.min(squared_distance(beta_true, local)?);
        for (acc, b) in mean.iter_mut().zip(local) {
            *acc += b;
        }
    }
    for v in &mut mean {
        *v /= beta_locals.len() as f64;
    }
    let e2 = squared_distance(beta_true, &mean)?;
    Ok(EstimationErrors { e1, e2, e3 })
}

/// Timings of one fit, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTiming {
    pub partition_seconds: f64,
    pub gram_seconds: f64,
    /// Sum of per-segment solve times.
    pub solve_seconds: f64,
    /// Largest per-segment solve time.
    pub critical_path_seconds: f64,
    pub per_segment_seconds: Vec<f64>,
}

/// Averaged timings over repeated fits.
///
/// `fit_seconds` is the total sequential solver time; `critical_path_seconds`
/// is the slowest segment, i.e. the parallel cost of the solve phase. Partition
/// and Gram construction are reported separately and excluded from both.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    /// In-sample RMSE of the fitted estimator.
    pub rmse: f64,
    pub fit_seconds: f64,
    pub critical_path_seconds: f64,
    pub partition_seconds: f64,
    pub gram_seconds: f64,
    /// Mean solve time of each segment across runs.
    pub per_segment_seconds: Vec<f64>,
    pub runs: Vec<RunTiming>,
    pub config: FitConfig,
}

impl MetricReport {
    /// Column order of [`MetricReport::to_csv_row`].
    pub const CSV_HEADER: &'static str =
        "kernel,bandwidth,loss,epsilon,penalty,lambda,m,truncation,seed,\
repeats,rmse,fit_seconds,critical_path_seconds,partition_seconds,gram_seconds";

    pub fn to_csv_row(&self) -> String {
        let c = &self.config;
        let bandwidth = match c.kernel {
            crate::kernel::KernelSpec::Gaussian { bandwidth } => bandwidth,
        };
        let epsilon = match c.loss {
            crate::losses::LossSpec::EpsilonInsensitive { epsilon } => epsilon.to_string(),
            _ => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.kernel.family_name(),
            bandwidth,
            c.loss.name(),
            epsilon,
            c.penalty.name(),
            c.lambda,
            c.m,
            c.truncation,
            c.seed,
            self.runs.len(),
            self.rmse,
            self.fit_seconds,
            self.critical_path_seconds,
            self.partition_seconds,
            self.gram_seconds
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric report serializes")
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count as f64
}

/// Fits `repeats` times on one worker and averages the timings.
pub fn time_fit(data: &Dataset, config: &FitConfig, repeats: usize) -> Result<MetricReport> {
    if repeats == 0 {
        return Err(DkrError::invalid("repeats must be at least 1"));
    }
    let mut runs = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let fit = fit_dkr_detailed(data, config, Some(1))?;
        let per_segment: Vec<f64> = fit.segments.iter().map(|s| s.solve_seconds).collect();
        runs.push(RunTiming {
            partition_seconds: fit.partition_seconds,
            gram_seconds: fit.segments.iter().map(|s| s.gram_seconds).sum(),
            solve_seconds: per_segment.iter().sum(),
            critical_path_seconds: per_segment.iter().copied().fold(0.0, f64::max),
            per_segment_seconds: per_segment,
        });
        last = Some(fit.estimator);
    }
    let estimator = last.expect("at least one run");
    let m = config.m;
    let per_segment_seconds = (0..m)
        .map(|j| mean(runs.iter().map(|r| r.per_segment_seconds[j])))
        .collect();
    Ok(MetricReport {
        rmse: rmse(&estimator, data)?,
        fit_seconds: mean(runs.iter().map(|r| r.solve_seconds)),
        critical_path_seconds: mean(runs.iter().map(|r| r.critical_path_seconds)),
        partition_seconds: mean(runs.iter().map(|r| r.partition_seconds)),
        gram_seconds: mean(runs.iter().map(|r| r.gram_seconds)),
        per_segment_seconds,
        runs,
        config: *config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_sinc, NoiseSpec};
    use crate::dkr::{fit_dkr, Method};
    use crate::points::Points;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rmse_by_hand() {
        assert_eq!(rmse_of(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 0.0);
        assert_eq!(rmse_of(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert!(rmse_of(&[], &[]).is_err());
        assert!(rmse_of(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rmse_matches_loop() {
        let train = gen_sinc(80, NoiseSpec::Gaussian { sigma: 0.2 }, 1).unwrap();
        let test = gen_sinc(50, NoiseSpec::None, 2).unwrap();
        let cfg = FitConfig::for_method(Method::Ridge, 0.1, 1e-3, 4, 1.0, 0.1, 3).unwrap();
        let est = fit_dkr(&train, &cfg).unwrap();
        let mut sse = 0.0;
        for (x, y) in test.covariates().rows().zip(test.labels()) {
            let p = est.predict(x).unwrap();
            sse += (p - y) * (p - y);
        }
        let want = (sse / 50.0).sqrt();
        assert!((rmse(&est, &test).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn rmse_empty_test_set() {
        let train = gen_sinc(10, NoiseSpec::None, 1).unwrap();
        let cfg = FitConfig::for_method(Method::Ridge, 0.1, 1e-3, 1, 1.0, 0.1, 3).unwrap();
        let est = fit_dkr(&train, &cfg).unwrap();
        assert!(est
            .predict_many(&Points::empty(2).unwrap())
            .unwrap()
            .is_empty());
        assert!(rmse_of(&[], &[]).is_err());
    }

    #[test]
    fn estimation_error_cases() {
        let beta = vec![0.2, 0.7, 0.1];
        let e = estimation_errors(&beta, &beta, &[beta.clone(), beta.clone()]).unwrap();
        assert_eq!((e.e1, e.e2, e.e3), (0.0, 0.0, 0.0));

        let delta = [0.1, -0.2, 0.3];
        let plus: Vec<f64> = beta.iter().zip(&delta).map(|(b, d)| b + d).collect();
        let minus: Vec<f64> = beta.iter().zip(&delta).map(|(b, d)| b - d).collect();
        let e = estimation_errors(&beta, &plus, &[plus.clone(), minus]).unwrap();
        assert!(e.e2 < 1e-30);
        assert!((e.e3 - 0.14).abs() < 1e-12);
        assert!((e.e1 - 0.14).abs() < 1e-12);

        let locals = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ];
        let e = estimation_errors(&[0.0; 3], &[1.0, 1.0, 1.0], &locals).unwrap();
        assert!((e.e1 - 3.0).abs() < 1e-12);
        // mean = (1/3, 1/3, 2/3)
        assert!((e.e2 - 6.0 / 9.0).abs() < 1e-12);
        assert!((e.e3 - 1.0).abs() < 1e-12);

        assert!(estimation_errors(&beta, &beta, &[]).is_err());
        assert!(estimation_errors(&beta, &beta, &[vec![1.0]]).is_err());
        assert!(estimation_errors(&beta, &[1.0], std::slice::from_ref(&beta)).is_err());
    }

    #[test]
    fn time_fit_bookkeeping() {
        let data = gen_sinc(60, NoiseSpec::Gaussian { sigma: 0.2 }, 4).unwrap();
        let cfg = FitConfig::for_method(Method::Ridge, 0.1, 1e-3, 3, 1.0, 0.1, 3).unwrap();
        let report = time_fit(&data, &cfg, 3).unwrap();
        assert_eq!(report.runs.len(), 3);
        assert_eq!(report.per_segment_seconds.len(), 3);
        let avg = report.runs.iter().map(|r| r.solve_seconds).sum::<f64>() / 3.0;
        assert!((report.fit_seconds - avg).abs() < 1e-15);
        for r in &report.runs {
            assert!(r.critical_path_seconds <= r.solve_seconds + 1e-15);
            assert!(r.per_segment_seconds.iter().all(|&t| t >= 0.0));
        }
        assert!(report.rmse >= 0.0);
        let row = report.to_csv_row();
        assert_eq!(
            row.split(',').count(),
            MetricReport::CSV_HEADER.split(',').count()
        );
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["runs"].as_array().unwrap().len(), 3);
        assert!(time_fit(&data, &cfg, 0).is_err());
    }

    #[test]
    fn degenerate_segments_are_cheap() {
        let tiny = gen_sinc(50, NoiseSpec::None, 1).unwrap();
        let cfg = FitConfig::for_method(Method::Ridge, 0.05, 1e-3, 50, 1.0, 0.1, 1).unwrap();
        let tiny_report = time_fit(&tiny, &cfg, 1).unwrap();
        let big = gen_sinc(2000, NoiseSpec::Gaussian { sigma: 0.2 }, 1).unwrap();
        let cfg = FitConfig { m: 2, ..cfg };
        let big_report = time_fit(&big, &cfg, 1).unwrap();
        assert!(tiny_report.critical_path_seconds < 1e-3);
        assert!(tiny_report.critical_path_seconds < big_report.critical_path_seconds);
    }

    proptest! {
        #[test]
        fn rmse_ignores_row_order(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..40);
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.reverse();
            idx.rotate_left(n / 3);
            let pp: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
            let yy: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let a = rmse_of(&p, &y).unwrap();
            let b = rmse_of(&pp, &yy).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }

        #[test]
        fn e3_is_a_minimum(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = rng.random_range(1..6);
            let k = rng.random_range(1..6);
            let beta: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            let locals: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..2.0)).collect())
                .collect();
            let e = estimation_errors(&beta, &beta, &locals).unwrap();
            prop_assert!(e.e2 >= 0.0);
            for l in &locals {
                let dist: f64 = beta.iter().zip(l).map(|(a, b)| (a - b) * (a - b)).sum();
                prop_assert!(e.e3 <= dist);
            }
        }
    }
}
