//! Partition → parallel local fits → truncation → averaging.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{DkrError, Result};
use crate::kernel::{gram_matrix, KernelSpec};
use crate::losses::{empirical_risk, LossSpec};
use crate::model::{AveragedEstimator, KernelExpansion, TruncationLevel};
use crate::rng::{self, stream};
use crate::solvers::{objective, solve_generic, solve_kernel_ridge, PenaltySpec, SolverOptions};

/// Named loss/penalty pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Quadratic loss, squared RKHS norm.
    Ridge,
    /// Quadratic loss, coefficient L1.
    Lasso,
    /// Epsilon-insensitive loss, squared RKHS norm.
    Svr,
    /// Absolute loss, squared RKHS norm.
    Lad,
    /// Absolute loss, coefficient L1.
    LadLasso,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ridge,
        Method::Lasso,
        Method::Svr,
        Method::Lad,
        Method::LadLasso,
    ];

    pub fn loss(self, epsilon: f64) -> LossSpec {
        match self {
            Method::Ridge | Method::Lasso => LossSpec::Quadratic,
            Method::Svr => LossSpec::EpsilonInsensitive { epsilon },
            Method::Lad | Method::LadLasso => LossSpec::Absolute,
        }
    }

    pub fn penalty(self) -> PenaltySpec {
        match self {
            Method::Ridge | Method::Svr | Method::Lad => PenaltySpec::RkhsNormSq,
            Method::Lasso | Method::LadLasso => PenaltySpec::CoefficientL1,
        }
    }

    /// The method with this loss family and penalty, if any.
    pub fn from_parts(loss: &LossSpec, penalty: PenaltySpec) -> Option<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.penalty() == penalty && m.loss(0.0).name() == loss.name())
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Ridge => "ridge",
            Method::Lasso => "lasso",
            Method::Svr => "svr",
            Method::Lad => "lad",
            Method::LadLasso => "lad-lasso",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = DkrError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| {
                DkrError::invalid(format!(
                    "unknown method {s:?} (ridge, lasso, svr, lad, lad-lasso)"
                ))
            })
    }
}

/// Random assignment of `N` row indices to `m` disjoint segments.
///
/// A seeded uniform permutation is dealt into `m` contiguous blocks whose sizes
/// differ by at most one (the first `N mod m` blocks get the extra row). Each
/// segment's indices are then stored in ascending order, so a segment is a set
/// and `m = 1` reproduces the original row order exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    m: usize,
    seed: u64,
    assignments: Vec<usize>,
    segments: Vec<Vec<usize>>,
}

impl PartitionPlan {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Segment index of every row.
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn segment(&self, j: usize) -> &[usize] {
        &self.segments[j]
    }

    pub fn segments(&self) -> &[Vec<usize>] {
        &self.segments
    }
}

pub fn partition(n: usize, m: usize, seed: u64) -> Result<PartitionPlan> {
    if m == 0 {
        return Err(DkrError::invalid("number of segments must be at least 1"));
    }
    if m > n {
        return Err(DkrError::invalid(format!(
            "cannot split {n} rows into {m} nonempty segments"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream_rng(seed, stream::PARTITION));

    let base = n / m;
    let extra = n % m;
    let mut segments = Vec::with_capacity(m);
    let mut assignments = vec![0; n];
    let mut start = 0;
    for j in 0..m {
        let size = base + usize::from(j < extra);
        let mut block = order[start..start + size].to_vec();
        block.sort_unstable();
        for &i in &block {
            assignments[i] = j;
        }
        segments.push(block);
        start += size;
    }
    Ok(PartitionPlan {
        m,
        seed,
        assignments,
        segments,
    })
}

/// Everything needed to run the distributed fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub kernel: KernelSpec,
    pub loss: LossSpec,
    pub penalty: PenaltySpec,
    pub lambda: f64,
    pub m: usize,
    pub truncation: f64,
    pub solver: SolverOptions,
    /// Seed of the random partition.
    pub seed: u64,
}

impl FitConfig {
    /// Gaussian-kernel configuration for a named method.
    pub fn for_method(
        method: Method,
        bandwidth: f64,
        lambda: f64,
        m: usize,
        truncation: f64,
        epsilon: f64,
        seed: u64,
    ) -> Result<Self> {
        let config = FitConfig {
            kernel: KernelSpec::gaussian(bandwidth)?,
            loss: method.loss(epsilon),
            penalty: method.penalty(),
            lambda,
            m,
            truncation,
            solver: SolverOptions::default(),
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.loss.validate()?;
        self.solver.validate()?;
        TruncationLevel::new(self.truncation)?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(DkrError::invalid(format!(
                "lambda must be nonnegative and finite, got {}",
                self.lambda
            )));
        }
        if self.m == 0 {
            return Err(DkrError::invalid("number of segments must be at least 1"));
        }
        Ok(())
    }

    /// Whether local fits take the closed-form route.
    pub fn uses_closed_form(&self) -> bool {
        self.loss == LossSpec::Quadratic && self.penalty == PenaltySpec::RkhsNormSq
    }
}

/// One fitted segment plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub expansion: KernelExpansion,
    /// Regularized objective on the segment at the returned coefficients.
    pub objective: f64,
    /// Zero for the closed-form route.
    pub iterations: usize,
    pub converged: bool,
    pub gram_seconds: f64,
    pub solve_seconds: f64,
}

/// Fits one segment; the segment's covariates become the expansion centers.
pub fn fit_local(segment: &Dataset, config: &FitConfig) -> Result<LocalFit> {
    config.validate()?;
    let started = Instant::now();
    let gram = gram_matrix(&config.kernel, segment.covariates())?;
    let gram_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let (coefficients, iterations, converged) = if config.uses_closed_form() {
        (
            solve_kernel_ridge(&gram, segment.labels(), config.lambda, &config.solver)?,
            0,
            true,
        )
    } else {
        let report = solve_generic(
            &config.loss,
            &config.penalty,
            &gram,
            segment.labels(),
            config.lambda,
            &config.solver,
        )?;
        (report.coefficients, report.iterations, report.converged)
    };
    let solve_seconds = started.elapsed().as_secs_f64();

    let objective = objective(
        &config.loss,
        &config.penalty,
        &gram,
        segment.labels(),
        config.lambda,
        &coefficients,
    )?;
    let expansion =
        KernelExpansion::new(config.kernel, segment.covariates().clone(), coefficients)?;
    Ok(LocalFit {
        expansion,
        objective,
        iterations,
        converged,
        gram_seconds,
        solve_seconds,
    })
}

/// Solver diagnostics of one segment, in segment order.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport {
    pub segment: usize,
    pub size: usize,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gram_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct DkrFit {
    pub estimator: AveragedEstimator,
    pub plan: PartitionPlan,
    pub segments: Vec<SegmentReport>,
    pub partition_seconds: f64,
}

/// Worker count used when none is given.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

pub fn fit_dkr(data: &Dataset, config: &FitConfig) -> Result<AveragedEstimator> {
    fit_dkr_detailed(data, config, None).map(|fit| fit.estimator)
}

/// Distributed fit on `workers` threads (default: available parallelism).
///
/// Local fits are independent pure functions of their segment and the config,
/// and results are assembled by segment index, so the output does not depend
/// on the worker count or on scheduling. The first failing segment (lowest
/// index) aborts the whole fit.
pub fn fit_dkr_detailed(
    data: &Dataset,
    config: &FitConfig,
    workers: Option<usize>,
) -> Result<DkrFit> {
    config.validate()?;
    let started = Instant::now();
    let plan = partition(data.len(), config.m, config.seed)?;
    let partition_seconds = started.elapsed().as_secs_f64();

    let workers = workers.unwrap_or_else(default_workers).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| DkrError::invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<LocalFit>> = pool.install(|| {
        plan.segments()
            .par_iter()
            .enumerate()
            .map(|(j, rows)| {
                data.subset(rows)
                    .and_then(|segment| fit_local(&segment, config))
                    .map_err(|e| DkrError::Segment {
                        segment: j,
                        source: Box::new(e),
                    })
            })
            .collect()
    });

    let mut locals = Vec::with_capacity(plan.m());
    let mut segments = Vec::with_capacity(plan.m());
    for (j, result) in results.into_iter().enumerate() {
        let fit = result?;
        segments.push(SegmentReport {
            segment: j,
            size: plan.segment(j).len(),
            objective: fit.objective,
            iterations: fit.iterations,
            converged: fit.converged,
            gram_seconds: fit.gram_seconds,
            solve_seconds: fit.solve_seconds,
        });
        locals.push((j, fit.expansion));
    }
    let estimator = AveragedEstimator::new(locals, config.truncation)?;
    Ok(DkrFit {
        estimator,
        plan,
        segments,
        partition_seconds,
    })
}

/// Empirical risk of the averaged predictor over `data`.
pub fn empirical_risk_of_average(
    estimator: &AveragedEstimator,
    data: &Dataset,
    loss: &LossSpec,
) -> Result<f64> {
    let predictions = estimator.predict_many(data.covariates())?;
    empirical_risk(loss, &predictions, data.labels())
}

/// Empirical risk over `data` of every truncated local `T_M[f_j]`, in segment order.
pub fn local_empirical_risks(
    estimator: &AveragedEstimator,
    data: &Dataset,
    loss: &LossSpec,
) -> Result<Vec<f64>> {
    (0..estimator.m())
        .map(|j| empirical_risk_of_average(&estimator.single_local(j)?, data, loss))
        .collect()
}
