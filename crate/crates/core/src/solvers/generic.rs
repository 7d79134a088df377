use nalgebra::{DMatrix, DVector};

use super::{check_problem, PenaltySpec, SolverOptions};
use crate::error::{DkrError, Result};
use crate::kernel::GramMatrix;
use crate::losses::{risk_unchecked, LossSpec};

/// Iterations over which the best objective must keep improving.
const SMOOTH_WINDOW: usize = 20;
const NONSMOOTH_WINDOW: usize = 200;
/// `Gα` is tracked incrementally on the RKHS path and recomputed this often.
const RESYNC_EVERY: usize = 64;
const MAX_STEP_DOUBLINGS: usize = 60;
const MAX_STEP_HALVINGS: usize = 120;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Best iterate found.
    pub coefficients: Vec<f64>,
    /// Objective at `coefficients`, recomputed from scratch.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective so far after each iteration; entry 0 is the starting point.
    pub best_history: Vec<f64>,
}

/// Minimizes `E_S(Gα) + λ·penalty(α)` starting from `α = 0`.
///
/// Smooth losses use accelerated proximal gradient with backtracking and
/// function-value restarts. Nonsmooth losses use proximal subgradient steps
/// `a / (1 + √t)`. With the RKHS penalty, steps are taken in the kernel
/// metric: the direction is `s/n + 2λα` where `s` holds the loss
/// subgradients at the current predictions, so the penalty's shrinkage is
/// part of the step. With the coefficient L1 penalty, steps use the
/// Euclidean gradient `G s / n` followed by soft-thresholding.
///
/// The best iterate is tracked (first one wins ties). Hitting
/// `max_iterations` is not an error; the report is returned with
/// `converged = false`.
pub fn solve_generic(
    loss: &LossSpec,
    penalty: &PenaltySpec,
    gram: &GramMatrix,
    labels: &[f64],
    lambda: f64,
    options: &SolverOptions,
) -> Result<SolveReport> {
    check_problem(gram, labels, lambda)?;
    loss.validate()?;
    options.validate()?;
    let problem = Problem {
        loss: *loss,
        penalty: *penalty,
        g: gram.as_matrix(),
        y: labels,
        lambda,
        n: labels.len() as f64,
    };
    let mut tracker = if loss.is_smooth() {
        accelerated(&problem, options)?
    } else {
        subgradient(&problem, options)?
    };
    let coefficients = std::mem::take(&mut tracker.best_alpha);
    let objective = problem.objective_of(&coefficients);
    if !objective.is_finite() {
        return Err(DkrError::Numerical(
            "objective is not finite at the returned iterate".into(),
        ));
    }
    Ok(SolveReport {
        coefficients: coefficients.as_slice().to_vec(),
        objective,
        iterations: tracker.history.len() - 1,
        converged: tracker.converged,
        best_history: tracker.history,
    })
}

struct Problem<'a> {
    loss: LossSpec,
    penalty: PenaltySpec,
    g: &'a DMatrix<f64>,
    y: &'a [f64],
    lambda: f64,
    n: f64,
}

impl Problem<'_> {
    fn objective(&self, alpha: &DVector<f64>, p: &DVector<f64>) -> f64 {
        risk_unchecked(&self.loss, p.as_slice(), self.y)
            + self.lambda * self.penalty.value(alpha.as_slice(), p.as_slice())
    }

    fn objective_of(&self, alpha: &DVector<f64>) -> f64 {
        let p = self.g * alpha;
        self.objective(alpha, &p)
    }

    fn risk(&self, p: &DVector<f64>) -> f64 {
        risk_unchecked(&self.loss, p.as_slice(), self.y)
    }

    /// Loss subgradients divided by `n`.
    fn scaled_subgradients(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            p.len(),
            p.iter()
                .zip(self.y)
                .map(|(&pi, &yi)| self.loss.subgradient(pi, yi) / self.n),
        )
    }

    fn matvec(&self, v: &DVector<f64>, out: &mut DVector<f64>) {
        out.gemv(1.0, self.g, v, 0.0);
    }
}

struct Tracker {
    best_alpha: DVector<f64>,
    best: f64,
    history: Vec<f64>,
    converged: bool,
    window: usize,
    tolerance: f64,
}

impl Tracker {
    fn new(alpha: DVector<f64>, objective: f64, window: usize, tolerance: f64) -> Result<Self> {
        check_finite(objective)?;
        Ok(Tracker {
            best_alpha: alpha,
            best: objective,
            history: vec![objective],
            converged: false,
            window,
            tolerance,
        })
    }

    /// Records an iterate; returns true once progress has stalled.
    fn record(&mut self, alpha: &DVector<f64>, objective: f64) -> Result<bool> {
        check_finite(objective)?;
        if objective < self.best {
            self.best = objective;
            self.best_alpha.copy_from(alpha);
        }
        self.history.push(self.best);
        let k = self.history.len() - 1;
        if k >= self.window {
            let gain = self.history[k - self.window] - self.best;
            if gain <= self.tolerance * self.best.abs() {
                self.converged = true;
            }
        }
        Ok(self.converged)
    }
}

fn check_finite(objective: f64) -> Result<()> {
    if objective.is_finite() {
        Ok(())
    } else {
        Err(DkrError::Numerical(format!("objective became {objective}")))
    }
}

fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

fn l1_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

/// One proximal-gradient candidate from `(alpha, p)` with step `eta`.
///
/// RKHS path: `α - η d`, `Gα - η Gd` with `d = s/n + 2λα`.
/// L1 path: `soft(α - η G s/n, ηλ)`, with a fresh product for `Gα`.
struct StepDirection {
    /// RKHS: `d`. L1: Euclidean risk gradient `G s / n`.
    d: DVector<f64>,
    /// RKHS only: `G d`.
    gd: DVector<f64>,
}

impl Problem<'_> {
    fn direction(
        &self,
        alpha: &DVector<f64>,
        p: &DVector<f64>,
        scratch: &mut DVector<f64>,
    ) -> StepDirection {
        let s = self.scaled_subgradients(p);
        self.matvec(&s, scratch);
        match self.penalty {
            PenaltySpec::RkhsNormSq => {
                let mut d = s;
                d.axpy(2.0 * self.lambda, alpha, 1.0);
                let mut gd = scratch.clone();
                gd.axpy(2.0 * self.lambda, p, 1.0);
                StepDirection { d, gd }
            }
            PenaltySpec::CoefficientL1 => StepDirection {
                d: scratch.clone(),
                gd: DVector::zeros(0),
            },
        }
    }

    fn take_step(
        &self,
        alpha: &DVector<f64>,
        p: &DVector<f64>,
        dir: &StepDirection,
        eta: f64,
        out_alpha: &mut DVector<f64>,
        out_p: &mut DVector<f64>,
    ) {
        match self.penalty {
            PenaltySpec::RkhsNormSq => {
                out_alpha.copy_from(alpha);
                out_alpha.axpy(-eta, &dir.d, 1.0);
                out_p.copy_from(p);
                out_p.axpy(-eta, &dir.gd, 1.0);
            }
            PenaltySpec::CoefficientL1 => {
                let threshold = eta * self.lambda;
                for i in 0..alpha.len() {
                    out_alpha[i] = soft_threshold(alpha[i] - eta * dir.d[i], threshold);
                }
                self.matvec(out_alpha, out_p);
            }
        }
    }

    /// Quadratic upper-bound test for the smooth part at step `eta`.
    fn sufficient_decrease(
        &self,
        alpha: &DVector<f64>,
        smooth_at_alpha: f64,
        dir: &StepDirection,
        eta: f64,
        cand_alpha: &DVector<f64>,
        cand_p: &DVector<f64>,
    ) -> bool {
        match self.penalty {
            PenaltySpec::RkhsNormSq => {
                let smooth = self.objective(cand_alpha, cand_p);
                smooth <= smooth_at_alpha - 0.5 * eta * dir.d.dot(&dir.gd)
            }
            PenaltySpec::CoefficientL1 => {
                let delta = cand_alpha - alpha;
                let bound =
                    smooth_at_alpha + dir.d.dot(&delta) + delta.norm_squared() / (2.0 * eta);
                self.risk(cand_p) <= bound
            }
        }
    }

    /// The differentiable part of the objective (everything but the L1 term).
    fn smooth_part(&self, alpha: &DVector<f64>, p: &DVector<f64>) -> f64 {
        match self.penalty {
            PenaltySpec::RkhsNormSq => self.objective(alpha, p),
            PenaltySpec::CoefficientL1 => self.risk(p),
        }
    }

    fn total(&self, alpha: &DVector<f64>, p: &DVector<f64>) -> f64 {
        match self.penalty {
            PenaltySpec::RkhsNormSq => self.objective(alpha, p),
            PenaltySpec::CoefficientL1 => self.risk(p) + self.lambda * l1_norm(alpha),
        }
    }
}

fn accelerated(problem: &Problem<'_>, options: &SolverOptions) -> Result<Tracker> {
    let n = problem.y.len();
    let mut x = DVector::<f64>::zeros(n);
    let mut px = DVector::<f64>::zeros(n);
    let mut y = x.clone();
    let mut py = px.clone();
    let mut cand = x.clone();
    let mut pcand = px.clone();
    let mut scratch = DVector::<f64>::zeros(n);
    let mut fx = problem.total(&x, &px);
    let mut tracker = Tracker::new(x.clone(), fx, SMOOTH_WINDOW, options.tolerance)?;
    let mut t = 1.0f64;
    let mut eta = 1.0f64;

    for k in 0..options.max_iterations {
        if problem.penalty == PenaltySpec::RkhsNormSq && k > 0 && k % RESYNC_EVERY == 0 {
            problem.matvec(&x, &mut px);
            problem.matvec(&y, &mut py);
        }
        let dir = problem.direction(&y, &py, &mut scratch);
        let smooth_y = problem.smooth_part(&y, &py);

        if k == 0 {
            eta = initial_smooth_step(problem, &y, &py, smooth_y, &dir, &mut cand, &mut pcand);
        }
        let mut accepted = false;
        for _ in 0..MAX_STEP_HALVINGS {
            problem.take_step(&y, &py, &dir, eta, &mut cand, &mut pcand);
            if problem.sufficient_decrease(&y, smooth_y, &dir, eta, &cand, &pcand) {
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            // No representable step decreases the model: stationary to working precision.
            tracker.converged = true;
            break;
        }
        if cand == y {
            tracker.converged = true;
            tracker.record(&cand, problem.total(&cand, &pcand))?;
            break;
        }

        let fcand = problem.total(&cand, &pcand);
        let t_next;
        if fcand > fx {
            t_next = 1.0;
            y.copy_from(&cand);
            py.copy_from(&pcand);
        } else {
            t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let beta = (t - 1.0) / t_next;
            // y = cand + β (cand − x); Gy follows by linearity.
            y.copy_from(&cand);
            y.axpy(-beta, &x, 1.0 + beta);
            py.copy_from(&pcand);
            py.axpy(-beta, &px, 1.0 + beta);
        }
        t = t_next;
        std::mem::swap(&mut x, &mut cand);
        std::mem::swap(&mut px, &mut pcand);
        fx = fcand;
        if tracker.record(&x, fx)? {
            break;
        }
    }
    Ok(tracker)
}

/// Largest power-of-two step (starting from 1) that passes the decrease test.
fn initial_smooth_step(
    problem: &Problem<'_>,
    y: &DVector<f64>,
    py: &DVector<f64>,
    smooth_y: f64,
    dir: &StepDirection,
    cand: &mut DVector<f64>,
    pcand: &mut DVector<f64>,
) -> f64 {
    let mut eta = 1.0;
    let passes = |eta: f64, cand: &mut DVector<f64>, pcand: &mut DVector<f64>| {
        problem.take_step(y, py, dir, eta, cand, pcand);
        problem.sufficient_decrease(y, smooth_y, dir, eta, cand, pcand)
    };
    if passes(eta, cand, pcand) {
        for _ in 0..MAX_STEP_DOUBLINGS {
            if !passes(2.0 * eta, cand, pcand) {
                break;
            }
            eta *= 2.0;
        }
    }
    eta
}

fn subgradient(problem: &Problem<'_>, options: &SolverOptions) -> Result<Tracker> {
    let n = problem.y.len();
    let mut alpha = DVector::<f64>::zeros(n);
    let mut p = DVector::<f64>::zeros(n);
    let mut next = alpha.clone();
    let mut pnext = p.clone();
    let mut scratch = DVector::<f64>::zeros(n);
    let f0 = problem.total(&alpha, &p);
    let mut tracker = Tracker::new(alpha.clone(), f0, NONSMOOTH_WINDOW, options.tolerance)?;

    let mut scale = 0.0;
    for t in 0..options.max_iterations {
        if problem.penalty == PenaltySpec::RkhsNormSq && t > 0 && t % RESYNC_EVERY == 0 {
            problem.matvec(&alpha, &mut p);
        }
        let dir = problem.direction(&alpha, &p, &mut scratch);
        if t == 0 {
            if dir.d.iter().all(|&v| v == 0.0) {
                // Zero subgradient at the start: α = 0 is optimal.
                tracker.converged = true;
                break;
            }
            scale = initial_subgradient_step(problem, &alpha, &p, f0, &dir, &mut next, &mut pnext);
        }
        let eta = scale / (1.0 + (t as f64).sqrt());
        problem.take_step(&alpha, &p, &dir, eta, &mut next, &mut pnext);
        std::mem::swap(&mut alpha, &mut next);
        std::mem::swap(&mut p, &mut pnext);
        if tracker.record(&alpha, problem.total(&alpha, &p))? {
            break;
        }
    }
    Ok(tracker)
}

/// Step scale `a` for the diminishing rule: starting from 1, doubled while the
/// first step keeps lowering the objective, otherwise halved until it does.
fn initial_subgradient_step(
    problem: &Problem<'_>,
    alpha: &DVector<f64>,
    p: &DVector<f64>,
    f0: f64,
    dir: &StepDirection,
    cand: &mut DVector<f64>,
    pcand: &mut DVector<f64>,
) -> f64 {
    let value = |eta: f64, cand: &mut DVector<f64>, pcand: &mut DVector<f64>| {
        problem.take_step(alpha, p, dir, eta, cand, pcand);
        problem.total(cand, pcand)
    };
    let mut eta = 1.0;
    let mut f = value(eta, cand, pcand);
    if f < f0 {
        for _ in 0..MAX_STEP_DOUBLINGS {
            let f2 = value(2.0 * eta, cand, pcand);
            if f2.is_nan() || f2 >= f {
                break;
            }
            eta *= 2.0;
            f = f2;
        }
    } else {
        for _ in 0..MAX_STEP_HALVINGS {
            eta *= 0.5;
            if value(eta, cand, pcand) < f0 {
                break;
            }
        }
    }
    eta
}
