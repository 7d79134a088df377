use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::kernel::{gram_matrix, KernelSpec};
use crate::points::Points;

const SVR: LossSpec = LossSpec::EpsilonInsensitive { epsilon: 0.1 };

struct Instance {
    gram: GramMatrix,
    labels: Vec<f64>,
    points: Points,
    tau: f64,
}

fn instance(seed: u64, n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = rng.random_range(0.15..0.6);
    let points = Points::new(2, (0..2 * n).map(|_| rng.random::<f64>()).collect()).unwrap();
    let labels = points
        .rows()
        .map(|x| (6.0 * x[0]).sin() * (4.0 * x[1]).cos() + rng.random_range(-0.2..0.2))
        .collect();
    let gram = gram_matrix(&KernelSpec::gaussian(tau).unwrap(), &points).unwrap();
    Instance {
        gram,
        labels,
        points,
        tau,
    }
}

fn one_by_one() -> GramMatrix {
    GramMatrix::from_matrix(DMatrix::from_element(1, 1, 1.0)).unwrap()
}

#[test]
fn objective_trivial_cases() {
    let inst = instance(1, 6);
    let zeros = vec![0.0; 6];
    for loss in [LossSpec::Quadratic, LossSpec::Absolute, SVR] {
        for pen in [PenaltySpec::RkhsNormSq, PenaltySpec::CoefficientL1] {
            assert_eq!(
                objective(&loss, &pen, &inst.gram, &zeros, 0.7, &zeros).unwrap(),
                0.0
            );
        }
    }
    let mean_sq = inst.labels.iter().map(|y| y * y).sum::<f64>() / 6.0;
    let v = objective(
        &LossSpec::Quadratic,
        &PenaltySpec::RkhsNormSq,
        &inst.gram,
        &inst.labels,
        0.3,
        &zeros,
    )
    .unwrap();
    assert!((v - mean_sq).abs() < 1e-15);
}

#[test]
fn objective_matches_from_scratch_recomputation() {
    let inst = instance(2, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let alpha: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
    let lambda = 0.05;
    // Separate path: kernel values straight from the formula, no Gram object.
    let k = |a: &[f64], b: &[f64]| {
        (-((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)) / inst.tau.powi(2)).exp()
    };
    let f: Vec<f64> = (0..7)
        .map(|i| {
            (0..7)
                .map(|j| alpha[j] * k(inst.points.row(j), inst.points.row(i)))
                .sum()
        })
        .collect();
    let norm_sq: f64 = (0..7)
        .flat_map(|i| (0..7).map(move |j| (i, j)))
        .map(|(i, j)| alpha[i] * alpha[j] * k(inst.points.row(i), inst.points.row(j)))
        .sum();
    let l1: f64 = alpha.iter().map(|a| a.abs()).sum();
    let cases = [
        (
            LossSpec::Quadratic,
            PenaltySpec::RkhsNormSq,
            f.iter()
                .zip(&inst.labels)
                .map(|(p, y)| (p - y).powi(2))
                .sum::<f64>()
                / 7.0
                + lambda * norm_sq,
        ),
        (
            LossSpec::Absolute,
            PenaltySpec::CoefficientL1,
            f.iter()
                .zip(&inst.labels)
                .map(|(p, y)| (p - y).abs())
                .sum::<f64>()
                / 7.0
                + lambda * l1,
        ),
        (
            SVR,
            PenaltySpec::RkhsNormSq,
            f.iter()
                .zip(&inst.labels)
                .map(|(p, y)| ((p - y).abs() - 0.1).max(0.0))
                .sum::<f64>()
                / 7.0
                + lambda * norm_sq,
        ),
    ];
    for (loss, pen, want) in cases {
        let got = objective(&loss, &pen, &inst.gram, &inst.labels, lambda, &alpha).unwrap();
        assert!(
            (got - want).abs() < 1e-12,
            "{loss:?} {pen:?}: {got} vs {want}"
        );
    }
}

#[test]
fn objective_shape_errors() {
    let inst = instance(3, 4);
    assert!(objective(
        &LossSpec::Quadratic,
        &PenaltySpec::RkhsNormSq,
        &inst.gram,
        &inst.labels,
        0.1,
        &[0.0; 3]
    )
    .is_err());
    assert!(objective(
        &LossSpec::Quadratic,
        &PenaltySpec::RkhsNormSq,
        &inst.gram,
        &[0.0; 5],
        0.1,
        &[0.0; 4]
    )
    .is_err());
    assert!(objective(
        &LossSpec::Quadratic,
        &PenaltySpec::RkhsNormSq,
        &inst.gram,
        &inst.labels,
        -0.1,
        &[0.0; 4]
    )
    .is_err());
}

#[test]
fn ridge_one_by_one() {
    let g = one_by_one();
    let opts = SolverOptions::default();
    let a = solve_kernel_ridge(&g, &[0.5], 0.0, &opts).unwrap();
    assert!((a[0] - 0.5).abs() < 1e-9);
    let a = solve_kernel_ridge(&g, &[1.0], 1.0, &opts).unwrap();
    assert!((a[0] - 0.5).abs() < 1e-9);
}

#[test]
fn ridge_residual_bound() {
    for seed in 0..5 {
        let inst = instance(10 + seed, 40);
        let lambda = 1e-3;
        let a = solve_kernel_ridge(&inst.gram, &inst.labels, lambda, &SolverOptions::default())
            .unwrap();
        let g = inst.gram.as_matrix();
        let av = DVector::from_column_slice(&a);
        let r = g * &av + &av * (40.0 * lambda) - DVector::from_column_slice(&inst.labels);
        let ymax = inst.labels.iter().fold(0.0f64, |m, y| m.max(y.abs()));
        assert!(r.amax() <= 1e-6 * (1.0 + ymax));
    }
}

#[test]
fn ridge_interpolates_with_zero_lambda() {
    // Well-separated points keep G comfortably nonsingular.
    let pts = Points::from_rows((0..6).map(|i| vec![i as f64 * 0.3, 0.0]).collect()).unwrap();
    let g = gram_matrix(&KernelSpec::gaussian(0.25).unwrap(), &pts).unwrap();
    let y = [0.3, -0.2, 0.9, 0.1, -0.7, 0.4];
    let a = solve_kernel_ridge(&g, &y, 0.0, &SolverOptions::default()).unwrap();
    let fit = g.as_matrix() * DVector::from_column_slice(&a);
    for (f, y) in fit.iter().zip(y) {
        assert!((f - y).abs() < 1e-6);
    }
}

#[test]
fn ridge_survives_duplicate_points() {
    let pts = Points::from_rows(vec![vec![0.5, 0.5]; 4]).unwrap();
    let g = gram_matrix(&KernelSpec::gaussian(0.1).unwrap(), &pts).unwrap();
    let a = solve_kernel_ridge(&g, &[1.0, 1.0, 1.0, 1.0], 0.0, &SolverOptions::default()).unwrap();
    let f: f64 = a.iter().sum();
    assert!((f - 1.0).abs() < 1e-6);
}

#[test]
fn ridge_agrees_with_generic_solver() {
    let inst = instance(20, 20);
    let lambda = 1e-2;
    let opts = SolverOptions::default();
    let a = solve_kernel_ridge(&inst.gram, &inst.labels, lambda, &opts).unwrap();
    let closed = objective(
        &LossSpec::Quadratic,
        &PenaltySpec::RkhsNormSq,
        &inst.gram,
        &inst.labels,
        lambda,
        &a,
    )
    .unwrap();
    let rep = solve_generic(
        &LossSpec::Quadratic,
        &PenaltySpec::RkhsNormSq,
        &inst.gram,
        &inst.labels,
        lambda,
        &opts,
    )
    .unwrap();
    assert!(
        (rep.objective - closed).abs() <= 1e-8,
        "{} vs {}",
        rep.objective,
        closed
    );
}

#[test]
fn generic_matches_closed_form_relative() {
    for seed in 0..6 {
        let inst = instance(30 + seed, 15);
        let lambda = 10f64.powf(-3.0 + seed as f64 * 0.4);
        let opts = SolverOptions::default();
        let a = solve_kernel_ridge(&inst.gram, &inst.labels, lambda, &opts).unwrap();
        let closed = objective(
            &LossSpec::Quadratic,
            &PenaltySpec::RkhsNormSq,
            &inst.gram,
            &inst.labels,
            lambda,
            &a,
        )
        .unwrap();
        let rep = solve_generic(
            &LossSpec::Quadratic,
            &PenaltySpec::RkhsNormSq,
            &inst.gram,
            &inst.labels,
            lambda,
            &opts,
        )
        .unwrap();
        assert!(rep.objective >= closed - 1e-12);
        assert!(
            (rep.objective - closed) / closed <= 1e-6,
            "seed {seed}: {} vs {}",
            rep.objective,
            closed
        );
    }
}

#[test]
fn zero_labels_give_zero_coefficients() {
    let inst = instance(4, 8);
    let zeros = vec![0.0; 8];
    for loss in [LossSpec::Quadratic, LossSpec::Absolute, SVR] {
        for pen in [PenaltySpec::RkhsNormSq, PenaltySpec::CoefficientL1] {
            let rep = solve_generic(
                &loss,
                &pen,
                &inst.gram,
                &zeros,
                0.1,
                &SolverOptions::default(),
            )
            .unwrap();
            assert!(
                rep.coefficients.iter().all(|&a| a == 0.0),
                "{loss:?} {pen:?}"
            );
            assert_eq!(rep.objective, 0.0);
        }
    }
}

/// Exhaustive grid over `[-2, 2]²` for a two-point absolute-loss lasso.
fn grid_minimum(k: f64, y: [f64; 2], lambda: f64, step: f64) -> f64 {
    let steps = (4.0 / step).round() as i64;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        let a1 = -2.0 + i as f64 * step;
        for j in 0..=steps {
            let a2 = -2.0 + j as f64 * step;
            let p1 = a1 + k * a2;
            let p2 = k * a1 + a2;
            let v = ((p1 - y[0]).abs() + (p2 - y[1]).abs()) / 2.0 + lambda * (a1.abs() + a2.abs());
            best = best.min(v);
        }
    }
    best
}

fn two_point_instance(seed: u64) -> (GramMatrix, [f64; 2], f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = Points::new(2, (0..4).map(|_| rng.random::<f64>()).collect()).unwrap();
    let gram = gram_matrix(&KernelSpec::gaussian(0.5).unwrap(), &pts).unwrap();
    let y = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let lambda = rng.random_range(0.01..0.3);
    let k = gram.get(0, 1);
    (gram, y, lambda, k)
}

#[test]
fn absolute_lasso_matches_grid_search() {
    let (gram, y, lambda, k) = two_point_instance(77);
    let rep = solve_generic(
        &LossSpec::Absolute,
        &PenaltySpec::CoefficientL1,
        &gram,
        &y,
        lambda,
        &SolverOptions::default(),
    )
    .unwrap();
    let grid = grid_minimum(k, y, lambda, 1e-3);
    // The grid cannot resolve the optimum finer than its own spacing; the
    // solver must not be worse than the grid by more than the stated margin.
    assert!(
        rep.objective <= grid + 1e-6,
        "solver {} grid {}",
        rep.objective,
        grid
    );
    assert!(rep.objective >= grid - 2e-3);
}

#[test]
fn quadratic_ridge_gradient_vanishes() {
    let inst = instance(40, 25);
    let lambda = 1e-2;
    let rep = solve_generic(
        &LossSpec::Quadratic,
        &PenaltySpec::RkhsNormSq,
        &inst.gram,
        &inst.labels,
        lambda,
        &SolverOptions::default(),
    )
    .unwrap();
    let g = inst.gram.as_matrix();
    let a = DVector::from_column_slice(&rep.coefficients);
    let y = DVector::from_column_slice(&inst.labels);
    let grad = g * (g * &a - &y) * (2.0 / 25.0) + g * &a * (2.0 * lambda);
    let ymax = y.amax();
    assert!(grad.amax() <= 1e-5 * (1.0 + ymax), "{}", grad.amax());
}

#[test]
fn quadratic_lasso_kkt() {
    let inst = instance(41, 12);
    let lambda = 5e-3;
    let opts = SolverOptions {
        max_iterations: 50_000,
        tolerance: 1e-14,
        ..SolverOptions::default()
    };
    let rep = solve_generic(
        &LossSpec::Quadratic,
        &PenaltySpec::CoefficientL1,
        &inst.gram,
        &inst.labels,
        lambda,
        &opts,
    )
    .unwrap();
    let grad = risk_gradient(
        &LossSpec::Quadratic,
        &inst.gram,
        &inst.labels,
        &rep.coefficients,
    )
    .unwrap();
    for (a, g) in rep.coefficients.iter().zip(&grad) {
        if *a == 0.0 {
            assert!(g.abs() <= lambda + 1e-4, "zero coefficient, gradient {g}");
        } else {
            assert!((g + lambda * a.signum()).abs() <= 1e-4, "a={a} g={g}");
        }
    }
}

#[test]
fn risk_gradient_matches_central_differences() {
    let h = 1e-6;
    for seed in 0..5 {
        let inst = instance(50 + seed, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad = risk_gradient(&LossSpec::Quadratic, &inst.gram, &inst.labels, &alpha).unwrap();
        for i in 0..10 {
            let mut up = alpha.clone();
            let mut down = alpha.clone();
            up[i] += h;
            down[i] -= h;
            let risk = |a: &[f64]| {
                objective(
                    &LossSpec::Quadratic,
                    &PenaltySpec::RkhsNormSq,
                    &inst.gram,
                    &inst.labels,
                    0.0,
                    a,
                )
                .unwrap()
            };
            let fd = (risk(&up) - risk(&down)) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-4 * grad[i].abs().max(1e-3),
                "i={i}: fd {fd} analytic {}",
                grad[i]
            );
        }
    }
}

#[test]
fn best_history_is_monotone_and_runs_are_deterministic() {
    let inst = instance(60, 18);
    for loss in [LossSpec::Quadratic, LossSpec::Absolute, SVR] {
        for pen in [PenaltySpec::RkhsNormSq, PenaltySpec::CoefficientL1] {
            let opts = SolverOptions {
                max_iterations: 800,
                ..SolverOptions::default()
            };
            let a = solve_generic(&loss, &pen, &inst.gram, &inst.labels, 0.02, &opts).unwrap();
            assert!(a.best_history.windows(2).all(|w| w[1] <= w[0]));
            assert!(a.objective <= a.best_history[0]);
            let b = solve_generic(&loss, &pen, &inst.gram, &inst.labels, 0.02, &opts).unwrap();
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.coefficients), bits(&b.coefficients));
        }
    }
}

#[test]
fn iteration_cap_reports_not_converged() {
    let inst = instance(61, 30);
    let opts = SolverOptions {
        max_iterations: 3,
        ..SolverOptions::default()
    };
    let rep = solve_generic(
        &LossSpec::Absolute,
        &PenaltySpec::RkhsNormSq,
        &inst.gram,
        &inst.labels,
        1e-3,
        &opts,
    )
    .unwrap();
    assert!(!rep.converged);
    assert_eq!(rep.iterations, 3);
}

#[test]
fn invalid_options_rejected() {
    let inst = instance(62, 3);
    let bad = SolverOptions {
        max_iterations: 0,
        ..SolverOptions::default()
    };
    assert!(solve_generic(
        &LossSpec::Absolute,
        &PenaltySpec::RkhsNormSq,
        &inst.gram,
        &inst.labels,
        0.1,
        &bad
    )
    .is_err());
    let bad = SolverOptions {
        tolerance: 0.0,
        ..SolverOptions::default()
    };
    assert!(solve_kernel_ridge(&inst.gram, &inst.labels, 0.1, &bad).is_err());
}
