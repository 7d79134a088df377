//! Cross-module invariants as property tests.

use proptest::prelude::*;

use dkr::data::{gen_linear, gen_sinc, gen_sinc_mixture, standardize, NoiseSpec};
use dkr::dkr::{
    empirical_risk_of_average, fit_dkr, fit_dkr_detailed, local_empirical_risks, partition,
    FitConfig, Method,
};
use dkr::model::AveragedEstimator;

fn method() -> impl Strategy<Value = Method> {
    prop::sample::select(Method::ALL.to_vec())
}

fn fast(mut cfg: FitConfig) -> FitConfig {
    cfg.solver.max_iterations = 400;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn jensen_bound_and_range(method in method(), m in 1usize..8, seed in 0u64..10_000, trunc in 0.2f64..1.5) {
        let data = gen_sinc(120, NoiseSpec::Gaussian { sigma: 0.3 }, seed).unwrap();
        let cfg = fast(FitConfig::for_method(method, 0.1, 1e-3, m, trunc, 0.1, seed).unwrap());
        let est = fit_dkr(&data, &cfg).unwrap();
        let avg = empirical_risk_of_average(&est, &data, &cfg.loss).unwrap();
        let locals = local_empirical_risks(&est, &data, &cfg.loss).unwrap();
        prop_assert!(avg <= locals.iter().sum::<f64>() / m as f64 + 1e-10);
        for p in est.predict_many(data.covariates()).unwrap() {
            prop_assert!(p.abs() <= trunc);
        }
    }

    #[test]
    fn partition_is_sound(n in 1usize..300, m_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let m = 1 + ((n - 1) as f64 * m_frac) as usize;
        let plan = partition(n, m, seed).unwrap();
        let mut all: Vec<usize> = plan.segments().iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = plan.segments().iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn fits_are_deterministic_and_round_trip(method in method(), m in 1usize..5, seed in 0u64..1000) {
        let data = gen_sinc(60, NoiseSpec::Gaussian { sigma: 0.2 }, seed).unwrap();
        let cfg = fast(FitConfig::for_method(method, 0.1, 1e-3, m, 1.0, 0.1, seed).unwrap());
        let a = fit_dkr_detailed(&data, &cfg, Some(1)).unwrap().estimator.to_json();
        let b = fit_dkr_detailed(&data, &cfg, Some(2)).unwrap().estimator.to_json();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(AveragedEstimator::from_json(&a).unwrap().to_json(), a);
    }

    #[test]
    fn generators_are_pure(seed in any::<u64>(), n in 1usize..50) {
        let noise = NoiseSpec::Uniform { lo: -1.0, hi: 1.0 };
        prop_assert_eq!(gen_sinc(n, noise, seed).unwrap(), gen_sinc(n, noise, seed).unwrap());
        prop_assert_eq!(
            gen_sinc_mixture(n, 3, 0.1, -2.0, 2.0, seed).unwrap(),
            gen_sinc_mixture(n, 3, 0.1, -2.0, 2.0, seed).unwrap()
        );
        prop_assert_eq!(gen_linear(n, 3, 1.0, seed).unwrap(), gen_linear(n, 3, 1.0, seed).unwrap());
    }

    #[test]
    fn standardization_is_idempotent(seed in any::<u64>(), n in 3usize..80) {
        let (data, _) = gen_linear(n, 4, 1.0, seed).unwrap();
        let (once, transform) = standardize(&data).unwrap();
        let again = transform.apply(&data).unwrap();
        for (a, b) in once.covariates().as_slice().iter().zip(again.covariates().as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let (twice, _) = standardize(&once).unwrap();
        for (a, b) in once.covariates().as_slice().iter().zip(twice.covariates().as_slice()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        prop_assert_eq!(once.labels(), data.labels());
    }
}
