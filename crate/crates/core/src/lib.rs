//! Distributed kernel regression.
//!
//! A dataset is split at random into `m` segments, a regularized kernel
//! estimator is fitted on each segment independently, every local estimator
//! is clipped to `[-M, M]`, and the global predictor is the average of the
//! clipped locals.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`kernel`] | Gaussian kernel, Gram and cross-Gram matrices |
//! | [`model`] | Kernel expansions, truncation, averaged estimator, JSON model files |
//! | [`losses`] | Quadratic, absolute and epsilon-insensitive losses |
//! | [`solvers`] | Closed-form kernel ridge and a proximal subgradient solver |
//! | [`dkr`] | Partitioning, parallel local fits, assembly |
//! | [`data`] | Synthetic generators, CSV ingestion, standardization |
//! | [`eval`] | RMSE, coefficient estimation errors, fit timing |
//! | [`experiment`] | Experiment runners behind the `dkr` command-line tool |
//!
//! ```
//! use dkr::data::{gen_sinc, NoiseSpec};
//! use dkr::dkr::{fit_dkr, FitConfig, Method};
//!
//! let train = gen_sinc(400, NoiseSpec::Gaussian { sigma: 0.2 }, 7)?;
//! let config = FitConfig::for_method(Method::Ridge, 0.05, 1e-3, 4, 1.0, 0.1, 11)?;
//! let estimator = fit_dkr(&train, &config)?;
//! let y = estimator.predict(&[0.5, 0.5])?;
//! assert!(y.abs() <= 1.0);
//! # Ok::<(), dkr::DkrError>(())
//! ```

pub mod data;
pub mod dkr;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod kernel;
pub mod losses;
pub mod model;
pub mod points;
pub mod rng;
pub mod solvers;

pub use error::{DataError, DkrError, ErrorClass, Result};
pub use points::Points;
