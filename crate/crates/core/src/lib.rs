//! Sparse precision-matrix estimation by column-wise inverse operators.
//!
//! Each column of `Ω = Σ⁻¹` is estimated by an ℓ₁-penalised quadratic
//! program solved with coordinate descent; the columns are symmetrized by
//! keeping the smaller-magnitude entry of each pair. The crate also provides
//! cross-validated tuning, an incoherence diagnostic, simulation models and a
//! benchmark runner.
//!
//! Work over columns, λ grids and replicates runs on rayon when the
//! `parallel` feature is on (the default); [`Execution::Sequential`] or
//! building without the feature gives the same results single-threaded.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod benchmark;
pub mod covariance;
pub mod error;
pub mod evaluation;
pub mod matrix;
pub mod oracle;
pub mod parallel;
pub mod simgen;
pub mod solver;
pub mod tuning;

pub use covariance::{read_csv, sample_covariance, CovarianceEstimate, CsvOptions, DataMatrix};
pub use error::{Result, ScioError};
pub use matrix::{Cholesky, Spectrum, SymMatrix};
pub use parallel::Execution;
pub use solver::{
    estimate_from_sigma, estimate_precision, solve_column, EstimateInput, EstimateOptions,
    LambdaSpec, PrecisionEstimate, SolverConfig,
};
pub use tuning::{cross_validate, estimate_with_cv, CvPlan};
