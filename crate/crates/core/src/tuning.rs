//! Per-column penalty selection by sample splitting.
//!
//! For each split `v` the column problem is solved on the training
//! covariance `Σ̂₁ᵛ` and scored on the validation covariance `Σ̂₂ᵛ` with
//!
//! ```text
//!     R(λ) = (1/H) Σ_v [ ½ β̂ᵛ(λ)ᵀ Σ̂₂ᵛ β̂ᵛ(λ) − eᵢᵀ β̂ᵛ(λ) ]
//! ```
//!
//! over the grid `λ_j = (j / N) · a`, `j = 1..N`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::{perturb_to_pd, sample_covariance, DataMatrix};
use crate::error::{invalid, Result, ScioError};
use crate::matrix::SymMatrix;
use crate::parallel::try_map_indices;
use crate::solver::{
    assemble_and_symmetrize, solve_column, solve_path_on, ColumnSolution, PrecisionEstimate,
    SolverConfig,
};

pub const DEFAULT_CV_GRID_N: usize = 50;
pub const DEFAULT_SEED: u64 = 20_130_101;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    /// Number of random splits `H`.
    pub folds: usize,
    /// Fraction of rows in the training part.
    pub split_fraction: f64,
    pub grid_n: usize,
    /// Grid upper end `a`; `None` uses the largest off-diagonal `|σ̂_ij|` of
    /// the full sample.
    pub grid_upper: Option<f64>,
    pub seed: u64,
    /// Refit the chosen λ on the full sample instead of the first training split.
    pub refit_full_sample: bool,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            folds: 1,
            split_fraction: 0.5,
            grid_n: DEFAULT_CV_GRID_N,
            grid_upper: None,
            seed: DEFAULT_SEED,
            refit_full_sample: false,
        }
    }
}

impl CvPlan {
    pub fn train_size(&self, n: usize) -> usize {
        (n as f64 * self.split_fraction).round() as usize
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.folds == 0 {
            return invalid("cv folds must be at least 1");
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return invalid(format!(
                "split fraction must lie in (0, 1), got {}",
                self.split_fraction
            ));
        }
        if self.grid_n < 2 {
            return invalid("cv grid needs at least 2 points");
        }
        if let Some(a) = self.grid_upper {
            if !(a > 0.0) || !a.is_finite() {
                return invalid(format!("cv grid upper bound must be positive, got {a}"));
            }
        }
        let n1 = self.train_size(n);
        if n1 < 2 || n.saturating_sub(n1) < 2 {
            return invalid(format!(
                "n = {n} cannot be split into parts of at least 2 rows (train {n1})"
            ));
        }
        Ok(())
    }

    /// `λ_j = (j / N) · a` for `j = 1..N` (ascending).
    pub fn grid(&self, upper: f64) -> Vec<f64> {
        (1..=self.grid_n)
            .map(|j| j as f64 / self.grid_n as f64 * upper)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train_rows: Vec<usize>,
    pub validate_rows: Vec<usize>,
    pub train: DataMatrix,
    pub validate: DataMatrix,
}

/// `H` random train/validate partitions of the rows, drawn from one seeded
/// generator.
pub fn split_sample(x: &DataMatrix, plan: &CvPlan) -> Result<Vec<Split>> {
    plan.validate(x.n())?;
    let n = x.n();
    let n1 = plan.train_size(n);
    let mut rng = ChaCha20Rng::seed_from_u64(plan.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut splits = Vec::with_capacity(plan.folds);
    for _ in 0..plan.folds {
        order.shuffle(&mut rng);
        let mut train_rows = order[..n1].to_vec();
        let mut validate_rows = order[n1..].to_vec();
        train_rows.sort_unstable();
        validate_rows.sort_unstable();
        splits.push(Split {
            train: x.select_rows(&train_rows),
            validate: x.select_rows(&validate_rows),
            train_rows,
            validate_rows,
        });
    }
    Ok(splits)
}

/// Covariances for one split. The training side is PD-perturbed so the
/// solver always sees a positive diagonal.
#[derive(Clone, Debug)]
pub struct SplitCovariances {
    pub train: SymMatrix,
    pub validate: SymMatrix,
    pub n_train: usize,
}

impl SplitCovariances {
    pub fn from_split(split: &Split) -> Result<Self> {
        let train = perturb_to_pd(&sample_covariance(&split.train)?)?;
        let validate = sample_covariance(&split.validate)?;
        Ok(Self {
            train: train.sigma_hat,
            validate: validate.sigma_hat,
            n_train: train.n_used,
        })
    }
}

/// Validation score `½ βᵀ Σ̂₂ β − β_i`.
pub fn validation_score(validate: &SymMatrix, i: usize, beta: &[f64]) -> f64 {
    0.5 * validate.quad_form(beta) - beta[i]
}

/// Cross-validated risk of a single λ for column `i`.
pub fn cv_risk(
    i: usize,
    lambda: f64,
    splits: &[SplitCovariances],
    config: &SolverConfig,
) -> Result<f64> {
    if splits.is_empty() {
        return invalid("cv_risk needs at least one split");
    }
    let mut total = 0.0;
    for s in splits {
        let sol = solve_column(&s.train, i, lambda, config, None)?;
        total += validation_score(&s.validate, i, &sol.beta);
    }
    Ok(total / splits.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub column_i: usize,
    /// Ascending grid `λ_1 < … < λ_N`.
    pub lambdas: Vec<f64>,
    pub risks: Vec<f64>,
    pub chosen_lambda: f64,
    pub chosen_index: usize,
}

/// Index of the minimal risk; equal minima resolve to the larger λ.
pub fn argmin_risk(lambdas: &[f64], risks: &[f64]) -> usize {
    assert_eq!(lambdas.len(), risks.len());
    assert!(!risks.is_empty());
    let mut best = 0;
    for k in 1..risks.len() {
        let better =
            risks[k] < risks[best] || (risks[k] == risks[best] && lambdas[k] > lambdas[best]);
        if better {
            best = k;
        }
    }
    best
}

/// Everything the per-column selection needs, computed once.
#[derive(Clone, Debug)]
pub struct CvSetup {
    pub splits: Vec<SplitCovariances>,
    /// Ascending grid.
    pub grid: Vec<f64>,
    pub full_sigma: SymMatrix,
    pub n: usize,
}

impl CvSetup {
    pub fn new(x: &DataMatrix, plan: &CvPlan) -> Result<Self> {
        let splits = split_sample(x, plan)?
            .iter()
            .map(SplitCovariances::from_split)
            .collect::<Result<Vec<_>>>()?;
        let full = sample_covariance(x)?;
        let upper = match plan.grid_upper {
            Some(a) => a,
            None => {
                let a = full.sigma().max_abs_offdiag();
                if a > 0.0 {
                    a
                } else {
                    1.0
                }
            }
        };
        let full = perturb_to_pd(&full)?;
        Ok(Self {
            splits,
            grid: plan.grid(upper),
            full_sigma: full.sigma_hat,
            n: x.n(),
        })
    }
}

/// Risks over the grid for column `i`, following the path from the largest λ
/// down. Also returns the first split's path (ascending order) for reuse.
fn column_risks(
    i: usize,
    setup: &CvSetup,
    config: &SolverConfig,
) -> Result<(Vec<f64>, Vec<ColumnSolution>)> {
    let descending: Vec<f64> = setup.grid.iter().rev().copied().collect();
    let nl = descending.len();
    let mut risks = vec![0.0; nl];
    let mut first_path = Vec::new();
    for (v, s) in setup.splits.iter().enumerate() {
        let mut path = solve_path_on(&s.train, i, &descending, config)?;
        path.reverse();
        for (r, sol) in risks.iter_mut().zip(&path) {
            *r += validation_score(&s.validate, i, &sol.beta);
        }
        if v == 0 {
            first_path = path;
        }
    }
    let h = setup.splits.len() as f64;
    risks.iter_mut().for_each(|r| *r /= h);
    Ok((risks, first_path))
}

pub fn select_lambda_with(i: usize, setup: &CvSetup, config: &SolverConfig) -> Result<CvResult> {
    config.validate()?;
    let p = setup.full_sigma.dim();
    if i >= p {
        return invalid(format!("column index {i} out of range for p = {p}"));
    }
    let (risks, _) = column_risks(i, setup, config)?;
    let k = argmin_risk(&setup.grid, &risks);
    Ok(CvResult {
        column_i: i,
        lambdas: setup.grid.clone(),
        chosen_lambda: setup.grid[k],
        chosen_index: k,
        risks,
    })
}

/// Cross-validated λ for column `i`.
pub fn select_lambda(
    i: usize,
    plan: &CvPlan,
    x: &DataMatrix,
    config: &SolverConfig,
) -> Result<CvResult> {
    let setup = CvSetup::new(x, plan)?;
    select_lambda_with(i, &setup, config)
}

#[derive(Clone, Debug)]
pub struct CvOutcome {
    pub estimate: PrecisionEstimate,
    pub results: Vec<CvResult>,
    /// Column solutions at the selected λ̂ᵢ, before symmetrization.
    pub columns: Vec<ColumnSolution>,
}

/// Selects λ̂ᵢ for every column and assembles the symmetrized estimate from
/// the first split's training solutions at λ̂ᵢ (or from full-sample refits
/// when `plan.refit_full_sample`). `Ω̂` is shifted to positive definiteness
/// if needed.
pub fn cross_validate(x: &DataMatrix, plan: &CvPlan, config: &SolverConfig) -> Result<CvOutcome> {
    let setup = CvSetup::new(x, plan)?;
    cross_validate_with(&setup, config, plan.refit_full_sample)
}

pub fn cross_validate_with(
    setup: &CvSetup,
    config: &SolverConfig,
    refit_full_sample: bool,
) -> Result<CvOutcome> {
    config.validate()?;
    if setup.splits.is_empty() {
        return invalid("cross validation needs at least one split");
    }
    let p = setup.full_sigma.dim();
    let per_column = try_map_indices(config.execution, p, |i| {
        let (risks, path) = column_risks(i, setup, config)?;
        let k = argmin_risk(&setup.grid, &risks);
        let sol = if refit_full_sample {
            solve_column(&setup.full_sigma, i, setup.grid[k], config, None)?
        } else {
            path[k].clone()
        };
        let result = CvResult {
            column_i: i,
            lambdas: setup.grid.clone(),
            chosen_lambda: setup.grid[k],
            chosen_index: k,
            risks,
        };
        Ok::<_, ScioError>((result, sol))
    })?;
    let (results, cols): (Vec<CvResult>, Vec<ColumnSolution>) = per_column.into_iter().unzip();
    let mut estimate = assemble_and_symmetrize(&cols, 0.0)?;
    let n_fit = if refit_full_sample {
        setup.n
    } else {
        setup.splits[0].n_train
    };
    estimate.make_positive_definite(n_fit)?;
    Ok(CvOutcome {
        estimate,
        results,
        columns: cols,
    })
}

pub fn estimate_with_cv(
    x: &DataMatrix,
    plan: &CvPlan,
    config: &SolverConfig,
) -> Result<PrecisionEstimate> {
    Ok(cross_validate(x, plan, config)?.estimate)
}
