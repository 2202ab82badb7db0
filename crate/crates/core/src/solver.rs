//! Column-wise estimator.
//!
//! Column `i` of the precision matrix is estimated by minimising
//!
//! ```text
//!     ½ βᵀ Σ̂ β − eᵢᵀ β + λ |β|₁
//! ```
//!
//! with cyclic coordinate descent. The `p` column estimates are then combined
//! into a symmetric matrix by keeping, for every pair, the entry of smaller
//! magnitude.

use serde::{Deserialize, Serialize};

use crate::covariance::{
    pd_shift, perturb_to_pd, sample_covariance, CovarianceEstimate, DataMatrix,
};
use crate::error::{invalid, Result, ScioError};
use crate::matrix::{dot, min_eigenvalue, SymMatrix, DEFAULT_EIGEN_TOL};
use crate::parallel::{try_map_indices, Execution};
use crate::tuning::{estimate_with_cv, CvPlan};

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
pub const DEFAULT_GRID_LEN: usize = 50;
pub const DEFAULT_GRID_RATIO: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence threshold on the largest coordinate change in a full sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Strictly decreasing, positive. Empty means "derive a default grid".
    pub lambda_grid: Vec<f64>,
    pub warm_start: bool,
    /// After two full sweeps, iterate over the nonzero coordinates only and
    /// confirm convergence with a full sweep.
    pub active_set: bool,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            lambda_grid: Vec::new(),
            warm_start: true,
            active_set: true,
            execution: Execution::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.lambda_grid = grid;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return invalid(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_sweeps == 0 {
            return invalid("max_sweeps must be at least 1");
        }
        validate_grid(&self.lambda_grid)
    }

    /// The configured grid, or the default grid for `sigma` when none is set.
    pub fn grid_for(&self, sigma: &SymMatrix) -> Vec<f64> {
        if self.lambda_grid.is_empty() {
            default_grid(sigma)
        } else {
            self.lambda_grid.clone()
        }
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    for (k, &l) in grid.iter().enumerate() {
        check_lambda(l)?;
        if k > 0 && !(l < grid[k - 1]) {
            return invalid(format!(
                "lambda grid must be strictly decreasing (entry {k}: {l} after {})",
                grid[k - 1]
            ));
        }
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return invalid(format!("lambda must be positive and finite, got {lambda}"));
    }
    Ok(())
}

/// `len` log-spaced values from `max` down to `max * ratio`.
pub fn log_grid(max: f64, ratio: f64, len: usize) -> Vec<f64> {
    assert!(max > 0.0 && ratio > 0.0 && ratio < 1.0 && len >= 1);
    if len == 1 {
        return vec![max];
    }
    let (hi, lo) = (max.ln(), (max * ratio).ln());
    (0..len)
        .map(|k| (hi + (lo - hi) * k as f64 / (len - 1) as f64).exp())
        .collect()
}

/// 50 log-spaced values from the largest off-diagonal `|σ̂_ij|` down to a
/// hundredth of it. Falls back to a top value of 1 when `Σ̂` is diagonal.
pub fn default_grid(sigma: &SymMatrix) -> Vec<f64> {
    let top = sigma.max_abs_offdiag();
    let top = if top > 0.0 { top } else { 1.0 };
    log_grid(top, DEFAULT_GRID_RATIO, DEFAULT_GRID_LEN)
}

/// `sign(x) · max(|x| − λ, 0)`.
#[inline]
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Minimiser over coordinate `j` with the others held fixed:
/// `T(1{j=i} − Σ_{k≠j} β_k σ̂_kj, λ) / σ̂_jj`.
pub fn coordinate_update(
    j: usize,
    beta: &[f64],
    sigma: &SymMatrix,
    i: usize,
    lambda: f64,
) -> Result<f64> {
    let sjj = sigma.get(j, j);
    if !(sjj > 0.0) {
        return Err(ScioError::DegenerateColumn {
            index: j,
            value: sjj,
        });
    }
    let col = sigma.column(j);
    let partial: f64 = beta
        .iter()
        .zip(col)
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, (b, s))| b * s)
        .sum();
    let target = if j == i { 1.0 } else { 0.0 };
    Ok(soft_threshold(target - partial, lambda) / sjj)
}

/// `½ βᵀ Σ̂ β − β_i + λ |β|₁`.
pub fn column_objective(sigma: &SymMatrix, i: usize, lambda: f64, beta: &[f64]) -> f64 {
    0.5 * sigma.quad_form(beta) - beta[i] + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Subgradient-violation margin given the gradient `g = Σ̂β − eᵢ`.
pub(crate) fn kkt_margin(beta: &[f64], grad: &[f64], lambda: f64) -> f64 {
    beta.iter()
        .zip(grad)
        .map(|(&b, &g)| {
            if b != 0.0 {
                (g + lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Coordinate-descent state for one column problem. Keeps `Σ̂β` up to date
/// so each coordinate update costs O(1) plus O(p) when the coordinate moves.
#[derive(Clone, Debug)]
pub struct CoordinateDescent<'a> {
    sigma: &'a SymMatrix,
    i: usize,
    lambda: f64,
    beta: Vec<f64>,
    sigma_beta: Vec<f64>,
}

impl<'a> CoordinateDescent<'a> {
    pub fn new(sigma: &'a SymMatrix, i: usize, lambda: f64, init: Option<&[f64]>) -> Result<Self> {
        let p = sigma.dim();
        if i >= p {
            return invalid(format!("column index {i} out of range for p = {p}"));
        }
        check_lambda(lambda)?;
        for j in 0..p {
            let d = sigma.get(j, j);
            if !(d > 0.0) {
                return Err(ScioError::DegenerateColumn { index: j, value: d });
            }
        }
        let beta = match init {
            Some(b) if b.len() != p => {
                return Err(ScioError::DimensionMismatch {
                    expected: p,
                    found: b.len(),
                })
            }
            Some(b) => b.to_vec(),
            None => vec![0.0; p],
        };
        let sigma_beta = sigma.mat_vec(&beta);
        Ok(Self {
            sigma,
            i,
            lambda,
            beta,
            sigma_beta,
        })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn into_beta(self) -> Vec<f64> {
        self.beta
    }

    pub fn objective(&self) -> f64 {
        0.5 * dot(&self.beta, &self.sigma_beta) - self.beta[self.i]
            + self.lambda * self.beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    #[inline]
    fn update(&mut self, j: usize) -> f64 {
        let sjj = self.sigma.get(j, j);
        let old = self.beta[j];
        let partial = self.sigma_beta[j] - sjj * old;
        let target = if j == self.i { 1.0 } else { 0.0 };
        let new = soft_threshold(target - partial, self.lambda) / sjj;
        let delta = new - old;
        if delta != 0.0 {
            self.beta[j] = new;
            for (sb, s) in self.sigma_beta.iter_mut().zip(self.sigma.column(j)) {
                *sb += delta * s;
            }
        }
        delta.abs()
    }

    /// One pass over every coordinate in ascending order. Returns the largest
    /// absolute coordinate change.
    pub fn full_sweep(&mut self) -> f64 {
        (0..self.beta.len()).fold(0.0, |m, j| m.max(self.update(j)))
    }

    /// One pass over the currently nonzero coordinates.
    pub fn active_sweep(&mut self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.beta.len() {
            if self.beta[j] != 0.0 {
                m = m.max(self.update(j));
            }
        }
        m
    }

    /// KKT residual with `Σ̂β` recomputed from scratch.
    pub fn kkt_residual(&mut self) -> f64 {
        self.sigma_beta = self.sigma.mat_vec(&self.beta);
        let grad: Vec<f64> = self
            .sigma_beta
            .iter()
            .enumerate()
            .map(|(j, v)| if j == self.i { v - 1.0 } else { *v })
            .collect();
        kkt_margin(&self.beta, &grad, self.lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSolution {
    pub index_i: usize,
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub sweeps_used: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub index: usize,
    pub lambda: f64,
    pub sweeps_used: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub nonzeros: usize,
}

impl From<&ColumnSolution> for ColumnSummary {
    fn from(c: &ColumnSolution) -> Self {
        Self {
            index: c.index_i,
            lambda: c.lambda,
            sweeps_used: c.sweeps_used,
            converged: c.converged,
            kkt_residual: c.kkt_residual,
            nonzeros: c.beta.iter().filter(|b| **b != 0.0).count(),
        }
    }
}

/// Minimises the column objective for `(i, λ)`.
///
/// Converged means a full sweep moved no coordinate by `tol` or more and the
/// KKT residual is at most `tol`. Running out of sweeps is not an error; the
/// returned solution has `converged == false`.
pub fn solve_column(
    sigma: &SymMatrix,
    i: usize,
    lambda: f64,
    config: &SolverConfig,
    init: Option<&[f64]>,
) -> Result<ColumnSolution> {
    config.validate()?;
    let mut cd = CoordinateDescent::new(sigma, i, lambda, init)?;
    let mut sweeps = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    while sweeps < config.max_sweeps {
        let change = cd.full_sweep();
        sweeps += 1;
        if change < config.tol {
            kkt = cd.kkt_residual();
            if kkt <= config.tol {
                converged = true;
                break;
            }
            continue;
        }
        if config.active_set && sweeps >= 2 {
            while sweeps < config.max_sweeps {
                let c = cd.active_sweep();
                sweeps += 1;
                if c < config.tol {
                    break;
                }
            }
        }
    }
    if !converged {
        kkt = cd.kkt_residual();
    }
    Ok(ColumnSolution {
        index_i: i,
        beta: cd.into_beta(),
        lambda,
        sweeps_used: sweeps,
        converged,
        kkt_residual: kkt,
    })
}

/// Solves column `i` along `config.lambda_grid` (largest λ first), warm
/// starting each point from the previous solution when `warm_start` is set.
pub fn solve_path(
    sigma: &SymMatrix,
    i: usize,
    config: &SolverConfig,
) -> Result<Vec<ColumnSolution>> {
    config.validate()?;
    if config.lambda_grid.is_empty() {
        return invalid("solve_path needs a nonempty lambda grid");
    }
    solve_path_on(sigma, i, &config.lambda_grid, config)
}

pub(crate) fn solve_path_on(
    sigma: &SymMatrix,
    i: usize,
    grid: &[f64],
    config: &SolverConfig,
) -> Result<Vec<ColumnSolution>> {
    let mut out: Vec<ColumnSolution> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let init = match out.last() {
            Some(prev) if config.warm_start => Some(prev.beta.as_slice()),
            _ => None,
        };
        let sol = solve_column(sigma, i, lambda, config, init)?;
        out.push(sol);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionEstimate {
    pub omega_hat: SymMatrix,
    pub lambda_per_column: Vec<f64>,
    /// Diagonal shift applied to `omega_hat` to make it positive definite.
    pub rho_applied: f64,
    /// Diagonal shift applied to the sample covariance before solving.
    pub covariance_rho: f64,
    pub per_column_meta: Vec<ColumnSummary>,
}

#[derive(Serialize, Deserialize)]
struct PrecisionEstimateJson {
    p: usize,
    lambda_per_column: Vec<f64>,
    rho_applied: f64,
    covariance_rho: f64,
    omega: Vec<f64>,
    columns: Vec<ColumnSummary>,
}

impl PrecisionEstimate {
    pub fn p(&self) -> usize {
        self.omega_hat.dim()
    }

    pub fn all_converged(&self) -> bool {
        self.per_column_meta.iter().all(|c| c.converged)
    }

    pub fn max_kkt_residual(&self) -> f64 {
        self.per_column_meta
            .iter()
            .map(|c| c.kkt_residual)
            .fold(0.0, f64::max)
    }

    /// JSON with `p`, `lambda_per_column`, `rho_applied`, `covariance_rho`,
    /// row-major `omega` and per-column summaries.
    pub fn to_json(&self) -> Result<String> {
        let j = PrecisionEstimateJson {
            p: self.p(),
            lambda_per_column: self.lambda_per_column.clone(),
            rho_applied: self.rho_applied,
            covariance_rho: self.covariance_rho,
            omega: self.omega_hat.as_slice().to_vec(),
            columns: self.per_column_meta.clone(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: PrecisionEstimateJson = serde_json::from_str(text)?;
        if j.omega.len() != j.p * j.p || j.p == 0 {
            return Err(ScioError::Parse(format!(
                "omega has {} values, expected {}",
                j.omega.len(),
                j.p * j.p
            )));
        }
        let rows: Vec<Vec<f64>> = j.omega.chunks(j.p).map(|r| r.to_vec()).collect();
        Ok(Self {
            omega_hat: SymMatrix::from_rows(&rows, 0.0)?,
            lambda_per_column: j.lambda_per_column,
            rho_applied: j.rho_applied,
            covariance_rho: j.covariance_rho,
            per_column_meta: j.columns,
        })
    }

    /// Applies `ρ = |λ_min| + n^{-1/2}` to the diagonal when `λ_min(Ω̂) <= 0`.
    pub fn make_positive_definite(&mut self, n: usize) -> Result<()> {
        let lmin = min_eigenvalue(&self.omega_hat, DEFAULT_EIGEN_TOL)?;
        let rho = pd_shift(lmin, n);
        if rho > 0.0 {
            self.omega_hat = self.omega_hat.add_diagonal(rho);
            self.rho_applied += rho;
        }
        Ok(())
    }
}

/// Combines column solutions into `Ω̂`. For `i < j` with `a = β̂_j[i]` and
/// `b = β̂_i[j]`, `ω̂_ij = ω̂_ji = a` if `|a| < |b|`, else `b` (ties keep the
/// entry from column `i`).
pub fn assemble_and_symmetrize(columns: &[ColumnSolution], rho: f64) -> Result<PrecisionEstimate> {
    let p = columns.len();
    if p == 0 {
        return invalid("no columns to assemble");
    }
    let mut slot: Vec<Option<&ColumnSolution>> = vec![None; p];
    for c in columns {
        if c.index_i >= p {
            return invalid(format!(
                "column index {} out of range for p = {p}",
                c.index_i
            ));
        }
        if c.beta.len() != p {
            return Err(ScioError::DimensionMismatch {
                expected: p,
                found: c.beta.len(),
            });
        }
        if slot[c.index_i].replace(c).is_some() {
            return invalid(format!("duplicate column index {}", c.index_i));
        }
    }
    let cols: Vec<&ColumnSolution> = slot
        .into_iter()
        .enumerate()
        .map(|(k, c)| c.ok_or_else(|| ScioError::InvalidInput(format!("missing column {k}"))))
        .collect::<Result<_>>()?;

    let omega = SymMatrix::from_fn(p, |i, j| {
        if i == j {
            return cols[i].beta[i];
        }
        let a = cols[j].beta[i];
        let b = cols[i].beta[j];
        if a.abs() < b.abs() {
            a
        } else {
            b
        }
    });
    Ok(PrecisionEstimate {
        omega_hat: omega,
        lambda_per_column: cols.iter().map(|c| c.lambda).collect(),
        rho_applied: rho,
        covariance_rho: 0.0,
        per_column_meta: cols.iter().map(|c| ColumnSummary::from(*c)).collect(),
    })
}

/// Penalty specification for [`estimate_precision`].
#[derive(Clone, Debug, PartialEq)]
pub enum LambdaSpec {
    Single(f64),
    PerColumn(Vec<f64>),
    CrossValidated(CvPlan),
}

pub enum EstimateInput<'a> {
    Data(&'a DataMatrix),
    Covariance(&'a CovarianceEstimate),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateOptions {
    /// Shift `Ω̂` to positive definiteness when its smallest eigenvalue is <= 0.
    pub pd_correction: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            pd_correction: true,
        }
    }
}

/// Solves every column with its own λ (concurrently when configured) and
/// symmetrizes. `sigma` is used as given.
pub fn estimate_from_sigma(
    sigma: &SymMatrix,
    lambdas: &[f64],
    config: &SolverConfig,
) -> Result<PrecisionEstimate> {
    config.validate()?;
    let p = sigma.dim();
    if lambdas.len() != p {
        return Err(ScioError::DimensionMismatch {
            expected: p,
            found: lambdas.len(),
        });
    }
    for &l in lambdas {
        check_lambda(l)?;
    }
    let cols = try_map_indices(config.execution, p, |i| {
        solve_column(sigma, i, lambdas[i], config, None)
    })?;
    assemble_and_symmetrize(&cols, 0.0)
}

/// Full estimator: covariance, PD perturbation of `Σ̂`, column solves,
/// symmetrization and (optionally) PD correction of `Ω̂`.
pub fn estimate_precision(
    input: EstimateInput<'_>,
    lambda: &LambdaSpec,
    config: &SolverConfig,
    options: EstimateOptions,
) -> Result<PrecisionEstimate> {
    if let LambdaSpec::CrossValidated(plan) = lambda {
        return match input {
            EstimateInput::Data(x) => estimate_with_cv(x, plan, config),
            EstimateInput::Covariance(_) => {
                invalid("cross-validated lambda needs raw data, not a covariance")
            }
        };
    }
    let cov = match input {
        EstimateInput::Data(x) => sample_covariance(x)?,
        EstimateInput::Covariance(c) => c.clone(),
    };
    let cov = perturb_to_pd(&cov)?;
    let p = cov.sigma().dim();
    let lambdas = match lambda {
        LambdaSpec::Single(l) => vec![*l; p],
        LambdaSpec::PerColumn(v) => {
            if v.len() != p {
                return Err(ScioError::DimensionMismatch {
                    expected: p,
                    found: v.len(),
                });
            }
            v.clone()
        }
        LambdaSpec::CrossValidated(_) => unreachable!(),
    };
    let mut est = estimate_from_sigma(cov.sigma(), &lambdas, config)?;
    est.covariance_rho = cov.rho_applied;
    if options.pd_correction {
        est.make_positive_definite(cov.n_used)?;
    }
    Ok(est)
}

/// `|Σ̂β̂ − eᵢ|_∞ − λ`, recomputed from scratch. Non-positive when the
/// column satisfies the sup-norm constraint `|Σ̂β − eᵢ|_∞ <= λ`.
pub fn constraint_excess(sigma: &SymMatrix, sol: &ColumnSolution) -> f64 {
    let sb = sigma.mat_vec(&sol.beta);
    let worst = sb
        .iter()
        .enumerate()
        .map(|(j, v)| (v - if j == sol.index_i { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    worst - sol.lambda
}

/// Estimates along a λ grid plus path-wide convergence diagnostics.
#[derive(Clone, Debug)]
pub struct PathFit {
    pub grid: Vec<f64>,
    pub estimates: Vec<PrecisionEstimate>,
    /// Largest [`constraint_excess`] over converged columns of the whole path.
    pub max_constraint_excess: f64,
    pub unconverged: usize,
}

/// Fits the whole grid: each column follows the λ path, then one symmetrized
/// estimate is assembled per grid point. No PD correction is applied.
pub fn fit_path(sigma: &SymMatrix, grid: &[f64], config: &SolverConfig) -> Result<PathFit> {
    config.validate()?;
    validate_grid(grid)?;
    if grid.is_empty() {
        return invalid("a path fit needs a nonempty lambda grid");
    }
    let p = sigma.dim();
    let paths = try_map_indices(config.execution, p, |i| {
        let path = solve_path_on(sigma, i, grid, config)?;
        let excess = path
            .iter()
            .filter(|s| s.converged)
            .map(|s| constraint_excess(sigma, s))
            .fold(f64::NEG_INFINITY, f64::max);
        let unconverged = path.iter().filter(|s| !s.converged).count();
        Ok::<_, ScioError>((path, excess, unconverged))
    })?;
    let max_constraint_excess = paths.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let unconverged = paths.iter().map(|p| p.2).sum();
    let estimates = (0..grid.len())
        .map(|k| {
            let cols: Vec<ColumnSolution> = paths.iter().map(|path| path.0[k].clone()).collect();
            assemble_and_symmetrize(&cols, 0.0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathFit {
        grid: grid.to_vec(),
        estimates,
        max_constraint_excess,
        unconverged,
    })
}

pub fn precision_path(
    sigma: &SymMatrix,
    grid: &[f64],
    config: &SolverConfig,
) -> Result<Vec<PrecisionEstimate>> {
    Ok(fit_path(sigma, grid, config)?.estimates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> SolverConfig {
        SolverConfig::default().with_tol(1e-12)
    }

    fn col(i: usize, beta: Vec<f64>) -> ColumnSolution {
        ColumnSolution {
            index_i: i,
            beta,
            lambda: 0.1,
            sweeps_used: 1,
            converged: true,
            kkt_residual: 0.0,
        }
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(0.3, 0.5), 0.0);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        assert_eq!(soft_threshold(-0.5, 0.5), 0.0);
    }

    #[test]
    fn coordinate_update_examples() {
        let id = SymMatrix::identity(3);
        let beta = [0.3, 7.0, -2.0];
        assert_eq!(coordinate_update(1, &beta, &id, 1, 0.0).unwrap(), 1.0);
        assert!((coordinate_update(1, &beta, &id, 1, 0.4).unwrap() - 0.6).abs() < 1e-15);

        let s = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]], 0.0).unwrap();
        assert_eq!(coordinate_update(1, &[1.0, 0.0], &s, 0, 0.0).unwrap(), -0.5);

        let degenerate = SymMatrix::from_diag(&[1.0, 0.0]);
        assert!(matches!(
            coordinate_update(1, &[0.0, 0.0], &degenerate, 0, 0.1),
            Err(ScioError::DegenerateColumn { index: 1, .. })
        ));
    }

    #[test]
    fn separable_column() {
        let id = SymMatrix::identity(4);
        let s = solve_column(&id, 2, 0.25, &SolverConfig::default(), None).unwrap();
        assert_eq!(s.beta, vec![0.0, 0.0, 0.75, 0.0]);
        assert!(s.converged);
        assert_eq!(s.kkt_residual, 0.0);

        for lambda in [1.0, 1.5, 10.0] {
            let s = solve_column(&id, 2, lambda, &SolverConfig::default(), None).unwrap();
            assert_eq!(s.beta, vec![0.0; 4]);
        }
    }

    #[test]
    fn two_by_two_column_matches_closed_form() {
        // With both coordinates active the stationarity conditions give
        // Σ̂β = e₀ − λ·sign(β), i.e. β = Σ̂⁻¹ (1 − λ, λ) for signs (+, −).
        let s = SymMatrix::from_rows(&[vec![1.0, 0.6], vec![0.6, 1.0]], 0.0).unwrap();
        let lambda = 0.01;
        let sol = solve_column(&s, 0, lambda, &tight(), None).unwrap();
        let det = 1.0 - 0.36;
        let r = [1.0 - lambda, lambda];
        let expect = [(r[0] - 0.6 * r[1]) / det, (r[1] - 0.6 * r[0]) / det];
        assert!((sol.beta[0] - expect[0]).abs() < 1e-9);
        assert!((sol.beta[1] - expect[1]).abs() < 1e-9);
        assert!(sol.beta[1] < 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let id = SymMatrix::identity(3);
        let cfg = SolverConfig::default();
        assert!(solve_column(&id, 0, 0.0, &cfg, None).is_err());
        assert!(solve_column(&id, 0, -1.0, &cfg, None).is_err());
        assert!(solve_column(&id, 3, 0.1, &cfg, None).is_err());
        assert!(solve_column(&id, 0, 0.1, &cfg, Some(&[0.0])).is_err());
        assert!(solve_column(&SymMatrix::from_diag(&[1.0, 0.0]), 0, 0.1, &cfg, None).is_err());
        let bad = SolverConfig::default().with_grid(vec![0.5, 1.0]);
        assert!(bad.validate().is_err());
        let bad = SolverConfig::default().with_grid(vec![0.5, 0.0]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sweep_budget_exhaustion_is_reported() {
        let s = SymMatrix::from_fn(6, |i, j| 0.9f64.powi((i as i32 - j as i32).abs()));
        let cfg = SolverConfig {
            max_sweeps: 1,
            ..tight()
        };
        let sol = solve_column(&s, 0, 0.001, &cfg, None).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.sweeps_used, 1);
        assert!(sol.kkt_residual > 0.0);
    }

    #[test]
    fn path_on_identity() {
        let id = SymMatrix::identity(3);
        let cfg = SolverConfig::default().with_grid(vec![1.0, 0.5, 0.1]);
        let path = solve_path(&id, 0, &cfg).unwrap();
        let firsts: Vec<f64> = path.iter().map(|s| s.beta[0]).collect();
        assert_eq!(firsts, vec![0.0, 0.5, 0.9]);
        for s in &path {
            assert_eq!(s.beta[1], 0.0);
            assert_eq!(s.beta[2], 0.0);
        }
    }

    #[test]
    fn single_point_path_equals_solve_column() {
        let s = SymMatrix::from_fn(4, |i, j| 0.5f64.powi((i as i32 - j as i32).abs()));
        let cfg = SolverConfig::default().with_grid(vec![0.2]);
        let path = solve_path(&s, 1, &cfg).unwrap();
        let direct = solve_column(&s, 1, 0.2, &cfg, None).unwrap();
        assert_eq!(path, vec![direct]);
        assert!(solve_path(&s, 1, &SolverConfig::default()).is_err());
    }

    #[test]
    fn warm_and_cold_paths_agree_on_identity() {
        let id = SymMatrix::identity(5);
        let grid = vec![0.9, 0.6, 0.3, 0.05];
        let warm = solve_path(&id, 3, &SolverConfig::default().with_grid(grid.clone())).unwrap();
        let cold = solve_path(
            &id,
            3,
            &SolverConfig {
                warm_start: false,
                ..SolverConfig::default().with_grid(grid)
            },
        )
        .unwrap();
        for (w, c) in warm.iter().zip(&cold) {
            assert_eq!(w.beta, c.beta);
        }
    }

    #[test]
    fn symmetrize_examples() {
        // β̂₁₂ = 0.5 (column 1 entry 0), β̂₂₁ = −0.3 (column 0 entry 1).
        let est = assemble_and_symmetrize(&[col(0, vec![1.0, -0.3]), col(1, vec![0.5, 1.0])], 0.0)
            .unwrap();
        assert_eq!(est.omega_hat.get(0, 1), -0.3);
        assert_eq!(est.omega_hat.get(1, 0), -0.3);

        let est = assemble_and_symmetrize(&[col(0, vec![1.0, 0.4]), col(1, vec![0.4, 1.0])], 0.0)
            .unwrap();
        assert_eq!(est.omega_hat.get(0, 1), 0.4);

        // Magnitude tie: the entry from column i (= β̂_ji) is kept.
        let est = assemble_and_symmetrize(&[col(0, vec![1.0, -0.4]), col(1, vec![0.4, 1.0])], 0.0)
            .unwrap();
        assert_eq!(est.omega_hat.get(0, 1), -0.4);
        assert_eq!(est.omega_hat.get(1, 0), -0.4);
    }

    #[test]
    fn symmetrize_rejects_bad_column_sets() {
        let a = col(0, vec![1.0, 0.0]);
        assert!(assemble_and_symmetrize(&[a.clone(), a.clone()], 0.0).is_err());
        assert!(assemble_and_symmetrize(std::slice::from_ref(&a), 0.0).is_err());
        assert!(assemble_and_symmetrize(&[a, col(2, vec![0.0, 1.0])], 0.0).is_err());
        assert!(assemble_and_symmetrize(&[], 0.0).is_err());
    }

    #[test]
    fn per_column_lambda_length_checked() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0], vec![0.0, 0.5]]).unwrap();
        let r = estimate_precision(
            EstimateInput::Data(&x),
            &LambdaSpec::PerColumn(vec![0.1, 0.2, 0.3]),
            &SolverConfig::default(),
            EstimateOptions::default(),
        );
        assert!(matches!(
            r,
            Err(ScioError::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn scalar_problem_closed_form() {
        let x = DataMatrix::from_rows(&[vec![-1.0], vec![1.0], vec![3.0], vec![1.0]]).unwrap();
        // mean 1, Σ̂ = (4 + 0 + 4 + 0) / 4 = 2.
        let lambda = 0.3;
        let est = estimate_precision(
            EstimateInput::Data(&x),
            &LambdaSpec::Single(lambda),
            &SolverConfig::default(),
            EstimateOptions::default(),
        )
        .unwrap();
        assert_eq!(est.omega_hat.get(0, 0), (1.0 - lambda) / 2.0);
        assert_eq!(est.rho_applied, 0.0);
        assert_eq!(est.covariance_rho, 0.0);
    }

    #[test]
    fn cv_requires_data() {
        let c = CovarianceEstimate::new(SymMatrix::identity(2), 10);
        let r = estimate_precision(
            EstimateInput::Covariance(&c),
            &LambdaSpec::CrossValidated(CvPlan::default()),
            &SolverConfig::default(),
            EstimateOptions::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn json_round_trip() {
        let est =
            assemble_and_symmetrize(&[col(0, vec![1.25, -0.3]), col(1, vec![0.5, 0.75])], 0.0)
                .unwrap();
        let back = PrecisionEstimate::from_json(&est.to_json().unwrap()).unwrap();
        assert_eq!(back, est);
        let v: serde_json::Value = serde_json::from_str(&est.to_json().unwrap()).unwrap();
        assert_eq!(v["p"], 2);
        assert_eq!(v["omega"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn default_grid_shape() {
        let s = SymMatrix::from_rows(&[vec![1.0, -0.4], vec![-0.4, 2.0]], 0.0).unwrap();
        let g = default_grid(&s);
        assert_eq!(g.len(), 50);
        assert!((g[0] - 0.4).abs() < 1e-15);
        assert!((g[49] - 0.004).abs() < 1e-12);
        assert!(validate_grid(&g).is_ok());
        assert_eq!(default_grid(&SymMatrix::identity(1))[0], 1.0);
    }

    #[test]
    fn execution_modes_agree() {
        let s = SymMatrix::from_fn(12, |i, j| 0.6f64.powi((i as i32 - j as i32).abs()));
        let grid = default_grid(&s);
        let seq = precision_path(
            &s,
            &grid,
            &SolverConfig::default().with_execution(Execution::Sequential),
        )
        .unwrap();
        let par = precision_path(
            &s,
            &grid,
            &SolverConfig::default().with_execution(Execution::Parallel),
        )
        .unwrap();
        assert_eq!(seq, par);
    }
}
