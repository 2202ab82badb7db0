//! Independent checks for the column solver and the incoherence diagnostic.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::{perturb_to_pd, sample_covariance};
use crate::error::{invalid, Result, ScioError};
use crate::matrix::{dot, Cholesky, SymMatrix};
use crate::simgen::{sample_gaussian, SimRng};
use crate::solver::{column_objective, solve_column, SolverConfig};

/// Largest dimension accepted by [`brute_force_column`].
pub const BRUTE_FORCE_MAX_P: usize = 12;
/// Truth entries below this magnitude are treated as zero when deriving supports.
pub const SUPPORT_ZERO: f64 = 1e-10;

/// Exact minimiser of `½ βᵀ Σ̂ β − β_i + λ|β|₁` by enumerating every sign
/// pattern in `{−, 0, +}^p`. For each pattern the stationarity equations on
/// the nonzero set are solved directly; candidates whose signs and
/// zero-coordinate subgradient bounds are consistent are kept, and the one
/// with the smallest objective wins (first pattern in enumeration order on
/// ties).
pub fn brute_force_column(sigma: &SymMatrix, i: usize, lambda: f64) -> Result<Vec<f64>> {
    let p = sigma.dim();
    if p > BRUTE_FORCE_MAX_P {
        return invalid(format!(
            "brute force column solver supports p <= {BRUTE_FORCE_MAX_P}, got {p}"
        ));
    }
    if i >= p {
        return invalid(format!("column index {i} out of range for p = {p}"));
    }
    if !(lambda >= 0.0) {
        return invalid("lambda must be non-negative");
    }
    let slack = 1e-10 * (1.0 + lambda);
    let mut signs = vec![0i8; p];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = 3usize.pow(p as u32);
    for code in 0..total {
        let mut c = code;
        for s in signs.iter_mut() {
            *s = (c % 3) as i8 - 1;
            c /= 3;
        }
        let active: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
        let mut beta = vec![0.0; p];
        if !active.is_empty() {
            let sub = sigma.principal(&active);
            let chol = match Cholesky::factor(&sub) {
                Ok(ch) => ch,
                Err(_) => continue,
            };
            let rhs: Vec<f64> = active
                .iter()
                .map(|&j| if j == i { 1.0 } else { 0.0 } - lambda * signs[j] as f64)
                .collect();
            let sol = chol.solve(&rhs);
            if sol
                .iter()
                .zip(&active)
                .any(|(v, &j)| !(v * signs[j] as f64 > 0.0))
            {
                continue;
            }
            for (v, &j) in sol.iter().zip(&active) {
                beta[j] = *v;
            }
        }
        let grad = gradient(sigma, i, &beta);
        let feasible = (0..p)
            .filter(|&j| signs[j] == 0)
            .all(|j| grad[j].abs() <= lambda + slack);
        if !feasible {
            continue;
        }
        let obj = objective(sigma, i, lambda, &beta);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, beta));
        }
    }
    best.map(|(_, b)| b).ok_or(ScioError::NoConvergence {
        what: "brute force enumeration (no consistent sign pattern)",
        iterations: total,
        last: f64::NAN,
    })
}

fn gradient(sigma: &SymMatrix, i: usize, beta: &[f64]) -> Vec<f64> {
    (0..sigma.dim())
        .map(|j| dot(sigma.column(j), beta) - if j == i { 1.0 } else { 0.0 })
        .collect()
}

fn objective(sigma: &SymMatrix, i: usize, lambda: f64, beta: &[f64]) -> f64 {
    0.5 * sigma.quad_form(beta) - beta[i] + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Largest violation of the optimality conditions for the column problem:
/// `|g_j + λ sign(β_j)|` on nonzero coordinates and `max(|g_j| − λ, 0)` on
/// zero ones, with `g = Σ̂β − eᵢ`.
pub fn kkt_residual(beta: &[f64], sigma: &SymMatrix, i: usize, lambda: f64) -> f64 {
    let g = gradient(sigma, i, beta);
    beta.iter()
        .zip(&g)
        .map(|(&b, &gj)| {
            if b != 0.0 {
                (gj + lambda * b.signum()).abs()
            } else {
                (gj.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Set of `(row, column)` positions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SupportSet {
    pub p: usize,
    pub pairs: BTreeSet<(usize, usize)>,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.contains(&(i, j))
    }

    /// Sorted row indices in column `j`.
    pub fn column(&self, j: usize) -> Vec<usize> {
        (0..self.p).filter(|&i| self.contains(i, j)).collect()
    }
}

/// Positions with `|a_ij| > threshold`.
pub fn support_of(a: &SymMatrix, threshold: f64) -> SupportSet {
    let p = a.dim();
    let mut pairs = BTreeSet::new();
    for i in 0..p {
        for j in 0..p {
            if a.get(i, j).abs() > threshold {
                pairs.insert((i, j));
            }
        }
    }
    SupportSet { p, pairs }
}

/// `1 − max_i ‖Σ_{Sᵢᶜ×Sᵢ} Σ_{Sᵢ×Sᵢ}⁻¹‖_∞` where `Sᵢ` is the support of column
/// `i` of `omega_truth` and `‖·‖_∞` is the maximum absolute row sum. A positive
/// value means the incoherence condition holds with that margin.
pub fn irrepresentable_margin(sigma: &SymMatrix, omega_truth: &SymMatrix) -> Result<f64> {
    sigma.check_same_dim(omega_truth)?;
    let p = sigma.dim();
    let support = support_of(omega_truth, 0.0);
    let mut worst = 0.0f64;
    for i in 0..p {
        let s = support.column(i);
        if s.is_empty() {
            continue;
        }
        let sc: Vec<usize> = (0..p).filter(|j| !s.contains(j)).collect();
        if sc.is_empty() {
            continue;
        }
        let chol = Cholesky::factor(&sigma.principal(&s))?;
        for &r in &sc {
            // Row r of Σ_{Sᶜ,S} Σ_{S,S}⁻¹ is (Σ_{S,S}⁻¹ Σ_{S,r})ᵀ.
            let cross: Vec<f64> = s.iter().map(|&k| sigma.get(r, k)).collect();
            let row = chol.solve(&cross);
            worst = worst.max(row.iter().map(|v| v.abs()).sum());
        }
    }
    Ok(1.0 - worst)
}

/// Inverse of a small PD matrix with entries below [`SUPPORT_ZERO`] set to 0.
pub fn truth_precision(sigma: &SymMatrix) -> Result<SymMatrix> {
    let inv = Cholesky::factor(sigma)?.inverse();
    let p = inv.dim();
    Ok(SymMatrix::from_fn(p, |i, j| {
        let v = inv.get(i, j);
        if v.abs() < SUPPORT_ZERO {
            0.0
        } else {
            v
        }
    }))
}

/// Four-node diamond graph covariance: unit diagonal, `σ₂₃ = 0`,
/// `σ₁₄ = 2ρ²`, every other off-diagonal entry `ρ` (1-based labels).
pub fn diamond_graph(rho: f64) -> SymMatrix {
    SymMatrix::from_fn(4, |i, j| match (i, j) {
        _ if i == j => 1.0,
        (1, 2) => 0.0,
        (0, 3) => 2.0 * rho * rho,
        _ => rho,
    })
}

/// Four-node star graph covariance with hub 1: `σ₁ⱼ = ρ`, `σᵢⱼ = ρ²` between
/// leaves, unit diagonal.
pub fn star_graph(rho: f64) -> SymMatrix {
    SymMatrix::from_fn(4, |i, j| match (i, j) {
        _ if i == j => 1.0,
        (0, _) => rho,
        _ => rho * rho,
    })
}

/// Incoherence margin of a covariance whose truth support is read off its
/// inverse.
pub fn graph_margin(sigma: &SymMatrix) -> Result<f64> {
    irrepresentable_margin(sigma, &truth_precision(sigma)?)
}

/// One column problem for differential testing, serializable for replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnInstance {
    pub sigma: Vec<Vec<f64>>,
    pub column: usize,
    pub lambda: f64,
}

impl ColumnInstance {
    pub fn sigma(&self) -> Result<SymMatrix> {
        SymMatrix::from_rows(&self.sigma, 0.0)
    }
}

/// Sample covariance of `3p` standard normal rows (PD-perturbed if needed),
/// a uniform column and λ log-uniform in `[lambda_lo, lambda_hi]`.
pub fn random_instance(
    p: usize,
    lambda_lo: f64,
    lambda_hi: f64,
    rng: &mut SimRng,
) -> Result<ColumnInstance> {
    if p == 0 || !(lambda_lo > 0.0 && lambda_hi >= lambda_lo) {
        return invalid("random instance needs p >= 1 and 0 < lambda_lo <= lambda_hi");
    }
    let x = sample_gaussian(&SymMatrix::identity(p), 3 * p.max(2), rng)?;
    let sigma = perturb_to_pd(&sample_covariance(&x)?)?.sigma_hat;
    let column = rng.random_range(0..p);
    let u: f64 = rng.random();
    let lambda = (lambda_lo.ln() + u * (lambda_hi.ln() - lambda_lo.ln())).exp();
    Ok(ColumnInstance {
        sigma: sigma.rows(),
        column,
        lambda,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    /// `objective(solver) − objective(oracle)`; non-negative up to rounding.
    pub objective_gap: f64,
    pub max_coordinate_diff: f64,
    pub solver_converged: bool,
}

/// Solves `instance` with coordinate descent under `config` and with
/// [`brute_force_column`], and reports how far apart they are.
pub fn compare_with_oracle(
    instance: &ColumnInstance,
    config: &SolverConfig,
) -> Result<OracleComparison> {
    let sigma = instance.sigma()?;
    let (i, lambda) = (instance.column, instance.lambda);
    let cd = solve_column(&sigma, i, lambda, config, None)?;
    let exact = brute_force_column(&sigma, i, lambda)?;
    Ok(OracleComparison {
        objective_gap: column_objective(&sigma, i, lambda, &cd.beta)
            - column_objective(&sigma, i, lambda, &exact),
        max_coordinate_diff: cd
            .beta
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max),
        solver_converged: cd.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_examples() {
        let id = SymMatrix::identity(3);
        assert_eq!(
            brute_force_column(&id, 1, 0.25).unwrap(),
            vec![0.0, 0.75, 0.0]
        );
        let s = SymMatrix::from_fn(3, |i, j| if i == j { 1.0 } else { 0.3 });
        for lambda in [1.0, 1.7] {
            assert_eq!(brute_force_column(&s, 0, lambda).unwrap(), vec![0.0; 3]);
        }
        assert!(brute_force_column(&SymMatrix::identity(13), 0, 0.1).is_err());
    }

    #[test]
    fn brute_force_is_kkt_optimal() {
        let s = SymMatrix::from_fn(5, |i, j| 0.55f64.powi((i as i32 - j as i32).abs()));
        for i in 0..5 {
            for lambda in [0.01, 0.1, 0.3] {
                let b = brute_force_column(&s, i, lambda).unwrap();
                assert!(kkt_residual(&b, &s, i, lambda) < 1e-8);
            }
        }
    }

    #[test]
    fn kkt_examples() {
        let id = SymMatrix::identity(3);
        assert_eq!(kkt_residual(&[0.0, 0.0, 0.6], &id, 2, 0.4), 0.0);
        assert_eq!(kkt_residual(&[0.0; 3], &id, 1, 2.0), 0.0);
        assert_eq!(kkt_residual(&[0.0, 1.0, 0.0], &id, 1, 0.5), 0.5);
        assert!(kkt_residual(&[0.0; 3], &id, 1, 0.5) > 0.0);
    }

    #[test]
    fn support_examples() {
        let s = support_of(&SymMatrix::identity(3), 0.0);
        assert_eq!(
            s.pairs.into_iter().collect::<Vec<_>>(),
            vec![(0, 0), (1, 1), (2, 2)]
        );
        assert!(support_of(&SymMatrix::zeros(3), 0.0).is_empty());
        let decay = SymMatrix::from_fn(3, |i, j| 0.6f64.powi((i as i32 - j as i32).abs()));
        assert_eq!(support_of(&decay, 0.0).len(), 9);
        assert_eq!(support_of(&decay, 0.5).len(), 7);
    }

    #[test]
    fn margin_of_diagonal_is_one() {
        let d = SymMatrix::from_diag(&[1.0, 2.0, 3.0]);
        let o = SymMatrix::from_diag(&[1.0, 0.5, 1.0 / 3.0]);
        assert_eq!(irrepresentable_margin(&d, &o).unwrap(), 1.0);
        assert!(irrepresentable_margin(&d, &SymMatrix::identity(2)).is_err());
    }

    #[test]
    fn diamond_and_star() {
        assert!(graph_margin(&diamond_graph(0.4)).unwrap() > 0.0);
        assert!(graph_margin(&diamond_graph(0.6)).unwrap() <= 0.0);
        assert!(graph_margin(&star_graph(0.9)).unwrap() > 0.0);
        assert_eq!(diamond_graph(0.3).get(1, 3), 0.3);
        assert_eq!(diamond_graph(0.3).get(1, 2), 0.0);
    }

    #[test]
    fn solver_matches_oracle_on_random_instances() {
        let cfg = SolverConfig::default().with_tol(1e-12);
        let mut rng = crate::simgen::child_rng(5, 0);
        for p in 2..=6 {
            let inst = random_instance(p, 0.01, 2.0, &mut rng).unwrap();
            let c = compare_with_oracle(&inst, &cfg).unwrap();
            assert!(c.solver_converged);
            assert!(c.objective_gap.abs() < 1e-9, "{c:?}");
            assert!(c.max_coordinate_diff < 1e-7, "{c:?}");
        }
    }
}
