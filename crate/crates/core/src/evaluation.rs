//! Losses against a known truth, support recovery rates, the Bregman
//! validation loss and the two-class Gaussian score.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScioError};
use crate::matrix::{
    elementwise_max_norm, frobenius_norm, log_det_pd, spectral_norm, Cholesky, SymMatrix,
    DEFAULT_POWER_MAX_ITER, DEFAULT_POWER_TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub spectral: f64,
    pub frobenius: f64,
    pub elementwise_max: f64,
    pub frobenius_sq_over_p: f64,
}

/// Norms of `omega_hat − omega_truth`.
pub fn loss_report(omega_hat: &SymMatrix, omega_truth: &SymMatrix) -> Result<LossReport> {
    let diff = omega_hat.sub(omega_truth)?;
    let frobenius = frobenius_norm(&diff);
    Ok(LossReport {
        spectral: spectral_norm(&diff, DEFAULT_POWER_TOL, DEFAULT_POWER_MAX_ITER)?,
        frobenius,
        elementwise_max: elementwise_max_norm(&diff),
        frobenius_sq_over_p: frobenius * frobenius / diff.dim() as f64,
    })
}

/// `‖omega_hat − omega_truth‖_F`.
pub fn frobenius_loss(omega_hat: &SymMatrix, omega_truth: &SymMatrix) -> Result<f64> {
    Ok(frobenius_norm(&omega_hat.sub(omega_truth)?))
}

/// Edge recovery over unordered off-diagonal pairs. A percentage is `None`
/// when its denominator is empty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub tn_pct: Option<f64>,
    pub tp_pct: Option<f64>,
    pub true_pos: usize,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

/// Truth edges are exact nonzeros; estimated edges are `|ω̂_ij| > threshold`.
pub fn support_report(
    omega_hat: &SymMatrix,
    omega_truth: &SymMatrix,
    threshold: f64,
) -> Result<SupportReport> {
    omega_hat.check_same_dim(omega_truth)?;
    let p = omega_hat.dim();
    let (mut tp, mut tn, mut fp, mut fneg) = (0, 0, 0, 0);
    for i in 0..p {
        for j in (i + 1)..p {
            let truth = omega_truth.get(i, j) != 0.0;
            let est = omega_hat.get(i, j).abs() > threshold;
            match (truth, est) {
                (true, true) => tp += 1,
                (true, false) => fneg += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
            }
        }
    }
    let pct = |num: usize, den: usize| (den > 0).then(|| 100.0 * num as f64 / den as f64);
    Ok(SupportReport {
        tp_pct: pct(tp, tp + fneg),
        tn_pct: pct(tn, tn + fp),
        true_pos: tp,
        true_neg: tn,
        false_pos: fp,
        false_neg: fneg,
    })
}

/// `⟨Ω, Σ⟩ − log det Ω`.
pub fn bregman_loss(sigma_val: &SymMatrix, omega: &SymMatrix) -> Result<f64> {
    Ok(omega.inner(sigma_val)? - log_det_pd(omega)?)
}

/// Two-class Gaussian discriminant score
/// `−(x−μ_k)ᵀΩ_k(x−μ_k) + (x−μ_k')ᵀΩ_k'(x−μ_k') + log det Ω_k − log det Ω_k'`.
/// Positive means class `k`.
pub fn classification_score(
    x: &[f64],
    mean_k: &[f64],
    mean_k2: &[f64],
    omega_k: &SymMatrix,
    omega_k2: &SymMatrix,
) -> Result<f64> {
    let p = omega_k.dim();
    omega_k.check_same_dim(omega_k2)?;
    for v in [x, mean_k, mean_k2] {
        if v.len() != p {
            return Err(ScioError::DimensionMismatch {
                expected: p,
                found: v.len(),
            });
        }
    }
    let quad = |mean: &[f64], omega: &SymMatrix| {
        let d: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
        omega.quad_form(&d)
    };
    let ld_k = Cholesky::factor(omega_k)?.log_det();
    let ld_k2 = Cholesky::factor(omega_k2)?.log_det();
    // Grouped so that swapping the classes negates the result exactly.
    Ok((quad(mean_k2, omega_k2) - quad(mean_k, omega_k)) + (ld_k - ld_k2))
}

pub fn classify(
    x: &[f64],
    mean_k: &[f64],
    mean_k2: &[f64],
    omega_k: &SymMatrix,
    omega_k2: &SymMatrix,
) -> Result<bool> {
    Ok(classification_score(x, mean_k, mean_k2, omega_k, omega_k2)? > 0.0)
}
