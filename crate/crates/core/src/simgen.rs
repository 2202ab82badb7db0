//! Ground-truth graph models and Gaussian sampling.
//!
//! Every random draw goes through [`SimRng`] (ChaCha20). A run seeded with
//! `seed` hands replicate-level work a child generator obtained by
//! [`child_rng`]: same seed, stream number set to the child index. Any child
//! can therefore be regenerated on its own.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covariance::DataMatrix;
use crate::error::{invalid, Result, ScioError};
use crate::matrix::{Cholesky, Spectrum, SymMatrix};

pub type SimRng = ChaCha20Rng;

pub fn child_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `[B]_ij = base^|i−j|`.
pub fn gen_decay(p: usize, base: f64) -> Result<SymMatrix> {
    if p == 0 {
        return invalid("decay model needs p >= 1");
    }
    if !(base.abs() < 1.0) {
        return invalid(format!("decay base must satisfy |base| < 1, got {base}"));
    }
    Ok(SymMatrix::from_fn(p, |i, j| {
        base.powi(i.abs_diff(j) as i32)
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseBlock {
    pub omega: SymMatrix,
    /// Diagonal shift chosen so that `cond(O + δI) = p` before standardisation.
    pub delta: f64,
    /// No off-diagonal entry was drawn; the block is the identity.
    pub degenerate: bool,
}

const COND_TOL: f64 = 1e-8;
const COND_MAX_ITER: usize = 200;
const SPARSE_RETRIES: usize = 10;

/// Condition number of `O + δI` from the extreme eigenvalues of `O`, for
/// `δ > −μ_min`.
fn shifted_cond(mu_max: f64, mu_min: f64, delta: f64) -> f64 {
    (mu_max + delta) / (mu_min + delta)
}

/// Bisection for `δ` with `cond(O + δI) = target`, searched above `−μ_min`
/// where the condition number decreases monotonically from infinity to 1.
pub fn condition_shift(mu_max: f64, mu_min: f64, target: f64) -> Result<f64> {
    if !(mu_max > mu_min) || !(target > 1.0) {
        return invalid("condition-number shift needs distinct extreme eigenvalues and target > 1");
    }
    let scale = mu_max.abs().max(mu_min.abs());
    let mut lo = -mu_min;
    let mut hi = 10.0 * scale;
    while shifted_cond(mu_max, mu_min, hi) > target {
        hi = lo + 2.0 * (hi - lo);
    }
    for _ in 0..COND_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let c = shifted_cond(mu_max, mu_min, mid);
        if (c - target).abs() <= COND_TOL || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if c > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (shifted_cond(mu_max, mu_min, mid) - target).abs() <= COND_TOL {
        return Ok(mid);
    }
    Err(ScioError::NoConvergence {
        what: "condition-number bisection",
        iterations: COND_MAX_ITER,
        last: mid,
    })
}

/// Symmetric `O` with off-diagonal entries `value` with probability `prob`,
/// shifted by `δI` so that its condition number is `p`, then rescaled to unit
/// diagonal.
pub fn gen_sparse(p: usize, prob: f64, value: f64, rng: &mut SimRng) -> Result<SparseBlock> {
    if p == 0 {
        return invalid("sparse model needs p >= 1");
    }
    if !(0.0..=1.0).contains(&prob) {
        return invalid(format!("sparse probability must lie in [0, 1], got {prob}"));
    }
    if !value.is_finite() {
        return invalid("sparse value must be finite");
    }
    for _ in 0..SPARSE_RETRIES {
        let mut o = SymMatrix::zeros(p);
        let mut any = false;
        for i in 0..p {
            for j in (i + 1)..p {
                if rng.random::<f64>() < prob {
                    o.set(i, j, value);
                    any = any || value != 0.0;
                }
            }
        }
        if !any || p == 1 {
            log::warn!("sparse model draw has no off-diagonal entries; using the identity");
            return Ok(SparseBlock {
                omega: SymMatrix::identity(p),
                delta: 0.0,
                degenerate: true,
            });
        }
        let spec = Spectrum::new(&o)?;
        let tol = 1e-14 * (1.0 + value.abs() * p as f64);
        let (mu_min, mu_max) = (spec.min(tol)?, spec.max(tol)?);
        let delta = match condition_shift(mu_max, mu_min, p as f64) {
            Ok(d) => d,
            Err(_) => continue,
        };
        let shifted = o.add_diagonal(delta);
        // Every diagonal entry equals δ, so standardising divides by δ and
        // sets the diagonal to exactly 1.
        let omega = SymMatrix::from_fn(p, |i, j| {
            if i == j {
                1.0
            } else {
                shifted.get(i, j) / delta
            }
        });
        return Ok(SparseBlock {
            omega,
            delta,
            degenerate: false,
        });
    }
    Err(ScioError::NoConvergence {
        what: "sparse model generation",
        iterations: SPARSE_RETRIES,
        last: f64::NAN,
    })
}

/// Block-diagonal compound-symmetry blocks (unit diagonal, `offdiag` inside
/// each block), then a uniformly random simultaneous row/column permutation.
/// A trailing block shorter than `block_size` gets the same pattern.
pub fn gen_block(p: usize, block_size: usize, offdiag: f64, rng: &mut SimRng) -> Result<SymMatrix> {
    if p == 0 || block_size == 0 {
        return invalid("block model needs p >= 1 and block_size >= 1");
    }
    let base = SymMatrix::from_fn(p, |i, j| {
        if i == j {
            1.0
        } else if i / block_size == j / block_size {
            offdiag
        } else {
            0.0
        }
    });
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(rng);
    Ok(base.permuted(&perm))
}

/// `diag(B, 4B)`.
pub fn two_block_compose(first_block: &SymMatrix) -> SymMatrix {
    first_block.block_diag(&first_block.scaled(4.0))
}

/// `n` draws from `N(0, Ω⁻¹)`: with `Ω = L Lᵀ`, each row is `L⁻ᵀ z`.
pub fn sample_gaussian(omega: &SymMatrix, n: usize, rng: &mut SimRng) -> Result<DataMatrix> {
    let chol = Cholesky::factor(omega)?;
    let p = omega.dim();
    let mut data = Vec::with_capacity(n * p);
    for _ in 0..n {
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        data.extend(chol.solve_upper(&z));
    }
    DataMatrix::from_vec(n, p, data)
}

/// `n` draws from `N(0, Σ)`: with `Σ = L Lᵀ`, each row is `L z`.
pub fn sample_gaussian_cov(sigma: &SymMatrix, n: usize, rng: &mut SimRng) -> Result<DataMatrix> {
    let chol = Cholesky::factor(sigma)?;
    let p = sigma.dim();
    let mut data = Vec::with_capacity(n * p);
    for _ in 0..n {
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        data.extend(chol.mul_lower(&z));
    }
    DataMatrix::from_vec(n, p, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Decay,
    Sparse,
    Block,
}

impl std::str::FromStr for ModelKind {
    type Err = ScioError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decay" => Ok(Self::Decay),
            "sparse" => Ok(Self::Sparse),
            "block" => Ok(Self::Block),
            other => invalid(format!("unknown model {other:?} (decay, sparse, block)")),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Decay => "decay",
            Self::Sparse => "sparse",
            Self::Block => "block",
        })
    }
}

/// First-block model parameters. The full truth is `diag(B, 4B)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphModelSpec {
    pub kind: ModelKind,
    /// Size of the first block.
    pub p_block: usize,
    pub decay_base: f64,
    pub sparse_prob: f64,
    pub sparse_value: f64,
    pub block_size: usize,
    pub block_offdiag: f64,
}

impl GraphModelSpec {
    pub fn new(kind: ModelKind, p_block: usize) -> Self {
        Self {
            kind,
            p_block,
            decay_base: 0.6,
            sparse_prob: 0.1,
            sparse_value: 0.5,
            block_size: 5,
            block_offdiag: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_block == 0 {
            return invalid("p_block must be at least 1");
        }
        match self.kind {
            ModelKind::Decay if !(self.decay_base.abs() < 1.0) => invalid(format!(
                "decay base must satisfy |base| < 1, got {}",
                self.decay_base
            )),
            ModelKind::Sparse if !(0.0..=1.0).contains(&self.sparse_prob) => invalid(format!(
                "sparse probability must lie in [0, 1], got {}",
                self.sparse_prob
            )),
            ModelKind::Block if self.block_size == 0 => invalid("block size must be at least 1"),
            ModelKind::Block if !(self.block_offdiag.abs() < 1.0) => invalid(format!(
                "block off-diagonal must satisfy |value| < 1, got {}",
                self.block_offdiag
            )),
            _ => Ok(()),
        }
    }

    pub fn first_block(&self, rng: &mut SimRng) -> Result<SymMatrix> {
        self.validate()?;
        match self.kind {
            ModelKind::Decay => gen_decay(self.p_block, self.decay_base),
            ModelKind::Sparse => {
                Ok(gen_sparse(self.p_block, self.sparse_prob, self.sparse_value, rng)?.omega)
            }
            ModelKind::Block => gen_block(self.p_block, self.block_size, self.block_offdiag, rng),
        }
    }

    /// `diag(B, 4B)` for a freshly drawn first block `B`.
    pub fn generate(&self, rng: &mut SimRng) -> Result<SymMatrix> {
        Ok(two_block_compose(&self.first_block(rng)?))
    }
}
