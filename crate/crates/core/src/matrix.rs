//! Dense symmetric matrices and the norm / spectral primitives used by the
//! estimator, the diagnostics and the evaluation code.
//!
//! Storage is full row-major `p × p`. Every write goes through a symmetric
//! setter, so `a[i][j]` and `a[j][i]` are always bit-identical. Because of
//! that, row `j` doubles as column `j`, which is what the column solver reads.

use std::fmt::Write as _;

use crate::error::{invalid, Result, ScioError};

pub const DEFAULT_POWER_TOL: f64 = 1e-10;
pub const DEFAULT_POWER_MAX_ITER: usize = 10_000;
pub const DEFAULT_EIGEN_TOL: f64 = 1e-14;
/// Cholesky pivots at or below this value are treated as a PD failure.
pub const PIVOT_FLOOR: f64 = 1e-12;
/// Tolerance used by the text reader when checking symmetry.
pub const READ_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix requires dim >= 1");
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix by evaluating `f(i, j)` on the upper triangle and mirroring.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from rows. Rows must be square and symmetric within
    /// `tol`; the stored result is the average `(a + aᵀ) / 2`.
    pub fn from_rows(rows: &[Vec<f64>], tol: f64) -> Result<Self> {
        let p = rows.len();
        if p == 0 {
            return invalid("matrix must have at least one row");
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(ScioError::Parse(format!(
                    "row {r} has {} entries, expected {p}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(ScioError::Parse(format!("non-finite entry {v} in row {r}")));
            }
        }
        let mut m = Self::zeros(p);
        for i in 0..p {
            for j in i..p {
                let (a, b) = (rows[i][j], rows[j][i]);
                if (a - b).abs() > tol {
                    return Err(ScioError::Parse(format!(
                        "entries ({i},{j})={a} and ({j},{i})={b} differ by more than {tol}"
                    )));
                }
                m.set(i, j, 0.5 * (a + b));
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Symmetric setter: writes both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let p = self.dim;
        self.data[i * p + j] = value;
        self.data[j * p + i] = value;
    }

    /// Row `j`, which equals column `j`.
    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.column(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add_diagonal(&self, rho: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.data[i * self.dim + i] += rho;
        }
        m
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(ScioError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.dim).map(|i| dot(self.column(i), x)).collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mat_vec(x))
    }

    /// Trace inner product `Σ_ij a_ij b_ij`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok(dot(&self.data, &other.data))
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn principal(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Simultaneous row/column permutation: `out[a][b] = self[perm[a]][perm[b]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim);
        self.principal(perm)
    }

    /// Block-diagonal concatenation `diag(self, other)`.
    pub fn block_diag(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        let mut m = Self::zeros(a + b);
        for i in 0..a {
            for j in i..a {
                m.set(i, j, self.get(i, j));
            }
        }
        for i in 0..b {
            for j in i..b {
                m.set(a + i, a + j, other.get(i, j));
            }
        }
        m
    }

    /// Largest absolute off-diagonal entry (0 for `p = 1`).
    pub fn max_abs_offdiag(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                m = m.max(self.get(i, j).abs());
            }
        }
        m
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Largest singular value (max |eigenvalue| for symmetric input) by power
/// iteration. Convergence is declared when the relative change of `‖A v‖`
/// drops below `tol`. Power iteration stalls when the two largest
/// eigenvalue magnitudes nearly coincide (e.g. `±λ`); if `max_iter` runs
/// out, the extreme eigenvalues are found by bisection instead.
pub fn spectral_norm(a: &SymMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return invalid("spectral_norm tolerance must be positive");
    }
    let p = a.dim();
    if a.as_slice().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    // Deterministic start, slightly off the all-ones direction so that
    // structured matrices (e.g. Laplacian-like) do not annihilate it.
    let mut v: Vec<f64> = (0..p)
        .map(|j| 1.0 + 0.1 * ((j as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    let n0 = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n0);

    let mut prev = 0.0;
    for it in 0..max_iter {
        let w = a.mat_vec(&v);
        let mu = norm2(&w);
        if mu == 0.0 {
            // Start vector sits in the null space; restart from a basis vector.
            v = vec![0.0; p];
            v[it % p] = 1.0;
            continue;
        }
        if it > 0 && (mu - prev).abs() <= tol * mu {
            return Ok(mu);
        }
        prev = mu;
        v = w.into_iter().map(|x| x / mu).collect();
    }
    log::debug!("power iteration stalled after {max_iter} steps; using bisection");
    let spectrum = Spectrum::new(a)?;
    let width = tol * spectrum.lo.abs().max(spectrum.hi.abs());
    Ok(spectrum.min(width)?.abs().max(spectrum.max(width)?.abs()))
}

pub fn frobenius_norm(a: &SymMatrix) -> f64 {
    norm2(a.as_slice())
}

pub fn elementwise_max_norm(a: &SymMatrix) -> f64 {
    a.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Maximum absolute column sum.
pub fn matrix_l1_norm(a: &SymMatrix) -> f64 {
    (0..a.dim())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Fails with `NotPositiveDefinite` on the first pivot `<= PIVOT_FLOOR`.
    pub fn factor(a: &SymMatrix) -> Result<Self> {
        let p = a.dim();
        let mut l = vec![0.0; p * p];
        for j in 0..p {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * p + k] * l[j * p + k];
            }
            if !(d > PIVOT_FLOOR) {
                return Err(ScioError::NotPositiveDefinite { index: j, pivot: d });
            }
            let d = d.sqrt();
            l[j * p + j] = d;
            for i in (j + 1)..p {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * p + k] * l[j * p + k];
                }
                l[i * p + j] = s / d;
            }
        }
        Ok(Self { dim: p, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim)
            .map(|i| self.lower[i * self.dim + i].ln())
            .sum::<f64>()
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let p = self.dim;
        let mut y = b.to_vec();
        for i in 0..p {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lower[i * p + k] * y[k];
            }
            y[i] = s / self.lower[i * p + i];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let p = self.dim;
        let mut x = y.to_vec();
        for i in (0..p).rev() {
            let mut s = x[i];
            for k in (i + 1)..p {
                s -= self.lower[k * p + i] * x[k];
            }
            x[i] = s / self.lower[i * p + i];
        }
        x
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let p = self.dim;
        (0..p)
            .map(|i| dot(&self.lower[i * p..i * p + i + 1], &z[..=i]))
            .collect()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn inverse(&self) -> SymMatrix {
        let p = self.dim;
        let mut inv = SymMatrix::zeros(p);
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            let col = self.solve(&e);
            for (i, v) in col.into_iter().enumerate().skip(j) {
                inv.set(i, j, v);
            }
        }
        inv
    }
}

/// Log-determinant of a positive definite matrix.
pub fn log_det_pd(a: &SymMatrix) -> Result<f64> {
    Ok(Cholesky::factor(a)?.log_det())
}

/// Householder reduction to symmetric tridiagonal form. Returns the diagonal
/// and the sub-diagonal (length `p - 1`).
fn tridiagonalize(a: &SymMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.dim();
    let mut m: Vec<f64> = a.as_slice().to_vec();
    let mut off = vec![0.0; n.saturating_sub(1)];
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = ((k + 1)..n).map(|r| m[r * n + k]).collect();
        let xnorm = norm2(&x);
        if xnorm == 0.0 {
            off[k] = 0.0;
            continue;
        }
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm = norm2(&v);
        if vnorm == 0.0 {
            off[k] = alpha;
            continue;
        }
        v.iter_mut().for_each(|c| *c /= vnorm);
        let len = n - k - 1;
        // p = A22 v
        let pv: Vec<f64> = (0..len)
            .map(|r| {
                (0..len)
                    .map(|c| m[(k + 1 + r) * n + k + 1 + c] * v[c])
                    .sum()
            })
            .collect();
        let kk = dot(&v, &pv);
        let q: Vec<f64> = pv.iter().zip(&v).map(|(pi, vi)| pi - kk * vi).collect();
        for r in 0..len {
            for c in 0..len {
                m[(k + 1 + r) * n + k + 1 + c] -= 2.0 * (v[r] * q[c] + q[r] * v[c]);
            }
        }
        off[k] = alpha;
        for r in (k + 1)..n {
            m[r * n + k] = 0.0;
            m[k * n + r] = 0.0;
        }
    }
    if n >= 2 {
        off[n - 2] = m[(n - 1) * n + (n - 2)];
    }
    let diag = (0..n).map(|i| m[i * n + i]).collect();
    (diag, off)
}

/// Number of eigenvalues strictly below `x` (Sturm sequence count).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let denom = if q == 0.0 {
            f64::EPSILON * (1.0 + x.abs())
        } else {
            q
        };
        q = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Symmetric eigenvalue routines backed by one tridiagonal reduction.
#[derive(Clone, Debug)]
pub struct Spectrum {
    diag: Vec<f64>,
    off: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Spectrum {
    pub fn new(a: &SymMatrix) -> Result<Self> {
        if !a.is_finite() {
            return invalid("eigenvalues requested for a matrix with non-finite entries");
        }
        let (diag, off) = tridiagonalize(a);
        let n = diag.len();
        // Gershgorin bounds on the tridiagonal form.
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { off[i].abs() } else { 0.0 };
            lo = lo.min(diag[i] - r);
            hi = hi.max(diag[i] + r);
        }
        let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        Ok(Self {
            diag,
            off,
            lo: lo - pad,
            hi: hi + pad,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection to width `tol`.
    pub fn kth(&self, k: usize, tol: f64) -> Result<f64> {
        assert!(k < self.dim());
        if !(tol > 0.0) {
            return invalid("eigenvalue tolerance must be positive");
        }
        let (mut lo, mut hi) = (self.lo, self.hi);
        for _ in 0..2_000 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= tol || mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if sturm_count(&self.diag, &self.off, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(ScioError::NoConvergence {
            what: "eigenvalue bisection",
            iterations: 2_000,
            last: 0.5 * (lo + hi),
        })
    }

    pub fn min(&self, tol: f64) -> Result<f64> {
        self.kth(0, tol)
    }

    pub fn max(&self, tol: f64) -> Result<f64> {
        self.kth(self.dim() - 1, tol)
    }

    /// All eigenvalues in ascending order.
    pub fn all(&self, tol: f64) -> Result<Vec<f64>> {
        (0..self.dim()).map(|k| self.kth(k, tol)).collect()
    }
}

/// Smallest eigenvalue within `tol` (tridiagonal reduction + Sturm bisection).
pub fn min_eigenvalue(a: &SymMatrix, tol: f64) -> Result<f64> {
    Spectrum::new(a)?.min(tol)
}

pub fn symmetric_eigenvalues(a: &SymMatrix, tol: f64) -> Result<Vec<f64>> {
    Spectrum::new(a)?.all(tol)
}

/// Parses the plain matrix text format: a line with `p`, then `p` lines of
/// `p` whitespace-separated decimals. Asymmetry up to 1e-12 is averaged out.
pub fn read_matrix_text(text: &str) -> Result<SymMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| ScioError::Parse("empty matrix file".into()))?;
    let p: usize = header
        .trim()
        .parse()
        .map_err(|e| ScioError::Parse(format!("bad dimension line {header:?}: {e}")))?;
    if p == 0 {
        return Err(ScioError::Parse("dimension must be positive".into()));
    }
    let mut rows = Vec::with_capacity(p);
    for (r, line) in lines.enumerate() {
        let row = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| ScioError::Parse(format!("row {r}: bad number {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != p {
        return Err(ScioError::Parse(format!(
            "expected {p} rows, found {}",
            rows.len()
        )));
    }
    SymMatrix::from_rows(&rows, READ_SYMMETRY_TOL)
}

pub fn write_matrix_text(a: &SymMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", a.dim());
    for i in 0..a.dim() {
        let row: Vec<String> = a.column(i).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: f64, b: f64, d: f64) -> SymMatrix {
        SymMatrix::from_rows(&[vec![a, b], vec![b, d]], 0.0).unwrap()
    }

    fn decay3() -> SymMatrix {
        SymMatrix::from_fn(3, |i, j| 0.6f64.powi((i as i32 - j as i32).abs()))
    }

    #[test]
    fn spectral_norm_examples() {
        let tol = DEFAULT_POWER_TOL;
        let it = DEFAULT_POWER_MAX_ITER;
        let d = SymMatrix::from_diag(&[1.0, 2.0, 3.0]);
        assert!((spectral_norm(&d, tol, it).unwrap() - 3.0).abs() < 1e-8);
        assert_eq!(spectral_norm(&SymMatrix::zeros(4), tol, it).unwrap(), 0.0);
        assert!((spectral_norm(&m2(2.0, 1.0, 2.0), tol, it).unwrap() - 3.0).abs() < 1e-8);
        // Dominant eigenvalue negative.
        let neg = SymMatrix::from_diag(&[1.0, -5.0]);
        assert!((spectral_norm(&neg, tol, it).unwrap() - 5.0).abs() < 1e-8);
        // Start direction orthogonal to the dominant eigenvector of a Laplacian.
        let lap = m2(1.0, -1.0, 1.0);
        assert!((spectral_norm(&lap, tol, it).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn spectral_norm_falls_back_to_bisection() {
        let a = SymMatrix::from_diag(&[1.0, 0.999_999, 0.5]);
        assert!((spectral_norm(&a, 1e-12, 3).unwrap() - 1.0).abs() < 1e-10);
        // Opposite-sign eigenvalues of almost equal magnitude.
        let b = SymMatrix::from_diag(&[3.0, -3.0 + 1e-9, 1.0]);
        let n = spectral_norm(&b, DEFAULT_POWER_TOL, DEFAULT_POWER_MAX_ITER).unwrap();
        assert!((n - 3.0).abs() < 1e-8);
        assert!(spectral_norm(&a, 0.0, 3).is_err());
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(frobenius_norm(&SymMatrix::identity(4)), 2.0);
        assert_eq!(frobenius_norm(&SymMatrix::from_diag(&[3.0, 4.0])), 5.0);
        assert_eq!(frobenius_norm(&m2(1.0, 1.0, 1.0)), 2.0);
    }

    #[test]
    fn max_norm_examples() {
        assert_eq!(elementwise_max_norm(&SymMatrix::identity(3)), 1.0);
        assert_eq!(elementwise_max_norm(&m2(0.0, -5.0, 0.0)), 5.0);
        assert_eq!(elementwise_max_norm(&decay3()), 1.0);
    }

    #[test]
    fn l1_norm_examples() {
        assert_eq!(matrix_l1_norm(&SymMatrix::identity(3)), 1.0);
        assert_eq!(matrix_l1_norm(&m2(1.0, 2.0, 1.0)), 3.0);
        // Column sums of the 3x3 decay matrix: 1.96, 2.2, 1.96.
        assert!((matrix_l1_norm(&decay3()) - 2.2).abs() < 1e-12);
    }

    #[test]
    fn log_det_examples() {
        assert_eq!(log_det_pd(&SymMatrix::identity(5)).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((log_det_pd(&SymMatrix::from_diag(&[e, e])).unwrap() - 2.0).abs() < 1e-14);
        assert!((log_det_pd(&m2(2.0, 1.0, 2.0)).unwrap() - 3f64.ln()).abs() < 1e-14);
        let err = log_det_pd(&m2(1.0, 2.0, 1.0)).unwrap_err();
        assert!(matches!(
            err,
            ScioError::NotPositiveDefinite { index: 1, .. }
        ));
        assert!(log_det_pd(&SymMatrix::from_diag(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn min_eigenvalue_examples() {
        let t = DEFAULT_EIGEN_TOL;
        let d = SymMatrix::from_diag(&[1.0, 2.0, 3.0]);
        assert!((min_eigenvalue(&d, t).unwrap() - 1.0).abs() < 1e-9);
        assert!((min_eigenvalue(&m2(1.0, 2.0, 1.0), t).unwrap() + 1.0).abs() < 1e-9);
        assert!((min_eigenvalue(&SymMatrix::identity(10), t).unwrap() - 1.0).abs() < 1e-9);
        assert!((min_eigenvalue(&SymMatrix::from_diag(&[4.0]), t).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn eigenvalues_of_compound_symmetry() {
        // 1 - 0.5 (x4) and 1 + 4 * 0.5.
        let b = SymMatrix::from_fn(5, |i, j| if i == j { 1.0 } else { 0.5 });
        let ev = symmetric_eigenvalues(&b, 1e-12).unwrap();
        for v in &ev[..4] {
            assert!((v - 0.5).abs() < 1e-10);
        }
        assert!((ev[4] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn cholesky_solve_and_inverse() {
        let a = SymMatrix::from_rows(
            &[
                vec![4.0, 1.0, 0.5],
                vec![1.0, 3.0, 0.2],
                vec![0.5, 0.2, 2.0],
            ],
            0.0,
        )
        .unwrap();
        let ch = Cholesky::factor(&a).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = ch.solve(&b);
        let ax = a.mat_vec(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        let inv = ch.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a.get(i, k) * inv.get(k, j)).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn text_format_round_trip_and_symmetrizes() {
        let a = SymMatrix::from_fn(3, |i, j| 0.1 * (i + 2 * j) as f64 + 1e-7);
        let back = read_matrix_text(&write_matrix_text(&a)).unwrap();
        assert_eq!(a, back);

        let nearly = "2\n1 0.5\n0.5000000000001 1\n";
        let m = read_matrix_text(nearly).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert!(read_matrix_text("2\n1 0.5\n0.6 1\n").is_err());
        assert!(read_matrix_text("2\n1 0.5\n").is_err());
        assert!(read_matrix_text("2\n1 0.5 3\n0.5 1\n").is_err());
    }

    #[test]
    fn setter_keeps_symmetry() {
        let mut m = SymMatrix::zeros(3);
        m.set(0, 2, 1.25);
        assert_eq!(m.get(2, 0).to_bits(), m.get(0, 2).to_bits());
    }
}
