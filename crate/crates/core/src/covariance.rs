//! Sample covariance and the diagonal perturbation that makes it positive
//! definite.

use std::io::Read;

use crate::error::{invalid, Result, ScioError};
use crate::matrix::{min_eigenvalue, SymMatrix, DEFAULT_EIGEN_TOL};

/// Eigenvalues at or below this are treated as non-positive.
pub const PD_FLOOR: f64 = 1e-12;

/// `n × p` observations, one row per observation.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return invalid("data matrix needs at least one row");
        }
        let p = rows[0].len();
        if p == 0 {
            return invalid("data matrix needs at least one column");
        }
        let mut data = Vec::with_capacity(n * p);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(ScioError::Parse(format!(
                    "row {r} has {} fields, expected {p}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(n, p, data)
    }

    pub fn from_vec(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return invalid("data matrix dimensions must be positive");
        }
        if data.len() != n * p {
            return Err(ScioError::DimensionMismatch {
                expected: n * p,
                found: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return invalid(format!("non-finite data value {v}"));
        }
        Ok(Self { n, p, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.p..(k + 1) * self.p]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            p: self.p,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// New matrix holding the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.p);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self {
            n: rows.len(),
            p: self.p,
            data,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    /// `None` picks tab if the first line contains one, comma otherwise.
    pub delimiter: Option<u8>,
}

/// Reads observations from comma- or tab-delimited text. Ragged rows are
/// rejected.
pub fn read_csv<R: Read>(mut reader: R, opts: CsvOptions) -> Result<DataMatrix> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let delimiter = opts.delimiter.unwrap_or_else(|| {
        if text.lines().next().is_some_and(|l| l.contains('\t')) {
            b'\t'
        } else {
            b','
        }
    });
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(delimiter)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ScioError::Parse(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| ScioError::Parse(format!("record {r}: bad value {f:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ScioError::Parse("no data rows".into()));
    }
    DataMatrix::from_rows(&rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEstimate {
    pub sigma_hat: SymMatrix,
    pub n_used: usize,
    /// Amount added to the diagonal; 0 when no perturbation was needed.
    pub rho_applied: f64,
}

impl CovarianceEstimate {
    pub fn new(sigma_hat: SymMatrix, n_used: usize) -> Self {
        Self {
            sigma_hat,
            n_used,
            rho_applied: 0.0,
        }
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma_hat
    }
}

/// `Σ̂ = (1/n) Σ_k (x_k − x̄)(x_k − x̄)ᵀ` (divisor `n`).
pub fn sample_covariance(x: &DataMatrix) -> Result<CovarianceEstimate> {
    let (n, p) = (x.n(), x.p());
    if n < 2 {
        return invalid(format!("sample covariance needs n >= 2, got {n}"));
    }
    let mut mean = vec![0.0; p];
    for k in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(k)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut acc = vec![0.0; p * p];
    let mut centered = vec![0.0; p];
    for k in 0..n {
        for ((c, v), m) in centered.iter_mut().zip(x.row(k)).zip(&mean) {
            *c = v - m;
        }
        for i in 0..p {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let row = &mut acc[i * p..];
            for j in i..p {
                row[j] += ci * centered[j];
            }
        }
    }
    let sigma = SymMatrix::from_fn(p, |i, j| acc[i * p + j] / n as f64);
    Ok(CovarianceEstimate::new(sigma, n))
}

/// Adds `ρ = |λ_min| + n^{-1/2}` to the diagonal when `λ_min(Σ̂) <= 1e-12`.
/// The added amount accumulates in `rho_applied`.
pub fn perturb_to_pd(c: &CovarianceEstimate) -> Result<CovarianceEstimate> {
    let sigma = c.sigma();
    let lmin = min_eigenvalue(sigma, DEFAULT_EIGEN_TOL)?;
    if lmin > PD_FLOOR {
        return Ok(c.clone());
    }
    let rho = pd_shift(lmin, c.n_used);
    Ok(CovarianceEstimate {
        sigma_hat: sigma.add_diagonal(rho),
        n_used: c.n_used,
        rho_applied: c.rho_applied + rho,
    })
}

/// The diagonal shift for a matrix with smallest eigenvalue `lmin`, or 0 if
/// it is already safely positive definite.
pub fn pd_shift(lmin: f64, n: usize) -> f64 {
    if lmin > PD_FLOOR {
        0.0
    } else {
        lmin.abs() + 1.0 / (n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_observations() {
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let c = sample_covariance(&x).unwrap();
        assert_eq!(c.sigma().rows(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(c.rho_applied, 0.0);
        assert_eq!(c.n_used, 2);
    }

    #[test]
    fn constant_column_is_zero() {
        let x = DataMatrix::from_rows(&[
            vec![1.0, 3.0, 0.5],
            vec![2.0, 3.0, -0.5],
            vec![4.0, 3.0, 1.5],
        ])
        .unwrap();
        let s = sample_covariance(&x).unwrap();
        for j in 0..3 {
            assert_eq!(s.sigma().get(1, j), 0.0);
        }
    }

    #[test]
    fn single_variable() {
        let x = DataMatrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        assert_eq!(sample_covariance(&x).unwrap().sigma().get(0, 0), 1.0);
    }

    #[test]
    fn too_few_rows() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(sample_covariance(&x).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0, f64::NAN]]).is_err());
    }

    #[test]
    fn perturb_examples() {
        let id = CovarianceEstimate::new(SymMatrix::identity(3), 10);
        assert_eq!(perturb_to_pd(&id).unwrap(), id);

        let d = CovarianceEstimate::new(SymMatrix::from_diag(&[1.0, 0.0]), 4);
        let out = perturb_to_pd(&d).unwrap();
        assert!((out.rho_applied - 0.5).abs() < 1e-10);
        assert!((out.sigma().get(0, 0) - 1.5).abs() < 1e-10);
        assert!((out.sigma().get(1, 1) - 0.5).abs() < 1e-10);

        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]], 0.0).unwrap();
        let out = perturb_to_pd(&CovarianceEstimate::new(m, 100)).unwrap();
        assert!((out.rho_applied - 1.1).abs() < 1e-9);
        assert!((out.sigma().get(0, 0) - 2.1).abs() < 1e-9);
        assert_eq!(out.sigma().get(0, 1), 2.0);
    }

    #[test]
    fn tiny_positive_eigenvalue_is_perturbed() {
        let c = CovarianceEstimate::new(SymMatrix::from_diag(&[1.0, 1e-13]), 4);
        assert!(perturb_to_pd(&c).unwrap().rho_applied > 0.0);
    }

    #[test]
    fn csv_reading() {
        let x = read_csv(
            "a,b\n1,2\n3,4\n".as_bytes(),
            CsvOptions {
                has_header: true,
                delimiter: None,
            },
        )
        .unwrap();
        assert_eq!((x.n(), x.p()), (2, 2));
        assert_eq!(x.row(1), &[3.0, 4.0]);

        let t = read_csv("1\t2\n3\t4\n5\t6\n".as_bytes(), CsvOptions::default()).unwrap();
        assert_eq!((t.n(), t.p()), (3, 2));

        assert!(read_csv("1,2\n3\n".as_bytes(), CsvOptions::default()).is_err());
        assert!(read_csv("1,x\n3,4\n".as_bytes(), CsvOptions::default()).is_err());
        assert!(read_csv("".as_bytes(), CsvOptions::default()).is_err());
    }
}
