//! Simulation benchmark: draw a two-block truth, sample training and
//! validation data, fit the λ path, select λ, score against the truth and
//! aggregate over replicates.
//!
//! Replicate `r` of the `k`-th dimension uses the child stream
//! `(k << 32) | r` of the run seed, so any single replicate can be rerun in
//! isolation and results do not depend on scheduling.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::covariance::{perturb_to_pd, sample_covariance};
use crate::error::{invalid, Result};
use crate::evaluation::{
    bregman_loss, frobenius_loss, loss_report, support_report, LossReport, SupportReport,
};
use crate::matrix::SymMatrix;
use crate::oracle::truth_precision;
use crate::parallel::map_indices;
use crate::simgen::{child_rng, sample_gaussian, sample_gaussian_cov, GraphModelSpec, ModelKind};
use crate::solver::{constraint_excess, default_grid, fit_path, PrecisionEstimate, SolverConfig};
use crate::tuning::{cross_validate_with, CvPlan, CvSetup, SplitCovariances};

/// How λ is chosen within a replicate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// One shared λ minimising the Bregman loss on the validation covariance.
    #[default]
    BregmanValidation,
    /// Per-column λ by validation risk on the held-out sample.
    CvColumn,
    /// Shared λ minimising the Frobenius loss against the truth. Only useful
    /// as a yardstick.
    Oracle,
}

impl std::str::FromStr for Selection {
    type Err = crate::error::ScioError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bregman" | "bregman_validation" => Ok(Self::BregmanValidation),
            "cv" | "cv_column" => Ok(Self::CvColumn),
            "oracle" => Ok(Self::Oracle),
            other => invalid(format!("unknown selection {other:?} (bregman, cv, oracle)")),
        }
    }
}

/// Whether the generated model matrix is the precision matrix or the
/// covariance matrix of the data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthInterpretation {
    #[default]
    Precision,
    Covariance,
}

impl std::str::FromStr for TruthInterpretation {
    type Err = crate::error::ScioError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "precision" => Ok(Self::Precision),
            "covariance" => Ok(Self::Covariance),
            other => invalid(format!(
                "unknown interpretation {other:?} (precision, covariance)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    /// Model of the first block; `p_block` is overridden per dimension.
    pub model: GraphModelSpec,
    pub n_train: usize,
    pub n_validate: usize,
    /// Total dimensions (both blocks), each even.
    pub p_values: Vec<usize>,
    pub replicates: usize,
    pub grid_n: usize,
    pub selection: Selection,
    pub seed: u64,
    pub interpretation: TruthInterpretation,
    /// Estimated edges are entries with `|ω̂_ij| > threshold`.
    pub support_threshold: f64,
    #[serde(skip)]
    pub solver: SolverConfig,
}

impl BenchmarkConfig {
    pub fn new(kind: ModelKind, p_values: Vec<usize>) -> Self {
        Self {
            model: GraphModelSpec::new(kind, 1),
            n_train: 100,
            n_validate: 100,
            p_values,
            replicates: 100,
            grid_n: 50,
            selection: Selection::default(),
            seed: crate::tuning::DEFAULT_SEED,
            interpretation: TruthInterpretation::default(),
            support_threshold: 0.0,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_values.is_empty() {
            return invalid("benchmark needs at least one dimension");
        }
        for &p in &self.p_values {
            if p < 2 || p % 2 != 0 {
                return invalid(format!("dimension must be even and at least 2, got {p}"));
            }
        }
        if self.n_train < 2 || self.n_validate < 2 {
            return invalid("training and validation samples need at least 2 rows each");
        }
        if self.replicates == 0 {
            return invalid("replicates must be at least 1");
        }
        if self.grid_n < 2 {
            return invalid("grid needs at least 2 points");
        }
        if !(self.support_threshold >= 0.0) {
            return invalid("support threshold must be non-negative");
        }
        self.solver.validate()?;
        self.model_for(self.p_values[0]).validate()
    }

    fn model_for(&self, p: usize) -> GraphModelSpec {
        GraphModelSpec {
            p_block: p / 2,
            ..self.model.clone()
        }
    }
}

/// Outcome of one replicate. On failure only the identifying fields and
/// `error` are set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub p: usize,
    pub replicate: usize,
    pub stream: u64,
    pub error: Option<String>,
    /// Shared λ, or `None` under per-column selection.
    pub lambda: Option<f64>,
    pub lambda_per_column: Vec<f64>,
    pub loss: Option<LossReport>,
    pub support: Option<SupportReport>,
    pub rho_applied: f64,
    /// Largest `|Σ̂β̂ − eᵢ|_∞ − λ` over converged columns of every fit;
    /// `None` when no column converged.
    pub max_constraint_excess: Option<f64>,
    pub unconverged_columns: usize,
    #[serde(skip)]
    pub edges: Vec<bool>,
}

impl ReplicateRecord {
    fn failed(p: usize, replicate: usize, stream: u64, error: String) -> Self {
        Self {
            p,
            replicate,
            stream,
            error: Some(error),
            lambda: None,
            lambda_per_column: Vec::new(),
            loss: None,
            support: None,
            rho_applied: 0.0,
            max_constraint_excess: None,
            unconverged_columns: 0,
            edges: Vec::new(),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Mean and sample standard deviation; `sd` is `None` with fewer than two values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: Option<f64>,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = (n >= 2).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        Some(Self { mean, sd, count: n })
    }

    fn cell(s: &Option<Self>) -> String {
        match s {
            None => "NA".to_string(),
            Some(Summary {
                mean, sd: Some(sd), ..
            }) => format!("{mean:.2}({sd:.2})"),
            Some(Summary { mean, sd: None, .. }) => format!("{mean:.2}"),
        }
    }
}

/// Per-entry count of replicates whose estimate had `|ω̂_ij| > threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportFrequency {
    pub p: usize,
    /// Successful replicates contributing to the counts.
    pub replicates: usize,
    /// Row-major `p × p`.
    pub counts: Vec<u32>,
}

impl SupportFrequency {
    /// Plain PGM (P2). Zero counts are white and full counts black.
    pub fn to_pgm(&self) -> String {
        let max = self.replicates.max(1);
        let mut out = format!("P2\n{} {}\n{}\n", self.p, self.p, max);
        for row in self.counts.chunks(self.p) {
            let line: Vec<String> = row
                .iter()
                .map(|&c| (max - (c as usize).min(max)).to_string())
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// One character per entry, darker for more frequent selection.
    pub fn to_ascii(&self) -> String {
        const RAMP: &[u8] = b" .:-=+*#%@";
        let max = self.replicates.max(1) as f64;
        let mut out = String::with_capacity(self.p * (self.p + 1));
        for row in self.counts.chunks(self.p) {
            for &c in row {
                let level = ((c as f64 / max) * (RAMP.len() - 1) as f64).round() as usize;
                out.push(RAMP[level.min(RAMP.len() - 1)] as char);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionSummary {
    pub p: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub spectral: Option<Summary>,
    pub frobenius: Option<Summary>,
    pub elementwise_max: Option<Summary>,
    pub frobenius_sq_over_p: Option<Summary>,
    pub tn_pct: Option<Summary>,
    pub tp_pct: Option<Summary>,
    pub max_constraint_excess: Option<f64>,
    pub unconverged_columns: usize,
    pub support_frequency: SupportFrequency,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub dimensions: Vec<DimensionSummary>,
    pub replicates: Vec<ReplicateRecord>,
    /// Wall-clock time of the run; informational and kept out of the JSON.
    #[serde(skip)]
    pub elapsed_secs: f64,
}

impl BenchmarkReport {
    pub fn failures(&self) -> usize {
        self.replicates.iter().filter(|r| !r.ok()).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Loss and support table with `mean(SD)` cells, one row per dimension.
    pub fn table(&self) -> String {
        let header = [
            "p",
            "spectral",
            "frobenius",
            "max",
            "frob^2/p",
            "TN%",
            "TP%",
            "failed",
        ];
        let rows: Vec<Vec<String>> = self
            .dimensions
            .iter()
            .map(|d| {
                vec![
                    d.p.to_string(),
                    Summary::cell(&d.spectral),
                    Summary::cell(&d.frobenius),
                    Summary::cell(&d.elementwise_max),
                    Summary::cell(&d.frobenius_sq_over_p),
                    Summary::cell(&d.tn_pct),
                    Summary::cell(&d.tp_pct),
                    d.failed.to_string(),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].len())
                    .chain([header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} model, {} selection, n_train {}, n_validate {}, {} replicates",
            self.config.model.kind,
            match self.config.selection {
                Selection::BregmanValidation => "bregman",
                Selection::CvColumn => "cv",
                Selection::Oracle => "oracle",
            },
            self.config.n_train,
            self.config.n_validate,
            self.config.replicates
        );
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let _ = writeln!(out, "{}", line(header.to_vec()));
        for r in &rows {
            let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
        }
        out
    }
}

/// Truth precision matrix and the two samples for one replicate.
pub struct ReplicateData {
    pub omega_truth: SymMatrix,
    pub train: crate::covariance::DataMatrix,
    pub validate: crate::covariance::DataMatrix,
}

/// Regenerates the data of replicate `r` at dimension index `k`.
pub fn replicate_data(cfg: &BenchmarkConfig, k: usize, r: usize) -> Result<ReplicateData> {
    let p = cfg.p_values[k];
    let mut rng = child_rng(cfg.seed, stream_id(k, r));
    let model = cfg.model_for(p).generate(&mut rng)?;
    let (omega_truth, train, validate) = match cfg.interpretation {
        TruthInterpretation::Precision => {
            let train = sample_gaussian(&model, cfg.n_train, &mut rng)?;
            let validate = sample_gaussian(&model, cfg.n_validate, &mut rng)?;
            (model, train, validate)
        }
        TruthInterpretation::Covariance => {
            let train = sample_gaussian_cov(&model, cfg.n_train, &mut rng)?;
            let validate = sample_gaussian_cov(&model, cfg.n_validate, &mut rng)?;
            (truth_precision(&model)?, train, validate)
        }
    };
    Ok(ReplicateData {
        omega_truth,
        train,
        validate,
    })
}

pub fn stream_id(k: usize, r: usize) -> u64 {
    ((k as u64) << 32) | r as u64
}

fn run_replicate(cfg: &BenchmarkConfig, k: usize, r: usize) -> Result<ReplicateRecord> {
    let p = cfg.p_values[k];
    let data = replicate_data(cfg, k, r)?;
    let train = perturb_to_pd(&sample_covariance(&data.train)?)?;
    let validate = sample_covariance(&data.validate)?;
    let n_train = train.n_used;

    let (estimate, lambda, excess, unconverged) = match cfg.selection {
        Selection::BregmanValidation | Selection::Oracle => {
            let grid = default_grid_of_len(train.sigma(), cfg.grid_n);
            let fit = fit_path(train.sigma(), &grid, &cfg.solver)?;
            let mut best: Option<(f64, usize, PrecisionEstimate)> = None;
            for (k, mut est) in fit.estimates.into_iter().enumerate() {
                est.make_positive_definite(n_train)?;
                let score = match cfg.selection {
                    Selection::Oracle => frobenius_loss(&est.omega_hat, &data.omega_truth)?,
                    _ => bregman_loss(validate.sigma(), &est.omega_hat)?,
                };
                // Strict comparison: on ties the larger λ (earlier) is kept.
                if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                    best = Some((score, k, est));
                }
            }
            let (_, k, mut est) = best.expect("grid is nonempty");
            est.covariance_rho = train.rho_applied;
            (
                est,
                Some(grid[k]),
                fit.max_constraint_excess,
                fit.unconverged,
            )
        }
        Selection::CvColumn => {
            let plan = CvPlan {
                grid_n: cfg.grid_n,
                ..CvPlan::default()
            };
            let upper = match train.sigma().max_abs_offdiag() {
                a if a > 0.0 => a,
                _ => 1.0,
            };
            let setup = CvSetup {
                splits: vec![SplitCovariances {
                    train: train.sigma_hat.clone(),
                    validate: validate.sigma_hat.clone(),
                    n_train,
                }],
                grid: plan.grid(upper),
                full_sigma: train.sigma_hat.clone(),
                n: n_train,
            };
            let outcome = cross_validate_with(&setup, &cfg.solver, false)?;
            let mut est = outcome.estimate;
            est.covariance_rho = train.rho_applied;
            let converged = outcome.columns.iter().filter(|c| c.converged);
            let excess = converged
                .map(|c| constraint_excess(train.sigma(), c))
                .fold(f64::NEG_INFINITY, f64::max);
            let unconverged = outcome.columns.iter().filter(|c| !c.converged).count();
            (est, None, excess, unconverged)
        }
    };

    let loss = loss_report(&estimate.omega_hat, &data.omega_truth)?;
    let support = support_report(
        &estimate.omega_hat,
        &data.omega_truth,
        cfg.support_threshold,
    )?;
    let edges = estimate
        .omega_hat
        .as_slice()
        .iter()
        .map(|v| v.abs() > cfg.support_threshold)
        .collect();
    Ok(ReplicateRecord {
        p,
        replicate: r,
        stream: stream_id(k, r),
        error: None,
        lambda,
        lambda_per_column: estimate.lambda_per_column.clone(),
        loss: Some(loss),
        support: Some(support),
        rho_applied: estimate.rho_applied,
        max_constraint_excess: excess.is_finite().then_some(excess),
        unconverged_columns: unconverged,
        edges,
    })
}

fn default_grid_of_len(sigma: &SymMatrix, len: usize) -> Vec<f64> {
    let top = default_grid(sigma)[0];
    crate::solver::log_grid(top, crate::solver::DEFAULT_GRID_RATIO, len)
}

/// Runs every replicate of every dimension. Replicate failures are recorded
/// and left out of the aggregates.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let start = Instant::now();
    let reps = cfg.replicates;
    let jobs = cfg.p_values.len() * reps;
    let records = map_indices(cfg.solver.execution, jobs, |job| {
        let (k, r) = (job / reps, job % reps);
        run_replicate(cfg, k, r).unwrap_or_else(|e| {
            ReplicateRecord::failed(cfg.p_values[k], r, stream_id(k, r), e.to_string())
        })
    });
    let failures = records.iter().filter(|r| !r.ok()).count();
    if failures > 0 {
        log::warn!("{failures} of {jobs} benchmark replicates failed and were excluded");
    }
    let dimensions = cfg
        .p_values
        .iter()
        .enumerate()
        .map(|(k, &p)| summarize(p, &records[k * reps..(k + 1) * reps]))
        .collect();
    Ok(BenchmarkReport {
        config: cfg.clone(),
        dimensions,
        replicates: records,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

fn summarize(p: usize, records: &[ReplicateRecord]) -> DimensionSummary {
    let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.ok()).collect();
    let losses: Vec<&LossReport> = ok.iter().filter_map(|r| r.loss.as_ref()).collect();
    let pick =
        |f: fn(&LossReport) -> f64| Summary::of(&losses.iter().map(|l| f(l)).collect::<Vec<_>>());
    let pct = |f: fn(&SupportReport) -> Option<f64>| {
        Summary::of(
            &ok.iter()
                .filter_map(|r| r.support.as_ref().and_then(f))
                .collect::<Vec<_>>(),
        )
    };
    let mut counts = vec![0u32; p * p];
    for r in &ok {
        for (c, &e) in counts.iter_mut().zip(&r.edges) {
            *c += e as u32;
        }
    }
    DimensionSummary {
        p,
        succeeded: ok.len(),
        failed: records.len() - ok.len(),
        spectral: pick(|l| l.spectral),
        frobenius: pick(|l| l.frobenius),
        elementwise_max: pick(|l| l.elementwise_max),
        frobenius_sq_over_p: pick(|l| l.frobenius_sq_over_p),
        tn_pct: pct(|s| s.tn_pct),
        tp_pct: pct(|s| s.tp_pct),
        max_constraint_excess: ok
            .iter()
            .filter_map(|r| r.max_constraint_excess)
            .reduce(f64::max),
        unconverged_columns: ok.iter().map(|r| r.unconverged_columns).sum(),
        support_frequency: SupportFrequency {
            p,
            replicates: ok.len(),
            counts,
        },
    }
}
