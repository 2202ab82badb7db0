//! `scio` command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error,
//! 3 numerical non-convergence.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scio::benchmark::{run_benchmark, BenchmarkConfig, Selection, TruthInterpretation};
use scio::covariance::{read_csv, CsvOptions, DataMatrix};
use scio::matrix::{read_matrix_text, write_matrix_text};
use scio::oracle::{
    compare_with_oracle, diamond_graph, graph_margin, irrepresentable_margin, random_instance,
    star_graph, BRUTE_FORCE_MAX_P,
};
use scio::simgen::{child_rng, sample_gaussian, sample_gaussian_cov, GraphModelSpec, ModelKind};
use scio::solver::{
    estimate_precision, EstimateInput, EstimateOptions, LambdaSpec, PrecisionEstimate,
    SolverConfig, DEFAULT_MAX_SWEEPS, DEFAULT_TOL,
};
use scio::tuning::{cross_validate, CvPlan, DEFAULT_CV_GRID_N, DEFAULT_SEED};
use scio::{Execution, ScioError};

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;

/// Largest dimension `verify` accepts.
const VERIFY_MAX_P: usize = 8;
const VERIFY_OBJECTIVE_GAP: f64 = 1e-6;
const VERIFY_TOL: f64 = 1e-12;

/// Environment variable capping worker threads when `--threads` is absent.
const THREADS_ENV: &str = "SCIO_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "scio",
    version,
    about = "Sparse precision matrix estimation by column-wise inverse operators",
    after_help = "Exit codes: 0 success, 1 verification failure, 2 usage or input error, \
                  3 numerical non-convergence.\n\
                  SCIO_THREADS caps worker threads when --threads is not given."
)]
struct Cli {
    /// Maximum number of worker threads (default: all cores, or SCIO_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate a precision matrix from a CSV of observations.
    Estimate(EstimateArgs),
    /// Per-column cross-validated penalty selection.
    Cv(CvArgs),
    /// Draw data from a two-block graph model.
    Simulate(SimulateArgs),
    /// Run the simulation benchmark and print a loss and support table.
    Benchmark(BenchmarkArgs),
    /// Incoherence margin of a covariance matrix or a named test graph.
    CheckCondition(CheckArgs),
    /// Compare the column solver against exhaustive enumeration.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// CSV file, one observation per row.
    #[arg(long, short)]
    input: PathBuf,
    /// The first CSV row is a header.
    #[arg(long)]
    header: bool,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Convergence tolerance on coordinate change and KKT residual.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Sweep limit per column problem.
    #[arg(long, default_value_t = DEFAULT_MAX_SWEEPS)]
    max_sweeps: usize,
    /// Disable the active-set iterations.
    #[arg(long)]
    no_active_set: bool,
}

#[derive(Args, Debug, Clone)]
struct CvFlags {
    /// Number of random train/validate splits.
    #[arg(long, default_value_t = 1)]
    cv_folds: usize,
    /// Fraction of rows used for training in each split.
    #[arg(long, default_value_t = 0.5)]
    cv_train_fraction: f64,
    /// Grid size N; the grid is (j/N)·a for j = 1..N.
    #[arg(long, default_value_t = DEFAULT_CV_GRID_N)]
    cv_grid_n: usize,
    /// Grid upper end a (default: largest off-diagonal |σ̂_ij|).
    #[arg(long)]
    cv_grid_max: Option<f64>,
    /// Refit the selected λ on the full sample.
    #[arg(long)]
    cv_refit: bool,
    /// Seed for the splits.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl CvFlags {
    fn plan(&self) -> CvPlan {
        CvPlan {
            folds: self.cv_folds,
            split_fraction: self.cv_train_fraction,
            grid_n: self.cv_grid_n,
            grid_upper: self.cv_grid_max,
            seed: self.seed,
            refit_full_sample: self.cv_refit,
        }
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Penalty shared by all columns.
    #[arg(long, required_unless_present = "cv", conflicts_with = "cv")]
    lambda: Option<f64>,
    /// Choose the penalty per column by cross-validation.
    #[arg(long)]
    cv: bool,
    #[command(flatten)]
    cv_flags: CvFlags,
    #[command(flatten)]
    solver: SolverArgs,
    /// Skip the positive-definiteness correction of the estimate.
    #[arg(long)]
    no_pd_correction: bool,
    /// Write the estimate as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the estimate in matrix text format.
    #[arg(long)]
    matrix: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    cv_flags: CvFlags,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write per-column risks, selected penalties and the estimate as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the estimate in matrix text format.
    #[arg(long)]
    matrix: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Graph model of the first block.
    #[arg(long, default_value = "decay")]
    model: ModelKind,
    /// Decay base for the decay model.
    #[arg(long, default_value_t = 0.6)]
    base: f64,
    /// Edge probability for the sparse model.
    #[arg(long, default_value_t = 0.1)]
    prob: f64,
    /// Edge value for the sparse model.
    #[arg(long, default_value_t = 0.5)]
    value: f64,
    /// Block size for the block model.
    #[arg(long, default_value_t = 5)]
    block_size: usize,
    /// Off-diagonal value inside blocks.
    #[arg(long, default_value_t = 0.5)]
    block_offdiag: f64,
    /// Treat the model matrix as precision (default) or covariance.
    #[arg(long, default_value = "precision")]
    interpretation: TruthInterpretation,
}

impl ModelArgs {
    fn spec(&self, p_block: usize) -> GraphModelSpec {
        GraphModelSpec {
            kind: self.model,
            p_block,
            decay_base: self.base,
            sparse_prob: self.prob,
            sparse_value: self.value,
            block_size: self.block_size,
            block_offdiag: self.block_offdiag,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Total dimension (two blocks of p/2).
    #[arg(long, default_value_t = 50)]
    p: usize,
    /// Number of observations.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Random seed; the default is fixed so runs are reproducible.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// CSV output (default: standard output).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write the true precision matrix in matrix text format.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Total dimensions, each even (comma separated or repeated).
    #[arg(long, value_delimiter = ',', default_value = "50")]
    p: Vec<usize>,
    /// Training sample size.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Validation sample size (default: same as --n).
    #[arg(long)]
    n_validate: Option<usize>,
    /// Replicates per dimension.
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Penalties on the path.
    #[arg(long, default_value_t = 50)]
    grid_n: usize,
    /// Penalty selection rule: bregman, cv or oracle.
    #[arg(long, default_value = "bregman")]
    selection: Selection,
    /// Entries with |ω̂_ij| above this count as edges.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Random seed; the default is fixed so runs are reproducible.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the support-frequency heatmap as PGM; with several dimensions
    /// `_p<dim>` is inserted before the extension.
    #[arg(long)]
    heatmap: Option<PathBuf>,
    /// Print an ASCII rendering of the support frequency.
    #[arg(long)]
    ascii: bool,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Covariance matrix in matrix text format.
    #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
    sigma: Option<PathBuf>,
    /// True precision matrix (default: the inverse of the covariance).
    #[arg(long, requires = "sigma")]
    omega: Option<PathBuf>,
    /// Named test graph: diamond or star.
    #[arg(long)]
    graph: Option<String>,
    /// Correlation parameter of the named graph.
    #[arg(long, default_value_t = 0.4)]
    rho: f64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Dimension of each random instance (at most 8).
    #[arg(long, default_value_t = 5)]
    p: usize,
    /// Number of random instances.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Random seed; the default is fixed so runs are reproducible.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<ScioError> for Failure {
    fn from(e: ScioError) -> Self {
        let code = match e {
            ScioError::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(f) = configure_threads(cli.threads) {
        eprintln!("error: {}", f.message);
        return ExitCode::from(f.code);
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = match cli.command {
        Command::Estimate(a) => run_estimate(a, exec),
        Command::Cv(a) => run_cv(a, exec),
        Command::Simulate(a) => run_simulate(a),
        Command::Benchmark(a) => run_benchmark_cmd(a, exec),
        Command::CheckCondition(a) => run_check(a),
        Command::Verify(a) => run_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads(flag: Option<usize>) -> CliResult {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                Failure::usage(format!(
                    "{THREADS_ENV} must be a positive integer, got {v:?}"
                ))
            })?),
            Err(_) => None,
        },
    };
    match threads {
        Some(0) => Err(Failure::usage("thread count must be at least 1")),
        #[cfg(feature = "parallel")]
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string())),
        _ => Ok(()),
    }
}

fn solver_config(a: &SolverArgs, exec: Execution) -> Result<SolverConfig, Failure> {
    let cfg = SolverConfig {
        tol: a.tol,
        max_sweeps: a.max_sweeps,
        active_set: !a.no_active_set,
        execution: exec,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_data(input: &InputArgs) -> Result<DataMatrix, Failure> {
    let file = fs::File::open(&input.input)
        .map_err(|e| Failure::usage(format!("{}: {e}", input.input.display())))?;
    let opts = CsvOptions {
        has_header: input.header,
        delimiter: None,
    };
    read_csv(io::BufReader::new(file), opts)
        .map_err(|e| Failure::usage(format!("{}: {e}", input.input.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_estimate(
    est: &PrecisionEstimate,
    json: Option<&Path>,
    matrix: Option<&Path>,
) -> CliResult {
    if let Some(path) = json {
        write_file(path, &(est.to_json()? + "\n"))?;
    }
    if let Some(path) = matrix {
        write_file(path, &write_matrix_text(&est.omega_hat))?;
    }
    Ok(())
}

fn convergence_check(est: &PrecisionEstimate) -> CliResult {
    let failed: Vec<_> = est
        .per_column_meta
        .iter()
        .filter(|c| !c.converged)
        .collect();
    if failed.is_empty() {
        return Ok(());
    }
    let mut msg = format!("{} column(s) did not converge:", failed.len());
    for c in failed {
        msg.push_str(&format!(
            "\n  column {}: lambda {} sweeps {} kkt residual {:.3e}",
            c.index, c.lambda, c.sweeps_used, c.kkt_residual
        ));
    }
    Err(Failure {
        code: EXIT_NO_CONVERGENCE,
        message: msg,
    })
}

fn print_summary(est: &PrecisionEstimate, n: usize, lambda: &str) {
    println!("p: {}", est.p());
    println!("n: {n}");
    println!("lambda: {lambda}");
    println!("covariance_rho: {}", est.covariance_rho);
    println!("rho_applied: {}", est.rho_applied);
    println!("max_kkt_residual: {:.3e}", est.max_kkt_residual());
}

fn run_estimate(a: EstimateArgs, exec: Execution) -> CliResult {
    let config = solver_config(&a.solver, exec)?;
    let x = load_data(&a.input)?;
    let (spec, label) = match a.lambda {
        Some(l) => (LambdaSpec::Single(l), l.to_string()),
        None => (
            LambdaSpec::CrossValidated(a.cv_flags.plan()),
            "cross-validated per column".to_string(),
        ),
    };
    let options = EstimateOptions {
        pd_correction: !a.no_pd_correction,
    };
    let est = estimate_precision(EstimateInput::Data(&x), &spec, &config, options)?;
    write_estimate(&est, a.json.as_deref(), a.matrix.as_deref())?;
    print_summary(&est, x.n(), &label);
    convergence_check(&est)
}

fn run_cv(a: CvArgs, exec: Execution) -> CliResult {
    let config = solver_config(&a.solver, exec)?;
    let x = load_data(&a.input)?;
    let outcome = cross_validate(&x, &a.cv_flags.plan(), &config)?;
    if let Some(path) = &a.json {
        let value = serde_json::json!({
            "columns": outcome.results,
            "estimate": serde_json::from_str::<serde_json::Value>(&outcome.estimate.to_json()?)
                .map_err(ScioError::from)?,
        });
        let text = serde_json::to_string_pretty(&value).map_err(ScioError::from)?;
        write_file(path, &(text + "\n"))?;
    }
    write_estimate(&outcome.estimate, None, a.matrix.as_deref())?;
    println!("column  lambda  risk");
    for r in &outcome.results {
        println!(
            "{:>6}  {:.6}  {:.6}",
            r.column_i, r.chosen_lambda, r.risks[r.chosen_index]
        );
    }
    print_summary(&outcome.estimate, x.n(), "cross-validated per column");
    convergence_check(&outcome.estimate)
}

fn run_simulate(a: SimulateArgs) -> CliResult {
    if a.p < 2 || !a.p.is_multiple_of(2) {
        return Err(Failure::usage(format!(
            "--p must be even and at least 2, got {}",
            a.p
        )));
    }
    if a.n == 0 {
        return Err(Failure::usage("--n must be at least 1"));
    }
    let mut rng = child_rng(a.seed, 0);
    let model = a.model.spec(a.p / 2).generate(&mut rng)?;
    let (x, omega) = match a.model.interpretation {
        TruthInterpretation::Precision => (sample_gaussian(&model, a.n, &mut rng)?, model),
        TruthInterpretation::Covariance => (
            sample_gaussian_cov(&model, a.n, &mut rng)?,
            scio::oracle::truth_precision(&model)?,
        ),
    };
    let out: Box<dyn Write> = match &a.output {
        Some(path) => Box::new(
            fs::File::create(path)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Failure::usage(e.to_string());
    w.write_record((1..=a.p).map(|j| format!("x{j}")))
        .map_err(csv_err)?;
    for i in 0..x.n() {
        w.write_record(x.row(i).iter().map(|v| v.to_string()))
            .map_err(csv_err)?;
    }
    w.flush()?;
    if let Some(path) = &a.truth {
        write_file(path, &write_matrix_text(&omega))?;
    }
    Ok(())
}

fn heatmap_path(base: &Path, p: usize, several: bool) -> PathBuf {
    if !several {
        return base.to_path_buf();
    }
    let stem = base
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("heatmap");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_p{p}.{ext}"),
        None => format!("{stem}_p{p}"),
    };
    base.with_file_name(name)
}

fn run_benchmark_cmd(a: BenchmarkArgs, exec: Execution) -> CliResult {
    let cfg = BenchmarkConfig {
        model: a.model.spec(1),
        n_train: a.n,
        n_validate: a.n_validate.unwrap_or(a.n),
        p_values: a.p.clone(),
        replicates: a.reps,
        grid_n: a.grid_n,
        selection: a.selection,
        seed: a.seed,
        interpretation: a.model.interpretation,
        support_threshold: a.threshold,
        solver: solver_config(&a.solver, exec)?,
    };
    cfg.validate()?;
    let report = run_benchmark(&cfg)?;
    print!("{}", report.table());
    let unconverged: usize = report
        .dimensions
        .iter()
        .map(|d| d.unconverged_columns)
        .sum();
    if unconverged > 0 {
        log::warn!("{unconverged} column fits did not converge");
    }
    eprintln!("elapsed: {:.2}s", report.elapsed_secs);
    if let Some(path) = &a.json {
        write_file(path, &(report.to_json()? + "\n"))?;
    }
    for d in &report.dimensions {
        if let Some(base) = &a.heatmap {
            let path = heatmap_path(base, d.p, report.dimensions.len() > 1);
            write_file(&path, &d.support_frequency.to_pgm())?;
        }
        if a.ascii {
            println!("\nsupport frequency, p = {}:", d.p);
            print!("{}", d.support_frequency.to_ascii());
        }
    }
    Ok(())
}

fn run_check(a: CheckArgs) -> CliResult {
    let read = |path: &Path| -> Result<scio::SymMatrix, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        read_matrix_text(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
    };
    let margin = match (&a.sigma, &a.graph) {
        (Some(path), _) => {
            let sigma = read(path)?;
            match &a.omega {
                Some(o) => irrepresentable_margin(&sigma, &read(o)?)?,
                None => graph_margin(&sigma)?,
            }
        }
        (None, Some(name)) => {
            if a.rho.is_nan() || a.rho.abs() >= 1.0 {
                return Err(Failure::usage(format!(
                    "--rho must lie in (-1, 1), got {}",
                    a.rho
                )));
            }
            let sigma = match name.as_str() {
                "diamond" => diamond_graph(a.rho),
                "star" => star_graph(a.rho),
                other => {
                    return Err(Failure::usage(format!(
                        "unknown graph {other:?} (diamond, star)"
                    )))
                }
            };
            graph_margin(&sigma)?
        }
        (None, None) => return Err(Failure::usage("give --sigma or --graph")),
    };
    println!("margin: {margin}");
    println!("condition {}", if margin > 0.0 { "holds" } else { "fails" });
    Ok(())
}

fn run_verify(a: VerifyArgs) -> CliResult {
    if a.p == 0 || a.p > VERIFY_MAX_P {
        return Err(Failure::usage(format!(
            "--p must lie in 1..={VERIFY_MAX_P} (enumeration is 3^p; library limit {BRUTE_FORCE_MAX_P}), got {}",
            a.p
        )));
    }
    if a.trials == 0 {
        return Err(Failure::usage("--trials must be at least 1"));
    }
    let config = SolverConfig {
        tol: VERIFY_TOL,
        execution: Execution::Sequential,
        ..SolverConfig::default()
    };
    let mut rng = child_rng(a.seed, 0);
    let mut worst = 0.0f64;
    for trial in 0..a.trials {
        let inst = random_instance(a.p, 0.01, 2.0, &mut rng)?;
        let cmp = compare_with_oracle(&inst, &config)?;
        worst = worst.max(cmp.objective_gap.abs());
        if cmp.objective_gap.abs() > VERIFY_OBJECTIVE_GAP {
            let replay = serde_json::to_string(&inst).map_err(ScioError::from)?;
            println!("worst objective gap: {worst:.3e}");
            return Err(Failure {
                code: EXIT_VERIFY,
                message: format!(
                    "trial {trial}: objective gap {:.3e} exceeds {VERIFY_OBJECTIVE_GAP:e}\ninstance: {replay}",
                    cmp.objective_gap
                ),
            });
        }
    }
    println!("trials: {}", a.trials);
    println!("worst objective gap: {worst:.3e}");
    Ok(())
}
