//! Experiment configuration, orchestration and CSV/JSON output.
//!
//! CSV column layouts are documented in `docs/csv_schema.md`.

mod compare;
mod config;
mod mu_trace;
mod report;

use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::optim::{run_algorithm, AlgoConfig, RunOutput, StepSize};
use crate::problems::{
    load_libsvm, logistic_problem, minimize_full_precision, mlp_problem, synth_dataset_with, CompositeProblem, Dataset,
};
use crate::rng::{stream, StreamId};
use crate::simnet::WorkerSpec;
use crate::{Error, Result};

pub use compare::{compare_prepared, compare_suite, CompareRow, Comparison, SuiteRun};
pub use config::{DataSource, ExperimentConfig, ModelKind, ProblemSpec};
pub use mu_trace::{figure_mu_trace, mu_trace_from_run, EpochMu, MuRow, MuTrace};
pub use report::{bits_to_target, write_metrics_csv, write_trace_csv, BitsToTarget, RunReport, SeedReport};

/// Learning rates tried by default: `{1e-1, 5e-2, 1e-2, ..., 1e-5}`.
pub const DEFAULT_LR_GRID: [f64; 9] = [1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5];

/// A built problem, its starting point and the loss target derived from a
/// full-precision oracle run.
pub struct Prepared {
    pub problem: Box<dyn CompositeProblem>,
    pub x0: Vec<f64>,
    pub initial_loss: f64,
    /// Best loss found by the oracle.
    pub oracle_loss: f64,
    pub threshold: f64,
}

impl std::fmt::Debug for Prepared {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Prepared")
            .field("dim", &self.problem.dim())
            .field("initial_loss", &self.initial_loss)
            .field("oracle_loss", &self.oracle_loss)
            .field("threshold", &self.threshold)
            .finish()
    }
}

fn load_data(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Synth(s) => synth_dataset_with(s),
        DataSource::Libsvm { path, dim } => load_libsvm(path, *dim),
    }
}

/// Builds the problem and starting point described by `cfg`.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<(Box<dyn CompositeProblem>, Vec<f64>)> {
    let spec = &cfg.problem;
    let data = load_data(&spec.data)?;
    match spec.model {
        ModelKind::Logistic => {
            let p = logistic_problem(data, spec.lambda1, spec.lambda2)?;
            let x0 = vec![0.0; p.dim()];
            Ok((Box::new(p), x0))
        }
        ModelKind::Mlp { hidden, smoothness } => {
            if spec.lambda1 != 0.0 {
                return Err(Error::Config("the mlp model supports lambda2 only".into()));
            }
            let p = mlp_problem(data, hidden, spec.lambda2)?.with_smoothness(smoothness);
            let x0 = p.init_params(&mut stream(data_seed(spec), StreamId::Data));
            Ok((Box::new(p), x0))
        }
    }
}

fn data_seed(spec: &ProblemSpec) -> u64 {
    match &spec.data {
        DataSource::Synth(s) => s.seed,
        DataSource::Libsvm { .. } => 0,
    }
}

/// Validates `cfg`, builds the problem and runs the oracle that fixes the
/// loss target.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let (problem, x0) = build_problem(cfg)?;
    let initial_loss = problem.value(&x0);
    let oracle = minimize_full_precision(problem.as_ref(), &x0, cfg.oracle_iters, 1e-20);
    let oracle_loss = oracle.value.min(initial_loss);
    let threshold = oracle_loss + cfg.target_gap * (initial_loss - oracle_loss);
    info!("oracle loss {oracle_loss:.6} after {} iterations, target {threshold:.6}", oracle.iters);
    Ok(Prepared { problem, x0, initial_loss, oracle_loss, threshold })
}

/// Runs `algo` with `seed` on a prepared problem.
pub fn run_seed(prep: &Prepared, algo: &AlgoConfig, workers: &[WorkerSpec], seed: u64) -> Result<RunOutput> {
    let cfg = AlgoConfig { seed, ..algo.clone() };
    run_algorithm(prep.problem.as_ref(), &cfg, workers, &prep.x0)
}

/// Thread pool for independent runs, capped by `DQSIM_THREADS` when set.
pub fn run_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("DQSIM_THREADS") {
        let n: usize = v.parse().map_err(|_| Error::Config(format!("DQSIM_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::Config("DQSIM_THREADS must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(e.to_string()))
}

/// Runs every seed of `cfg` in parallel, in seed order.
pub fn run_all_seeds(prep: &Prepared, cfg: &ExperimentConfig) -> Result<Vec<RunOutput>> {
    let pool = run_pool()?;
    pool.install(|| cfg.seeds.par_iter().map(|&s| run_seed(prep, &cfg.algo, &cfg.workers, s)).collect())
}

fn seed_dir(cfg: &ExperimentConfig, out: &Path, seed: u64) -> PathBuf {
    if cfg.repetitions == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("seed_{seed}"))
    }
}

/// Runs the experiment for every seed, writes `metrics.csv`, `ledger.csv`,
/// `trace.csv` per seed and `report.json` when an output directory is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let prep = prepare(cfg)?;
    let outputs = run_all_seeds(&prep, cfg)?;
    let mut seeds = Vec::with_capacity(outputs.len());
    for (out, &seed) in outputs.iter().zip(&cfg.seeds) {
        let dir = cfg.out_dir.as_deref().map(|o| seed_dir(cfg, o, seed));
        seeds.push(SeedReport::build(&prep, out, dir.as_deref())?);
    }
    let report = RunReport {
        config: cfg.clone(),
        initial_loss: prep.initial_loss,
        oracle_loss: prep.oracle_loss,
        threshold: prep.threshold,
        seeds,
    };
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

/// Loss reached by one grid point; `None` when the run diverged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub lr: f64,
    pub final_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridOutcome {
    pub best_lr: f64,
    pub points: Vec<GridPoint>,
}

impl GridOutcome {
    /// `cfg` with the selected learning rate.
    pub fn apply(&self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut out = cfg.clone();
        out.algo.step = StepSize::Experiment { lr: self.best_lr };
        out
    }
}

/// Runs `algo` for `budget_epochs` epochs at every learning rate of `grid` and
/// keeps the one with the lowest final training loss; ties go to the smaller
/// rate. Diverged runs are skipped.
pub fn lr_grid_search_on(
    problem: &dyn CompositeProblem,
    x0: &[f64],
    algo: &AlgoConfig,
    workers: &[WorkerSpec],
    grid: &[f64],
    budget_epochs: usize,
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::Config("learning-rate grid is empty".into()));
    }
    let mut lrs = grid.to_vec();
    lrs.sort_by(f64::total_cmp);
    lrs.dedup();
    let pool = run_pool()?;
    let results: Vec<Result<Option<f64>>> = pool.install(|| {
        lrs.par_iter()
            .map(|&lr| {
                let cfg = AlgoConfig { step: StepSize::Experiment { lr }, epochs: budget_epochs, ..algo.clone() };
                match run_algorithm(problem, &cfg, workers, x0) {
                    Ok(out) => Ok(Some(out.final_loss()).filter(|v| v.is_finite())),
                    Err(Error::Diverged { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect()
    });
    let mut points = Vec::with_capacity(lrs.len());
    for (&lr, r) in lrs.iter().zip(results) {
        points.push(GridPoint { lr, final_loss: r? });
    }
    let best = points
        .iter()
        .filter_map(|p| p.final_loss.map(|v| (p.lr, v)))
        .fold(None, |best: Option<(f64, f64)>, (lr, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((lr, v)),
        });
    match best {
        Some((best_lr, _)) => Ok(GridOutcome { best_lr, points }),
        None => Err(Error::AllDiverged(lrs)),
    }
}

/// Grid search on the experiment's problem, using its first seed.
pub fn lr_grid_search(cfg: &ExperimentConfig, grid: &[f64], budget_epochs: usize) -> Result<GridOutcome> {
    cfg.validate()?;
    let (problem, x0) = build_problem(cfg)?;
    let algo = AlgoConfig { seed: cfg.seeds[0], ..cfg.algo.clone() };
    lr_grid_search_on(problem.as_ref(), &x0, &algo, &cfg.workers, grid, budget_epochs)
}
