use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ExperimentConfig, Prepared};
use crate::optim::{theory_constants, Algorithm, BroadcastStats, MetricsRow, RunOutput, TheoryReport, TraceRow};
use crate::Result;

/// Bits sent until the training loss first drops below the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum BitsToTarget {
    Reached { bits: u64, epoch: usize, t: usize },
    NotReached { total_bits: u64 },
}

impl BitsToTarget {
    pub fn bits(&self) -> Option<u64> {
        match *self {
            BitsToTarget::Reached { bits, .. } => Some(bits),
            BitsToTarget::NotReached { .. } => None,
        }
    }

    pub fn epoch(&self) -> Option<usize> {
        match *self {
            BitsToTarget::Reached { epoch, .. } => Some(epoch),
            BitsToTarget::NotReached { .. } => None,
        }
    }
}

/// First-crossing accounting: the cumulative ledger total on the first
/// metrics row whose loss is below `threshold`.
pub fn bits_to_target(metrics: &[MetricsRow], threshold: f64, total_bits: u64) -> BitsToTarget {
    match metrics.iter().find(|r| r.train_loss < threshold) {
        Some(r) => BitsToTarget::Reached { bits: r.cumulative_bits, epoch: r.epoch, t: r.t },
        None => BitsToTarget::NotReached { total_bits },
    }
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub metrics_csv: Option<PathBuf>,
    pub ledger_csv: Option<PathBuf>,
    pub trace_csv: Option<PathBuf>,
    pub theory: TheoryReport,
    pub bits_to_target: BitsToTarget,
    pub total_bits: u64,
    pub final_loss: f64,
    /// Loss at the algorithm's declared output.
    pub output_loss: f64,
    pub max_staleness: usize,
    pub broadcasts: BroadcastStats,
    pub output_x: Vec<f64>,
}

impl SeedReport {
    /// Summarizes `out`, writing its CSVs under `dir` when given.
    pub fn build(prep: &Prepared, out: &RunOutput, dir: Option<&Path>) -> Result<Self> {
        let (mut metrics_csv, mut ledger_csv, mut trace_csv) = (None, None, None);
        if let Some(dir) = dir {
            std::fs::create_dir_all(dir)?;
            let (m, l, t) = (dir.join("metrics.csv"), dir.join("ledger.csv"), dir.join("trace.csv"));
            write_metrics_csv(&out.metrics, std::fs::File::create(&m)?)?;
            out.ledger.write_csv(std::fs::File::create(&l)?)?;
            write_trace_csv(&out.trace, std::fs::File::create(&t)?)?;
            (metrics_csv, ledger_csv, trace_csv) = (Some(m), Some(l), Some(t));
        }
        let total_bits = out.ledger.total_bits();
        let gap = prep.initial_loss - prep.oracle_loss;
        Ok(SeedReport {
            seed: out.config.seed,
            algorithm: out.config.algorithm,
            metrics_csv,
            ledger_csv,
            trace_csv,
            theory: theory_constants(&out.config, prep.problem.dim(), prep.problem.smoothness(), Some(gap)),
            bits_to_target: bits_to_target(&out.metrics, prep.threshold, total_bits),
            total_bits,
            final_loss: out.final_loss(),
            output_loss: prep.problem.value(&out.output_x),
            max_staleness: out.records.iter().map(|r| r.staleness()).max().unwrap_or(0),
            broadcasts: out.stats.clone(),
            output_x: out.output_x.clone(),
        })
    }
}

/// Everything `run_experiment` produced, serialized to `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub initial_loss: f64,
    pub oracle_loss: f64,
    pub threshold: f64,
    pub seeds: Vec<SeedReport>,
}
