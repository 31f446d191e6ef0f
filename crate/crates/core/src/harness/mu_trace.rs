use serde::Serialize;

use super::{prepare, run_seed, ExperimentConfig};
use crate::optim::{Algorithm, AlgoConfig, RunOutput};
use crate::quantizer::{mu_required_on, QuantGrid};
use crate::{Error, Result};

/// One non-flag model broadcast.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuRow {
    pub epoch: usize,
    /// Inner-iteration version that was broadcast.
    pub version: usize,
    /// Required budget at the configured width.
    pub mu_required: f64,
    /// Required budget on the same iterate at the two replay widths.
    pub replay_lo: f64,
    pub replay_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMu {
    pub epoch: usize,
    pub max: f64,
    /// Version at which `max` occurred.
    pub argmax_version: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuTrace {
    pub bits: u32,
    pub inner: usize,
    pub replay_bits: [u32; 2],
    pub rows: Vec<MuRow>,
    pub epochs: Vec<EpochMu>,
    /// Largest required budget over the run: the run's precision ceiling.
    pub ceiling: f64,
    pub replay_max: [f64; 2],
    pub all_finite: bool,
}

impl MuTrace {
    /// Fraction of epochs whose maximum falls within the first `window`
    /// fraction of inner iterations.
    pub fn early_fraction(&self, window: f64) -> f64 {
        if self.epochs.is_empty() {
            return 0.0;
        }
        let cut = window * self.inner as f64;
        let early = self.epochs.iter().filter(|e| (e.argmax_version as f64) < cut).count();
        early as f64 / self.epochs.len() as f64
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn replay(x: &[f64], snapshot: &[f64], bits: u32) -> Result<f64> {
    mu_required_on(x, snapshot, &QuantGrid::for_vector(x, bits)?.binary32_safe())
}

/// Builds the trace from a run made with `capture_broadcasts`. Snapshot-flag
/// broadcasts are skipped since the budget is undefined there.
pub fn mu_trace_from_run(out: &RunOutput, replay_bits: [u32; 2]) -> Result<MuTrace> {
    if out.broadcasts.is_empty() {
        return Err(Error::Config("run did not capture its broadcasts".into()));
    }
    let mut rows = Vec::with_capacity(out.broadcasts.len());
    for b in &out.broadcasts {
        let snapshot = &out.snapshots[b.epoch - 1];
        if &b.x == snapshot {
            continue;
        }
        let mu_required = b
            .mu_required
            .ok_or_else(|| Error::Config("mu trace needs a quantized model broadcast".into()))?;
        rows.push(MuRow {
            epoch: b.epoch,
            version: b.version,
            mu_required,
            replay_lo: replay(&b.x, snapshot, replay_bits[0])?,
            replay_hi: replay(&b.x, snapshot, replay_bits[1])?,
        });
    }
    let mut epochs: Vec<EpochMu> = Vec::new();
    for r in &rows {
        match epochs.last_mut() {
            Some(e) if e.epoch == r.epoch => {
                if r.mu_required > e.max {
                    e.max = r.mu_required;
                    e.argmax_version = r.version;
                }
            }
            _ => epochs.push(EpochMu { epoch: r.epoch, max: r.mu_required, argmax_version: r.version }),
        }
    }
    let fold = |f: fn(&MuRow) -> f64| rows.iter().map(f).fold(0.0f64, f64::max);
    Ok(MuTrace {
        bits: out.config.effective_model_bits(),
        inner: out.config.inner,
        replay_bits,
        all_finite: rows.iter().all(|r| r.mu_required.is_finite()),
        ceiling: fold(|r| r.mu_required),
        replay_max: [fold(|r| r.replay_lo), fold(|r| r.replay_hi)],
        rows,
        epochs,
    })
}

/// Runs the first seed of an AsyLPG experiment with broadcast capture and
/// traces the required budget; writes `mu_trace.csv` when an output
/// directory is set.
pub fn figure_mu_trace(cfg: &ExperimentConfig, replay_bits: [u32; 2]) -> Result<MuTrace> {
    if cfg.algo.algorithm != Algorithm::AsyLpg {
        return Err(Error::Config(format!("mu trace needs asylpg, got {}", cfg.algo.algorithm)));
    }
    let prep = prepare(cfg)?;
    let algo = AlgoConfig { capture_broadcasts: true, ..cfg.algo.clone() };
    let out = run_seed(&prep, &algo, &cfg.workers, cfg.seeds[0])?;
    let trace = mu_trace_from_run(&out, replay_bits)?;
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        trace.write_csv(std::fs::File::create(dir.join("mu_trace.csv"))?)?;
    }
    Ok(trace)
}
