use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{bits_to_target, prepare, run_pool, run_seed, BitsToTarget, ExperimentConfig, Prepared};
use crate::optim::{Algorithm, RunOutput, StepSize};
use crate::{Error, Result};

/// One seed of one configuration in a comparison.
#[derive(Debug)]
pub struct SuiteRun {
    pub label: String,
    pub seed: u64,
    pub bits_to_target: BitsToTarget,
    pub output: RunOutput,
}

/// Summary of one configuration across its seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub label: String,
    pub algorithm: Algorithm,
    pub lr: Option<f64>,
    /// Seeds that reached the target.
    pub reached: usize,
    pub seeds: usize,
    /// Means over seeds; `None` unless every seed reached the target.
    pub mean_bits: Option<f64>,
    pub mean_epochs: Option<f64>,
    /// AsyFPG bits over this row's bits.
    pub ratio: Option<f64>,
}

#[derive(Debug)]
pub struct Comparison {
    pub initial_loss: f64,
    pub oracle_loss: f64,
    pub threshold: f64,
    pub rows: Vec<CompareRow>,
    pub runs: Vec<SuiteRun>,
}

impl Comparison {
    pub fn row(&self, label: &str) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Runs of `label`, in seed order.
    pub fn runs_of<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a SuiteRun> + 'a {
        self.runs.iter().filter(move |r| r.label == label)
    }

    /// Plain-text table: bits and epochs to target, and the ratio to AsyFPG.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "target loss {:.6} (oracle {:.6}, start {:.6})", self.threshold, self.oracle_loss, self.initial_loss);
        let _ = writeln!(s, "{:<16} {:>10} {:>16} {:>8} {:>8}", "algorithm", "lr", "bits", "epochs", "ratio");
        for r in &self.rows {
            let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |v| format!("{v:.p$}"));
            let _ = writeln!(
                s,
                "{:<16} {:>10} {:>16} {:>8} {:>8}",
                r.label,
                opt(r.lr, 4),
                opt(r.mean_bits, 0),
                opt(r.mean_epochs, 2),
                r.ratio.map_or("-".to_string(), |v| format!("{v:.2}x")),
            );
        }
        s
    }
}

fn labels(configs: &[ExperimentConfig]) -> Vec<String> {
    configs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let name = c.algo.algorithm.name();
            let dup = configs.iter().filter(|o| o.algo.algorithm == c.algo.algorithm).count() > 1;
            if dup {
                format!("{name}#{i}")
            } else {
                name.to_string()
            }
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Runs every configuration on their shared problem and tabulates bits and
/// epochs to a common loss target.
pub fn compare_suite(configs: &[ExperimentConfig]) -> Result<Comparison> {
    if configs.len() < 2 {
        return Err(Error::Config("a comparison needs at least two configurations".into()));
    }
    let first = &configs[0];
    for c in configs {
        c.validate()?;
        if c.problem != first.problem || c.target_gap != first.target_gap || c.oracle_iters != first.oracle_iters {
            return Err(Error::Config("configurations do not share a problem".into()));
        }
    }
    let prep = prepare(first)?;
    compare_prepared(&prep, configs)
}

/// As [`compare_suite`] on an already prepared problem.
pub fn compare_prepared(prep: &Prepared, configs: &[ExperimentConfig]) -> Result<Comparison> {
    let labels = labels(configs);
    let jobs: Vec<(usize, u64)> = configs.iter().enumerate().flat_map(|(i, c)| c.seeds.iter().map(move |&s| (i, s))).collect();
    let pool = run_pool()?;
    let outputs: Vec<Result<RunOutput>> = pool.install(|| {
        jobs.par_iter().map(|&(i, s)| run_seed(prep, &configs[i].algo, &configs[i].workers, s)).collect()
    });
    let mut runs = Vec::with_capacity(jobs.len());
    for (&(i, seed), out) in jobs.iter().zip(outputs) {
        let output = out?;
        let bits = bits_to_target(&output.metrics, prep.threshold, output.ledger.total_bits());
        runs.push(SuiteRun { label: labels[i].clone(), seed, bits_to_target: bits, output });
    }
    let mut rows: Vec<CompareRow> = configs
        .iter()
        .zip(&labels)
        .map(|(c, label)| {
            let hits: Vec<BitsToTarget> = runs.iter().filter(|r| &r.label == label).map(|r| r.bits_to_target).collect();
            let bits: Vec<f64> = hits.iter().filter_map(|h| h.bits()).map(|b| b as f64).collect();
            let epochs: Vec<f64> = hits.iter().filter_map(|h| h.epoch()).map(|e| e as f64).collect();
            let all = bits.len() == hits.len();
            CompareRow {
                label: label.clone(),
                algorithm: c.algo.algorithm,
                lr: match c.algo.step {
                    StepSize::Experiment { lr } => Some(lr),
                    StepSize::Theory { .. } => None,
                },
                reached: bits.len(),
                seeds: hits.len(),
                mean_bits: all.then(|| mean(&bits)),
                mean_epochs: all.then(|| mean(&epochs)),
                ratio: None,
            }
        })
        .collect();
    let base = rows.iter().find(|r| r.algorithm == Algorithm::AsyFpg).and_then(|r| r.mean_bits);
    for r in &mut rows {
        r.ratio = base.zip(r.mean_bits).map(|(b, m)| b / m);
    }
    let cmp = Comparison { initial_loss: prep.initial_loss, oracle_loss: prep.oracle_loss, threshold: prep.threshold, rows, runs };
    if let Some(dir) = &configs[0].out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("compare.json"), serde_json::to_string_pretty(&cmp.rows)?)?;
        std::fs::write(dir.join("compare.txt"), cmp.table())?;
    }
    Ok(cmp)
}
