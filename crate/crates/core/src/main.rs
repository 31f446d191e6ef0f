use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dqsim::harness::{
    compare_suite, figure_mu_trace, lr_grid_search, run_experiment, ExperimentConfig, DEFAULT_LR_GRID,
};
use dqsim::optim::Algorithm;

#[derive(Parser)]
#[command(name = "dqsim", version, about = "Double-quantized asynchronous optimization on a simulated parameter server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment file; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSVs and reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the algorithm (asylpg, sparse_asylpg, acc_asylpg, asyfpg, acc_asyfpg, qsvrg).
    #[arg(long)]
    algo: Option<Algorithm>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seeds(vec![seed]);
        }
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        if let Some(algo) = self.algo {
            cfg.algo.algorithm = algo;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write metrics.csv, ledger.csv, trace.csv, report.json.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Pick the learning rate with the lowest final loss after a short run.
    GridSearch {
        #[command(flatten)]
        common: Common,
        /// Comma-separated learning rates.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        /// Epochs per grid point.
        #[arg(long, default_value_t = 3)]
        budget_epochs: usize,
    },
    /// Trace the precision-loss budget each model broadcast needs.
    MuTrace {
        #[command(flatten)]
        common: Common,
        /// The two widths replayed on the same trajectory.
        #[arg(long, value_delimiter = ',', default_values_t = [4u32, 8])]
        replay: Vec<u32>,
    },
    /// Bits and epochs to the target loss for several algorithms on one problem.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Algorithms to run with the base configuration.
        #[arg(long, value_delimiter = ',')]
        algos: Vec<Algorithm>,
        /// Further configuration files compared alongside the base one.
        #[arg(long = "with")]
        with: Vec<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { common } => {
            let cfg = common.load()?;
            let report = run_experiment(&cfg)?;
            println!("target loss {:.6} (oracle {:.6})", report.threshold, report.oracle_loss);
            for s in &report.seeds {
                println!(
                    "seed {:>4} {:<14} final {:.6} bits {} to-target {:?}",
                    s.seed,
                    s.algorithm.name(),
                    s.final_loss,
                    s.total_bits,
                    s.bits_to_target
                );
            }
        }
        Command::GridSearch { common, grid, budget_epochs } => {
            let cfg = common.load()?;
            let grid = if grid.is_empty() { DEFAULT_LR_GRID.to_vec() } else { grid };
            let out = lr_grid_search(&cfg, &grid, budget_epochs)?;
            for p in &out.points {
                match p.final_loss {
                    Some(v) => println!("lr {:<10} final {v:.6}", p.lr),
                    None => println!("lr {:<10} diverged", p.lr),
                }
            }
            println!("best lr {}", out.best_lr);
            if let Some(dir) = &cfg.out_dir {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("grid.json"), serde_json::to_string_pretty(&out)?)?;
                std::fs::write(dir.join("best_config.json"), out.apply(&cfg).to_json()?)?;
            }
        }
        Command::MuTrace { common, replay } => {
            let cfg = common.load()?;
            let [lo, hi] = replay[..] else { bail!("--replay takes exactly two widths") };
            let t = figure_mu_trace(&cfg, [lo, hi])?;
            println!("broadcasts {} ceiling {:.4e} finite {}", t.rows.len(), t.ceiling, t.all_finite);
            println!("replay max: b={lo} {:.4e}, b={hi} {:.4e}", t.replay_max[0], t.replay_max[1]);
            println!("epochs peaking in first 20%: {:.0}%", 100.0 * t.early_fraction(0.2));
        }
        Command::Compare { common, algos, with } => {
            let base = common.load()?;
            let mut configs: Vec<ExperimentConfig> = if algos.is_empty() {
                vec![base.clone()]
            } else {
                algos
                    .iter()
                    .map(|&a| {
                        let mut c = base.clone();
                        c.algo.algorithm = a;
                        c
                    })
                    .collect()
            };
            for path in &with {
                let mut c = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
                c.out_dir = base.out_dir.clone();
                configs.push(c);
            }
            print!("{}", compare_suite(&configs)?.table());
        }
    }
    Ok(())
}
