//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use dqsim::codec::{
    decode, encode_dense, encode_flag, encode_full, encode_sparse, Decoded, MessageKind, WireMessage,
};
use dqsim::harness::{
    compare_suite, lr_grid_search, mu_trace_from_run, prepare, run_seed, Comparison, DataSource, ExperimentConfig,
    ProblemSpec, DEFAULT_LR_GRID,
};
use dqsim::optim::{reference_prox_svrg, run_algorithm, theory_constants, AlgoConfig, Algorithm, StepSize};
use dqsim::problems::{logistic_problem, mlp_problem, synth_dataset, synth_multiclass, CompositeProblem, SynthConfig};
use dqsim::quantizer::{expected_sq_error, quantize_scalar, LowPrecisionVector, QuantGrid, SparseLowPrecisionVector};
use dqsim::simnet::{LatencyModel, MasterNode, Simnet, StalenessRecord, WorkerNode, WorkerSpec};
use dqsim::sparsifier::{optimal_plan, second_moment_expected, sparsify, SparsePlan};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let el = start.elapsed();
    check(el < limit, format!("took {el:.1?}, limit {limit:?}"))
}

// ---------------------------------------------------------------- 1

/// Checks one random vector at every width; returns the worst deviation of
/// the Monte Carlo mean in standard errors.
fn quantizer_case(k: u64) -> Result<f64, String> {
    let mut rng = SmallRng::seed_from_u64(101 + k);
    let d = 16;
    let samples = 100_000;
    let mut worst_z = 0.0f64;
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let v: Vec<f64> = (0..d).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    for b in [2u32, 4, 8] {
        let grid = QuantGrid::for_vector(&v, b).map_err(|e| e.to_string())?;
        let delta = grid.delta();
        let err = expected_sq_error(&v, &grid).map_err(|e| e.to_string())?;
        check(err <= d as f64 * delta * delta / 4.0, format!("vector {k}, b={b}: error {err} above d delta^2 / 4"))?;
        let mut sums = vec![0.0; d];
        // Draws whose code is not x / delta, for values already on the grid.
        let mut moved = vec![0usize; d];
        let scaled: Vec<f64> = v.iter().map(|x| x / delta).collect();
        for _ in 0..samples {
            for (i, &x) in v.iter().enumerate() {
                let code = quantize_scalar(x, &grid, &mut rng).map_err(|e| e.to_string())?;
                sums[i] += grid.value(code);
                moved[i] += usize::from(code as f64 != scaled[i]);
            }
        }
        for (i, &x) in v.iter().enumerate() {
            let q = x / delta;
            let frac = q - q.floor();
            let var = frac * (1.0 - frac) * delta * delta;
            if var == 0.0 {
                check(moved[i] == 0, format!("vector {k}, b={b}, coord {i}: on-grid value moved in {} draws", moved[i]))?;
                continue;
            }
            let mean = sums[i] / samples as f64;
            let z = (mean - x).abs() / (var / samples as f64).sqrt();
            worst_z = worst_z.max(z);
            check(z <= 4.0, format!("vector {k}, b={b}, coord {i}: mean off by {z:.2} standard errors"))?;
        }
    }
    Ok(worst_z)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let worst: Vec<f64> = (0..100u64).map(quantizer_case).collect::<Result<_, _>>()?;
    let worst_z = worst.into_iter().fold(0.0, f64::max);
    within(Duration::from_secs(10), start)?;
    Ok(format!("100 vectors x 3 widths, worst deviation {worst_z:.2} SE, {:.1?}", start.elapsed()))
}

// ---------------------------------------------------------------- 2

/// Random valid plan with budget `phi`: `p_i = min(1, c w_i)` with `c` found by
/// bisection so the probabilities sum to `phi`.
fn random_plan(rng: &mut ChaCha8Rng, d: usize, phi: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
    let total = |c: f64| w.iter().map(|x| (c * x).min(1.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while total(hi) < phi {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < phi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    w.iter().map(|x| (hi * x).min(1.0)).collect()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let alpha = [3.0, 1.0];
    let plan = optimal_plan(&alpha, 4.0 / 3.0).map_err(|e| e.to_string())?;
    let draws = 1_000_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        let beta = sparsify(&alpha, &plan, &mut rng).map_err(|e| e.to_string())?;
        acc += beta.entries.iter().map(|(_, v)| v * v).sum::<f64>();
    }
    let empirical = acc / draws as f64;
    check((empirical - 12.0).abs() <= 0.12, format!("E||beta||^2 = {empirical}, expected 12"))?;
    let mut worst_margin = f64::INFINITY;
    for case in 0..50 {
        let d = rng.random_range(2..=8);
        let alpha: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..2.0) * if rng.random() { 1.0 } else { -1.0 }).collect();
        let l1: f64 = alpha.iter().map(|a| a.abs()).sum();
        let inf = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let phi = rng.random_range(0.1..=1.0) * l1 / inf;
        let best = second_moment_expected(&alpha, &optimal_plan(&alpha, phi).map_err(|e| e.to_string())?);
        for _ in 0..100 {
            let probs = random_plan(&mut rng, d, phi);
            let other = SparsePlan::new(probs).map_err(|e| e.to_string())?;
            check((other.budget() - phi).abs() < 1e-9, format!("case {case}: random plan budget {}", other.budget()))?;
            let m = second_moment_expected(&alpha, &other);
            worst_margin = worst_margin.min(m - best);
            check(best <= m * (1.0 + 1e-12), format!("case {case}: optimal {best} exceeds random plan {m}"))?;
        }
    }
    within(Duration::from_secs(30), start)?;
    Ok(format!("E||beta||^2 = {empirical:.4}, smallest margin {worst_margin:.3e}, {:.1?}", start.elapsed()))
}

// ---------------------------------------------------------------- 3

fn ceil_log2(d: usize) -> u64 {
    (d as f64).log2().ceil() as u64
}

fn random_dense(rng: &mut ChaCha8Rng, d: usize, b: u32) -> LowPrecisionVector {
    let delta = rng.random_range(1e-3f32..10.0) as f64;
    let grid = QuantGrid::new(delta, b).unwrap();
    let codes = (0..d).map(|_| rng.random_range(grid.min_code()..=grid.max_code()) as i32).collect();
    LowPrecisionVector { grid, codes }
}

fn random_sparse(rng: &mut ChaCha8Rng, d: usize, b: u32) -> SparseLowPrecisionVector {
    let dense = random_dense(rng, d, b);
    let keep = rng.random_range(0.0..1.0);
    let entries = dense.codes.iter().enumerate().filter(|_| rng.random::<f64>() < keep).map(|(i, &c)| (i as u32, c)).collect();
    SparseLowPrecisionVector { grid: dense.grid, dim: d, entries }
}

fn roundtrip(msg: &WireMessage, d: usize) -> Result<Decoded, String> {
    let again = WireMessage::from_bytes(msg.as_bytes().to_vec(), d).map_err(|e| e.to_string())?;
    check(&again == msg, "re-parsed message differs".into())?;
    decode(msg, d).map_err(|e| e.to_string())
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let dims = [1usize, 2, 3, 5, 8, 17, 64, 100, 1000];
    let widths = [2u32, 3, 4, 7, 8, 12, 16, 24, 31];
    let mut shapes = 0;
    for &d in &dims {
        for &b in &widths {
            let q = random_dense(&mut rng, d, b);
            let msg = encode_dense(&q).map_err(|e| e.to_string())?;
            check(msg.bits() == 32 + b as u64 * d as u64, format!("dense d={d} b={b}: {} bits", msg.bits()))?;
            let s = random_sparse(&mut rng, d, b);
            let msg = encode_sparse(&s).map_err(|e| e.to_string())?;
            let want = 32 + s.entries.len() as u64 * (ceil_log2(d) + b as u64);
            check(msg.bits() == want, format!("sparse d={d} b={b} nnz={}: {} bits, want {want}", s.entries.len(), msg.bits()))?;
            shapes += 2;
        }
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        check(encode_full(&v).bits() == 32 * d as u64, format!("full d={d}"))?;
        shapes += 1;
    }
    check(encode_flag().bits() == 1, "flag is not one bit".into())?;
    for k in 0..1000 {
        let d = dims[rng.random_range(0..dims.len())];
        let b = widths[rng.random_range(0..widths.len())];
        match k % 3 {
            0 => {
                let q = random_dense(&mut rng, d, b);
                let ok = matches!(roundtrip(&encode_dense(&q).map_err(|e| e.to_string())?, d)?, Decoded::Dense(ref r) if *r == q);
                check(ok, format!("dense roundtrip {k} (d={d}, b={b})"))?;
            }
            1 => {
                let s = random_sparse(&mut rng, d, b);
                let ok = matches!(roundtrip(&encode_sparse(&s).map_err(|e| e.to_string())?, d)?, Decoded::Sparse(ref r) if *r == s);
                check(ok, format!("sparse roundtrip {k} (d={d}, b={b})"))?;
            }
            _ => {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1e3f32..1e3) as f64).collect();
                let msg = encode_full(&v);
                check(msg.kind() == MessageKind::FullPrecisionVector, "kind".into())?;
                let ok = matches!(roundtrip(&msg, d)?, Decoded::Full(ref r) if r.iter().zip(&v).all(|(a, b)| a.to_bits() == b.to_bits()));
                check(ok, format!("full roundtrip {k} (d={d})"))?;
            }
        }
    }
    within(Duration::from_secs(5), start)?;
    Ok(format!("{shapes} shapes, 1000 roundtrips, {:.1?}", start.elapsed()))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let (n, d, epochs, m, lr, batch, seed) = (500, 20, 3, 30, 0.5, 5, 41);
    let p = logistic_problem(synth_dataset(n, d, 9, 0.05).map_err(|e| e.to_string())?, 1e-4, 1e-3).map_err(|e| e.to_string())?;
    let cfg = AlgoConfig {
        algorithm: Algorithm::AsyLpg,
        epochs,
        inner: m,
        step: StepSize::Experiment { lr },
        model_bits: 32,
        grad_bits: 32,
        tau: 0,
        batch,
        seed,
        capture_broadcasts: true,
        ..Default::default()
    };
    let x0 = vec![0.0; d];
    let out = run_algorithm(&p, &cfg, &[WorkerSpec::default()], &x0).map_err(|e| e.to_string())?;
    let reference = reference_prox_svrg(&p, &x0, epochs, m, lr, batch, seed);
    // With one worker and no delay the k-th broadcast of an epoch is the
    // iterate after k updates.
    let mut iterates: Vec<&[f64]> = Vec::new();
    for b in &out.broadcasts {
        if b.version > 0 {
            iterates.push(&b.x);
        }
        if b.version == m - 1 {
            iterates.push(&out.snapshots[b.epoch]);
        }
    }
    check(iterates.len() == reference.iterates.len(), format!("{} iterates vs {}", iterates.len(), reference.iterates.len()))?;
    let mut worst = 0.0f64;
    for (a, b) in iterates.iter().zip(&reference.iterates) {
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x - y).abs());
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    within(Duration::from_secs(10), start)?;
    Ok(format!("{} iterates, max deviation {worst:.1e}", iterates.len()))
}

// ---------------------------------------------------------------- 5

struct CountingMaster {
    tau: usize,
    applied: usize,
    violation: Option<StalenessRecord>,
}

impl MasterNode for CountingMaster {
    type Task = usize;
    type Reply = usize;

    fn dispatch(&mut self, _worker: usize, version: usize) -> dqsim::Result<usize> {
        Ok(version)
    }

    fn apply(&mut self, rec: StalenessRecord, reply: usize) -> dqsim::Result<()> {
        if rec.staleness() > self.tau || reply != rec.version || rec.t != self.applied {
            self.violation.get_or_insert(rec);
        }
        self.applied += 1;
        Ok(())
    }

    fn discard(&mut self, _worker: usize, _reply: usize) -> dqsim::Result<()> {
        Ok(())
    }
}

struct Echo;

impl WorkerNode<usize, usize> for Echo {
    fn work(&self, _worker: usize, task: usize, _rng: &mut dqsim::rng::Stream) -> dqsim::Result<usize> {
        Ok(task)
    }
}

fn latency_strategy() -> impl Strategy<Value = LatencyModel> {
    prop_oneof![
        (1u64..20).prop_map(|ticks| LatencyModel::Fixed { ticks }),
        (1u64..10, 0u64..30).prop_map(|(lo, w)| LatencyModel::Uniform { lo, hi: lo + w }),
        (0.05f64..1.0).prop_map(|p| LatencyModel::Geometric { p }),
    ]
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let steps = 10_000;
    let strategy = (prop::collection::vec(latency_strategy(), 1..10), 0usize..12, any::<u64>());
    let mut runner = TestRunner::new(PropConfig { cases: 200, failure_persistence: None, ..PropConfig::default() });
    let cases = std::cell::Cell::new(0);
    let worst = std::cell::Cell::new(0);
    let result = runner.run(&strategy, |(lat, tau, seed)| {
        let specs: Vec<WorkerSpec> = lat.into_iter().map(|latency| WorkerSpec { latency }).collect();
        let mut net = Simnet::new(specs, tau, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let mut master = CountingMaster { tau, applied: 0, violation: None };
        let records = net.run_inner_loop(1, steps, &mut master, &Echo).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(records.len(), steps);
        prop_assert!(master.violation.is_none(), "violation {:?}", master.violation);
        let max = records.iter().map(|r| r.staleness()).max().unwrap_or(0);
        prop_assert!(max <= tau);
        cases.set(cases.get() + 1);
        worst.set(worst.get().max(max));
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    within(Duration::from_secs(60), start)?;
    Ok(format!("{} configurations x {steps} steps, largest staleness {}, {:.1?}", cases.get(), worst.get(), start.elapsed()))
}

// ---------------------------------------------------------------- 6

fn rate_config() -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemSpec {
            data: DataSource::Synth(SynthConfig { n: 2000, d: 100, seed: 6, flip_noise: 0.1, spectrum_decay: 0.0 }),
            lambda1: 0.0,
            lambda2: 1e-4,
            ..Default::default()
        },
        algo: AlgoConfig {
            algorithm: Algorithm::AsyLpg,
            epochs: 10,
            inner: 50,
            batch: 1,
            step: StepSize::Theory { rho: None, sigma: 2.0 },
            metric_every: 1,
            seed: 6,
            ..Default::default()
        },
        oracle_iters: 20_000,
        ..Default::default()
    }
    .with_seeds(vec![6])
}

fn criterion_6(violations: &mut Vec<(String, u64)>) -> Outcome {
    let start = Instant::now();
    let cfg = rate_config();
    let prep = prepare(&cfg).map_err(|e| e.to_string())?;
    let out = run_seed(&prep, &cfg.algo, &cfg.workers, cfg.seeds[0]).map_err(|e| e.to_string())?;
    violations.push(("rate run".into(), out.stats.violations));
    let l = prep.problem.smoothness();
    let gap = prep.initial_loss - prep.oracle_loss;
    let report = theory_constants(&cfg.algo, prep.problem.dim(), l, Some(gap));
    let rho = report.rho.ok_or("no step parameter in theory report")?;
    check(report.eq3_holds == Some(true), format!("step condition fails at rho {rho}"))?;
    let t = (cfg.algo.epochs * cfg.algo.inner) as f64;
    let bound = 2.0 * l * gap / (rho * (1.0 - 2.0 * rho) * t);
    let reported = report.rate_bound.ok_or("no rate bound in theory report")?;
    check((bound - reported).abs() <= 1e-9 * bound, format!("reported bound {reported} vs {bound}"))?;
    let min_g = out.metrics.iter().map(|r| r.grad_mapping_sq).fold(f64::INFINITY, f64::min);
    check(2.0 * min_g <= bound, format!("min ||G||^2 = {min_g:.4e}, bound {bound:.4e}"))?;
    within(Duration::from_secs(300), start)?;
    Ok(format!("rho {rho:.3e}, min ||G||^2 {min_g:.3e} <= bound {bound:.3e} / {:.1}", bound / min_g))
}

// ---------------------------------------------------------------- 7-10

/// The shared desk-scale logistic problem: n=5000, d=300 with a decaying
/// feature spectrum, 4 workers, delay bound 4, b_x = b = 8, mu = 0.1.
fn desk_config(algorithm: Algorithm) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemSpec {
            data: DataSource::Synth(SynthConfig { n: 5000, d: 300, seed: 1, flip_noise: 0.1, spectrum_decay: 1.0 }),
            lambda1: 1e-5,
            lambda2: 1e-4,
            ..Default::default()
        },
        algo: AlgoConfig {
            algorithm,
            epochs: 20,
            inner: 500,
            batch: 10,
            model_bits: 8,
            grad_bits: 8,
            mu: 0.1,
            tau: 4,
            metric_every: 25,
            capture_broadcasts: algorithm == Algorithm::AsyLpg,
            ..Default::default()
        },
        workers: vec![WorkerSpec { latency: LatencyModel::Uniform { lo: 1, hi: 4 } }; 4],
        target_gap: 0.1,
        oracle_iters: 20_000,
        ..Default::default()
    }
    .with_seeds(vec![1, 2, 3])
}

struct Desk {
    lr: f64,
    cmp: Comparison,
    elapsed: Duration,
}

fn desk_run() -> Result<Desk, String> {
    let start = Instant::now();
    // One learning rate for every algorithm, tuned on the full-precision baseline.
    let grid = lr_grid_search(&desk_config(Algorithm::AsyFpg), &DEFAULT_LR_GRID, 3).map_err(|e| e.to_string())?;
    let configs: Vec<ExperimentConfig> = [Algorithm::AsyFpg, Algorithm::AsyLpg, Algorithm::AccAsyLpg]
        .into_iter()
        .map(|a| grid.apply(&desk_config(a)))
        .collect();
    let cmp = compare_suite(&configs).map_err(|e| e.to_string())?;
    println!("desk comparison (lr {} from grid search):\n{}", grid.best_lr, cmp.table());
    Ok(Desk { lr: grid.best_lr, cmp, elapsed: start.elapsed() })
}

fn mean_epoch_losses(cmp: &Comparison, label: &str) -> Vec<f64> {
    let runs: Vec<Vec<f64>> = cmp.runs_of(label).map(|r| r.output.epoch_losses()).collect();
    let epochs = runs[0].len();
    (0..epochs).map(|e| runs.iter().map(|r| r[e]).sum::<f64>() / runs.len() as f64).collect()
}

fn criterion_7(desk: &Desk) -> Outcome {
    let fpg = mean_epoch_losses(&desk.cmp, "asyfpg");
    let lpg = mean_epoch_losses(&desk.cmp, "asylpg");
    check(fpg.len() == lpg.len() && !fpg.is_empty(), "epoch counts differ".into())?;
    let (worst_epoch, worst) = fpg
        .iter()
        .zip(&lpg)
        .map(|(a, b)| (a - b).abs())
        .enumerate()
        .fold((0, 0.0f64), |acc, (e, v)| if v > acc.1 { (e + 1, v) } else { acc });
    check(worst <= 1e-3, format!("epoch {worst_epoch}: mean loss gap {worst:.2e}"))?;
    check(desk.elapsed < Duration::from_secs(300), format!("desk runs took {:.1?}", desk.elapsed))?;
    Ok(format!("largest mean loss gap {worst:.2e} at epoch {worst_epoch} over {} epochs, lr {}", fpg.len(), desk.lr))
}

fn criterion_8(desk: &Desk) -> Outcome {
    let ratio = |label: &str| desk.cmp.row(label).and_then(|r| r.ratio).ok_or(format!("{label} did not reach the target on every seed"));
    let lpg = ratio("asylpg")?;
    let acc = ratio("acc_asylpg")?;
    check(lpg >= 3.0, format!("AsyFPG/AsyLPG = {lpg:.2}"))?;
    check(acc >= lpg, format!("AsyFPG/Acc-AsyLPG = {acc:.2} < AsyFPG/AsyLPG = {lpg:.2}"))?;
    check(desk.elapsed < Duration::from_secs(600), format!("desk runs took {:.1?}", desk.elapsed))?;
    Ok(format!("AsyFPG/AsyLPG = {lpg:.2}x, AsyFPG/Acc-AsyLPG = {acc:.2}x"))
}

fn criterion_9(desk: &Desk) -> Outcome {
    let epochs = |label: &str| -> Result<Vec<usize>, String> {
        desk.cmp
            .runs_of(label)
            .map(|r| r.bits_to_target.epoch().ok_or(format!("{label} seed {} did not reach the target", r.seed)))
            .collect()
    };
    let lpg = epochs("asylpg")?;
    let acc = epochs("acc_asylpg")?;
    check(lpg.len() == 3 && acc.len() == 3, "expected three seeds".into())?;
    for (k, (a, l)) in acc.iter().zip(&lpg).enumerate() {
        check(a < l, format!("seed {}: accelerated {a} epochs vs {l}", k + 1))?;
    }
    Ok(format!("epochs to target: accelerated {acc:?}, plain {lpg:?}"))
}

fn criterion_10(desk: &Desk) -> Outcome {
    let run = desk.cmp.runs_of("asylpg").next().ok_or("missing asylpg run")?;
    let trace = mu_trace_from_run(&run.output, [4, 8]).map_err(|e| e.to_string())?;
    check(trace.all_finite, "non-finite required budget".into())?;
    check(trace.replay_max[0] > trace.replay_max[1], format!("replay maxima {:?}", trace.replay_max))?;
    let early = trace.early_fraction(0.2);
    check(early >= 0.8, format!("only {:.0}% of epochs peak early", 100.0 * early))?;
    Ok(format!(
        "{} broadcasts, ceiling {:.3e}, replay max b=4 {:.3e} > b=8 {:.3e}, {:.0}% of epochs peak in the first 20%",
        trace.rows.len(),
        trace.ceiling,
        trace.replay_max[0],
        trace.replay_max[1],
        100.0 * early
    ))
}

// ---------------------------------------------------------------- 11

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let data = synth_multiclass(12, 5, 3, 11, 2.0).map_err(|e| e.to_string())?;
    let p = mlp_problem(data, 6, 1e-3).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = p.full_grad(&x);
        let mut fd = vec![0.0; x.len()];
        for i in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            fd[i] = (p.smooth_value(&xp) - p.smooth_value(&xm)) / (2.0 * h);
        }
        let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|a| a * a).sum::<f64>().sqrt());
        let rel = diff / norm.max(1e-12);
        worst = worst.max(rel);
    }
    check(worst <= 1e-4, format!("relative error {worst:.2e}"))?;
    within(Duration::from_secs(30), start)?;
    Ok(format!("20 points, dim {}, worst relative error {worst:.2e}", p.dim()))
}

// ---------------------------------------------------------------- 12

fn criterion_12(violations: &[(String, u64)], desk: Option<&Desk>) -> Outcome {
    let mut all = violations.to_vec();
    let desk = desk.ok_or("desk runs unavailable")?;
    for r in &desk.cmp.runs {
        all.push((format!("{} seed {}", r.label, r.seed), r.output.stats.violations));
    }
    let bad: Vec<&(String, u64)> = all.iter().filter(|(_, v)| *v > 0).collect();
    check(bad.is_empty(), format!("violations in {bad:?}"))?;
    let escalated: u64 = desk.cmp.runs.iter().map(|r| r.output.stats.escalations).sum();
    let sent: u64 = desk.cmp.runs.iter().map(|r| r.output.stats.count - r.output.stats.flags).sum();
    Ok(format!("{} runs, 0 violations ({escalated} of {sent} quantized broadcasts widened to meet the budget)", all.len()))
}

fn main() {
    let mut failed = Vec::new();
    let mut report = |n: u32, outcome: Outcome| match outcome {
        Ok(msg) => println!("[PASS] criterion {n}: {msg}"),
        Err(msg) => {
            println!("[FAIL] criterion {n}: {msg}");
            failed.push(n);
        }
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());
    let mut violations = Vec::new();
    report(6, criterion_6(&mut violations));
    let desk = desk_run();
    let desk_ref = desk.as_ref();
    let on_desk = |f: fn(&Desk) -> Outcome| desk_ref.map_err(|e| format!("desk runs failed: {e}")).and_then(f);
    report(7, on_desk(criterion_7));
    report(8, on_desk(criterion_8));
    report(9, on_desk(criterion_9));
    report(10, on_desk(criterion_10));
    report(11, criterion_11());
    report(12, criterion_12(&violations, desk_ref.ok()));
    if !failed.is_empty() {
        println!("acceptance: {} criteria failed: {failed:?}", failed.len());
        std::process::exit(1);
    }
    println!("acceptance: all 12 criteria passed");
}
