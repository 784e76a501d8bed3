//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::TAU;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starmec_agent::gradcheck::{check_mlp_gradients, matrix};
use starmec_agent::ppo::clipped_objective;
use starmec_agent::train::derive_seed;
use starmec_agent::{train, Activation, Mlp, PpoController, TrainConfig};
use starmec_core::baselines::{run_episode, RandomPolicy};
use starmec_core::channel::{rate, sinr, InterferenceMode};
use starmec_core::compute::{
    local_energy, local_latency, offload_energy, offload_latency, slot_completion_time, CompletionMode, DeviceCompute,
};
use starmec_core::env::piecewise_c;
use starmec_core::mobility::flight_energy;
use starmec_core::{EnergyBreakdown, Position3, Region, StarMecEnv, SystemConfig, TaskSpec};
use starmec_harness::config::linspace;
use starmec_harness::oracle::{oracle_instance, oracle_search, ppo_on_instance, OracleGrid};
use starmec_harness::results::{mean_at, summarize};
use starmec_harness::sweep::{evaluate, run_sweep, PolicyKey};
use starmec_harness::{Axis, ExperimentConfig, PolicyStore, Scheme};

type Outcome = Result<String, String>;

fn close(got: f64, want: f64) -> bool {
    if want == 0.0 {
        got == 0.0
    } else {
        ((got - want) / want).abs() <= 1e-9
    }
}

fn within(started: Instant, limit: Duration, detail: String) -> Outcome {
    let took = started.elapsed();
    if took <= limit {
        Ok(detail)
    } else {
        Err(format!("{detail}; took {took:.1?}, limit {limit:?}"))
    }
}

fn formulas() -> Outcome {
    let started = Instant::now();
    let task = TaskSpec {
        input_bits: 1e5,
        cycles_per_bit: 800.0,
        deadline: 2.0,
    };
    let dev = DeviceCompute {
        cpu_freq_hz: 1e8,
        chip_coeff: 1e-28,
        max_power_w: 0.2,
    };
    let a = Position3::new(50.0, 0.0, 20.0);
    let b = Position3::new(60.0, 0.0, 20.0);
    let reg = [Region::Reflection];
    let cases: Vec<(&str, f64, f64)> = vec![
        ("local latency, lambda 0", local_latency(0.0, &task, &dev), 0.8),
        ("local latency, lambda 1", local_latency(1.0, &task, &dev), 0.0),
        ("local latency, lambda 0.5", local_latency(0.5, &task, &dev), 0.4),
        ("local energy, lambda 0", local_energy(0.0, &task, &dev), 8e-5),
        ("local energy, lambda 1", local_energy(1.0, &task, &dev), 0.0),
        ("local energy, lambda 0.5", local_energy(0.5, &task, &dev), 4e-5),
        ("offload latency, lambda 0.5", offload_latency(0.5, &task, 1e7), 5e-3),
        ("offload latency, lambda 0", offload_latency(0.0, &task, 1e7), 0.0),
        ("offload latency, lambda 1", offload_latency(1.0, &task, 1e7), 1e-2),
        ("offload energy, p 0.1", offload_energy(0.5, &task, 1e7, 0.1), 5e-4),
        ("offload energy, p 0", offload_energy(0.5, &task, 1e7, 0.0), 0.0),
        ("offload energy, lambda 1", offload_energy(1.0, &task, 1e7, 0.1), 1e-3),
        ("completion, lambda 0", slot_completion_time(0.0, 0.8, 0.0, CompletionMode::Weighted), 0.8),
        ("completion, weighted", slot_completion_time(0.5, 0.4, 5e-3, CompletionMode::Weighted), 0.2025),
        ("completion, parallel", slot_completion_time(0.5, 0.4, 5e-3, CompletionMode::Parallel), 0.4),
        ("total energy", EnergyBreakdown::new(4e-5, 5e-4, 4.0).total, 4.00054),
        ("sinr, orthogonal", sinr(0, &[1e-10], &[0.1], &reg, 1e-12, InterferenceMode::Orthogonal), 10.0),
        ("sinr, zero power", sinr(0, &[1e-10], &[0.0], &reg, 1e-12, InterferenceMode::Orthogonal), 0.0),
        ("rate, sinr 0", rate(0.0, 1e7), 0.0),
        ("rate, sinr 1", rate(1.0, 1e7), 1e7),
        ("rate, sinr 3", rate(3.0, 1e7), 2e7),
        ("flight energy, exponent 1", flight_energy(&a, &b, 2.5, 1.0, 1), 4.0),
        ("flight energy, hover", flight_energy(&a, &a, 2.5, 1.0, 1), 0.0),
        ("flight energy, exponent 2", flight_energy(&a, &b, 2.5, 1.0, 2), 16.0),
        ("C(5)", piecewise_c(5.0, 1.0), 1.0),
        ("C(0)", piecewise_c(0.0, 1.0), 1.0),
        ("C(-2)", piecewise_c(-2.0, 1.0), -2.0),
        ("C(-0.1)", piecewise_c(-0.1, 1.0), -0.1),
        ("clip, ratio 1.5", clipped_objective(1.5, 1.0, 0.2), 1.2),
        ("clip, ratio 1", clipped_objective(1.0, 1.0, 0.2), 1.0),
        ("clip, ratio 0.5", clipped_objective(0.5, -1.0, 0.2), -0.8),
    ];
    let bad: Vec<String> = cases
        .iter()
        .filter(|(_, got, want)| !close(*got, *want))
        .map(|(name, got, want)| format!("{name}: {got} != {want}"))
        .collect();
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    within(started, Duration::from_secs(1), format!("{} examples", cases.len()))
}

fn feasibility() -> Outcome {
    let cfg = SystemConfig::default();
    let mut env = StarMecEnv::new(cfg.clone()).map_err(|e| e.to_string())?;
    let dim = env.action_space().dim();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut steps, mut violations, mut episode) = (0usize, 0usize, 0u64);
    let mut max_speed: f64 = 0.0;
    while steps < 100_000 {
        env.reset(episode);
        episode += 1;
        loop {
            let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let out = env.step_squashed(&raw).map_err(|e| e.to_string())?;
            steps += 1;
            let st = env.state();
            let slot = env.trace().slots.last().expect("a slot was just recorded");
            let speed = slot.displacement_m / cfg.slot_duration();
            max_speed = max_speed.max(speed);
            let ok = (0..cfg.elements).all(|m| {
                st.coeffs.beta_r[m] + st.coeffs.beta_t[m] == 1.0
                    && (0.0..TAU).contains(&st.coeffs.phi_r[m])
                    && (0.0..TAU).contains(&st.coeffs.phi_t[m])
            }) && st.power_w.iter().all(|p| (0.0..=cfg.max_power_w).contains(p))
                && slot.lambda.iter().all(|l| (0.0..=1.0).contains(l))
                && slot.lambda_executed.iter().all(|l| (0.0..=1.0).contains(l))
                && speed <= 7.0
                && !slot.violations.speed;
            if !ok {
                violations += 1;
            }
            if out.done {
                break;
            }
        }
    }
    if violations == 0 {
        Ok(format!("{steps} steps over {episode} episodes, max speed {max_speed:.3} m/s"))
    } else {
        Err(format!("{violations} violating steps of {steps}"))
    }
}

fn gradients() -> Outcome {
    let started = Instant::now();
    let architectures: [(&[usize], Activation); 3] = [
        (&[6, 16, 16, 4], Activation::Tanh),
        (&[5, 12, 3], Activation::Relu),
        (&[4, 8, 8, 8, 1], Activation::Tanh),
    ];
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (sizes, act) in architectures {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = Mlp::new(sizes, act, 1.0, &mut rng);
            for layer in &mut net.layers {
                layer.b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
            }
            let x = matrix(7, sizes[0], || rng.random_range(-1.0..1.0));
            let dy = matrix(7, *sizes.last().expect("non-empty"), || rng.random_range(-1.0..1.0));
            let r = check_mlp_gradients(&net, x.view(), dy.view(), 1e-5, 1e-7).map_err(|e| e.to_string())?;
            worst = worst.max(r.max_rel_error);
            checked += r.checked;
        }
    }
    let detail = format!("{checked} parameters, max relative error {worst:.2e}");
    if worst >= 1e-4 {
        return Err(detail);
    }
    within(started, Duration::from_secs(30), detail)
}

fn learning() -> Outcome {
    let started = Instant::now();
    let sys = SystemConfig {
        num_devices: 2,
        reflection_devices: 1,
        elements: 4,
        slots: 5,
        ..SystemConfig::default()
    };
    let seed = 42;
    let mut env = StarMecEnv::new(sys.clone()).map_err(|e| e.to_string())?;
    let mut random = RandomPolicy::new(derive_seed(seed, 0x5EED));
    let episodes = 200;
    let mut random_mean = 0.0;
    for e in 0..episodes {
        random_mean += run_episode(&mut env, &mut random, derive_seed(seed, e)).map_err(|e| e.to_string())?.total_reward();
    }
    random_mean /= episodes as f64;

    let tc = TrainConfig {
        iterations: 200,
        seed,
        ..TrainConfig::default()
    };
    let out = train(&sys, &tc).map_err(|e| e.to_string())?;
    let trained = out.curve.tail_mean_reward(10).ok_or("empty learning curve")?;
    let mut ctl = PpoController::new(out.agent.params, &env, "star_ppo").map_err(|e| e.to_string())?;
    let mut greedy = 0.0;
    for e in 0..episodes {
        greedy += run_episode(&mut env, &mut ctl, derive_seed(seed, e)).map_err(|e| e.to_string())?.total_reward();
    }
    greedy /= episodes as f64;

    // 1.3x "better" than the baseline, read on a sign-agnostic scale
    let target = random_mean + 0.3 * random_mean.abs();
    let detail = format!("trained {trained:.3} (greedy {greedy:.3}) vs random {random_mean:.3}, target {target:.3}");
    if trained < target {
        return Err(detail);
    }
    within(started, Duration::from_secs(600), detail)
}

fn oracle(cfg: &ExperimentConfig) -> Outcome {
    let started = Instant::now();
    let o = &cfg.oracle;
    let sys = oracle_instance(&cfg.system, o.elements);
    let grid = OracleGrid::from_settings(o, sys.max_power_w);
    let res = oracle_search(&sys, o.instance_seed, &grid).map_err(|e| e.to_string())?;
    let run = ppo_on_instance(cfg, 0).map_err(|e| e.to_string())?;
    let gap = run.energy_j / res.min_energy_j - 1.0;
    let detail = format!(
        "oracle {:.4e} J over {} points, PPO {:.4e} J, gap {:+.2}%, PPO feasible {}",
        res.min_energy_j,
        res.evaluated,
        run.energy_j,
        100.0 * gap,
        run.feasible
    );
    if !run.feasible || gap > 0.10 {
        return Err(detail);
    }
    within(started, Duration::from_secs(300), detail)
}

const ORDERED: [Scheme; 3] = [Scheme::StarPpo, Scheme::ConvPpo, Scheme::FixedTrajectory];

fn input_trend(cfg: &ExperimentConfig, store: &mut PolicyStore) -> Outcome {
    let started = Instant::now();
    let grid = linspace(0.05, 0.1, 6);
    let rows = run_sweep(cfg, Axis::InputBits, &grid, &Scheme::BENCHMARKS, store).map_err(|e| e.to_string())?;
    let summary = summarize(&rows);
    let mut bad = Vec::new();
    for scheme in Scheme::BENCHMARKS {
        let means: Vec<f64> = grid.iter().map(|v| mean_at(&summary, scheme.name(), *v).unwrap_or(f64::NAN)).collect();
        println!("    {:<17} {}", scheme.name(), fmt_row(&means));
        if !means.windows(2).all(|w| w[1] >= w[0]) {
            bad.push(format!("{} not nondecreasing", scheme.name()));
        }
    }
    for v in &grid {
        let e: Vec<f64> = ORDERED.iter().map(|s| mean_at(&summary, s.name(), *v).unwrap_or(f64::NAN)).collect();
        if !(e[0] <= e[1] && e[1] <= e[2]) {
            bad.push(format!("ordering broken at {v} Mbit"));
        }
    }
    let detail = format!("{} rows, {} seeds", rows.len(), cfg.sweep.seeds.len());
    if !bad.is_empty() {
        return Err(format!("{detail}: {}", bad.join("; ")));
    }
    within(started, Duration::from_secs(7200), detail)
}

fn elements_trend(cfg: &ExperimentConfig, store: &mut PolicyStore) -> Outcome {
    let grid: Vec<f64> = cfg.sweep.elements.iter().map(|m| *m as f64).collect();
    let rows = run_sweep(cfg, Axis::Elements, &grid, &ORDERED, store).map_err(|e| e.to_string())?;
    let summary = summarize(&rows);
    let mean = |s: Scheme| -> Vec<f64> { grid.iter().map(|v| mean_at(&summary, s.name(), *v).unwrap_or(f64::NAN)).collect() };
    for s in ORDERED {
        println!("    {:<17} {}", s.name(), fmt_row(&mean(s)));
    }
    let (star, conv, ft) = (mean(Scheme::StarPpo), mean(Scheme::ConvPpo), mean(Scheme::FixedTrajectory));
    let mut bad = Vec::new();
    if !star.windows(2).all(|w| w[1] <= w[0]) {
        bad.push("star_ppo not nonincreasing".to_string());
    }
    for (i, v) in grid.iter().enumerate() {
        if !(star[i] < conv[i] && star[i] < ft[i]) {
            bad.push(format!("star_ppo not below both benchmarks at M={v}"));
        }
    }
    let detail = format!("M in {:?}", cfg.sweep.elements);
    if bad.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", bad.join("; ")))
    }
}

fn trajectory(cfg: &ExperimentConfig, store: &PolicyStore) -> Outcome {
    let (mut ppo_len, mut ft_len, mut ppo_ret, mut ft_ret) = (0.0, 0.0, 0.0f64, 0.0f64);
    let mut n = 0.0;
    for &seed in &cfg.sweep.seeds {
        let key = PolicyKey {
            scheme: Scheme::StarPpo,
            elements: cfg.system.elements,
            seed,
        };
        let params = &store.get(&key).ok_or("missing trained policy")?.params;
        let ppo = evaluate(&cfg.system, Scheme::StarPpo, Some(params), seed, cfg.sweep.eval_episodes).map_err(|e| e.to_string())?;
        let ft = evaluate(&cfg.system, Scheme::FixedTrajectory, None, seed, cfg.sweep.eval_episodes).map_err(|e| e.to_string())?;
        for (p, f) in ppo.iter().zip(&ft) {
            ppo_len += p.path_length();
            ft_len += f.path_length();
            ppo_ret = ppo_ret.max(p.return_distance());
            ft_ret = ft_ret.max(f.return_distance());
            n += 1.0;
        }
    }
    let (ppo_len, ft_len) = (ppo_len / n, ft_len / n);
    let detail = format!(
        "mean path {ppo_len:.1} m vs tour {ft_len:.1} m, worst return gap {ppo_ret:.3} m / {ft_ret:.3} m"
    );
    if ppo_len < ft_len && ppo_ret <= 1.0 && ft_ret <= 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_starmec"))
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .env_remove("STARMEC_OUTPUT_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn determinism() -> Outcome {
    let runs: [(&[&str], &[&str]); 3] = [
        (
            &["eval", "--scheme", "fixed_trajectory", "--seed", "3", "--episodes", "2"],
            &["eval_fixed_trajectory_seed3.csv", "eval_fixed_trajectory_seed3_trajectory.csv", "eval_fixed_trajectory_seed3.jsonl"],
        ),
        (
            &["train", "--scheme", "star_ppo", "--seed", "5", "--iterations", "3"],
            &["star_ppo_seed5_curve.csv", "star_ppo_seed5.ckpt"],
        ),
        (
            &["sweep", "--axis", "input_bits", "--grid", "0.05,0.1", "--schemes", "fixed_trajectory,full_offload,random", "--seeds", "0,1"],
            &["sweep_input_bits.csv", "sweep_input_bits_summary.csv"],
        ),
    ];
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let mut compared = 0;
    for (args, files) in runs {
        cli(a.path(), args)?;
        cli(b.path(), args)?;
        for f in files {
            let x = std::fs::read(a.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
            let y = std::fs::read(b.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
            if x != y {
                return Err(format!("{f} differs between runs"));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} files byte-identical across repeated runs"))
}

fn fmt_row(v: &[f64]) -> String {
    v.iter().map(|e| format!("{e:.4e}")).collect::<Vec<_>>().join(" ")
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let outcome = f();
    let took = started.elapsed().as_secs_f64();
    match &outcome {
        Ok(d) => println!("PASS criterion {id} ({name}) [{took:.1} s]: {d}"),
        Err(d) => println!("FAIL criterion {id} ({name}) [{took:.1} s]: {d}"),
    }
    outcome.is_ok()
}

fn main() -> ExitCode {
    let cfg = ExperimentConfig::default();
    let mut store = PolicyStore::new();
    let results = [
        report(1, "formula examples", formulas),
        report(2, "feasibility under random actions", feasibility),
        report(3, "gradient check", gradients),
        report(4, "learning beats random", learning),
        report(5, "oracle proximity", || oracle(&cfg)),
        report(6, "energy vs task size", || input_trend(&cfg, &mut store)),
        report(7, "energy vs element count", || elements_trend(&cfg, &mut store)),
        report(8, "trajectory length and return", || trajectory(&cfg, &store)),
        report(9, "CLI determinism", determinism),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
