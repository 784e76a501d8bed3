use starmec_core::compute::{local_energy, DeviceCompute};
use starmec_core::{StarMecEnv, SystemConfig};
use starmec_harness::config::{linspace, OracleSettings};
use starmec_harness::oracle::{oracle_instance, oracle_search, OracleGrid};
use starmec_harness::results::{summarize, ResultRow};
use starmec_harness::sweep::{evaluate, run_sweep};
use starmec_harness::{Axis, ExperimentConfig, HarnessError, PolicyStore, Scheme};

fn small_grid(sys: &SystemConfig) -> OracleGrid {
    let s = OracleSettings {
        lambda_levels: 5,
        power_levels: 3,
        beta_levels: 2,
        phase_levels: 4,
        displacements_m: vec![0.0],
        ..OracleSettings::default()
    };
    OracleGrid::from_settings(&s, sys.max_power_w)
}

fn instance(f: impl FnOnce(&mut SystemConfig)) -> SystemConfig {
    let mut base = SystemConfig::default();
    f(&mut base);
    oracle_instance(&base, 3)
}

#[test]
fn cheap_local_compute_keeps_everything_local() {
    let sys = instance(|s| {
        s.chip_coeff = 1e-40;
        s.deadline_range_s = [100.0, 100.0];
    });
    let res = oracle_search(&sys, 3, &small_grid(&sys)).unwrap();
    assert_eq!(res.argmin.lambda, 0.0);
    let mut env = StarMecEnv::new(sys.clone()).unwrap();
    env.reset(3);
    let dev = DeviceCompute {
        cpu_freq_hz: sys.cpu_freq_hz,
        chip_coeff: sys.chip_coeff,
        max_power_w: sys.max_power_w,
    };
    let want = local_energy(0.0, &env.state().tasks[0], &dev);
    assert!((res.min_energy_j - want).abs() <= 1e-12 * want, "{} vs {want}", res.min_energy_j);
}

#[test]
fn costly_local_compute_offloads_everything() {
    let sys = instance(|s| {
        s.chip_coeff = 1e-22;
        s.bandwidth_hz = 1e8;
        s.mec_capacity_cycles = 1e12;
    });
    let res = oracle_search(&sys, 3, &small_grid(&sys)).unwrap();
    assert_eq!(res.argmin.lambda, 1.0);
}

#[test]
fn impossible_deadline_has_no_feasible_point() {
    let sys = instance(|s| s.deadline_range_s = [1e-9, 1e-9]);
    let grid = small_grid(&sys);
    match oracle_search(&sys, 3, &grid) {
        Err(HarnessError::NoFeasiblePoint { evaluated }) => assert_eq!(evaluated as u128, grid.size(3)),
        other => panic!("expected no feasible point, got {other:?}"),
    }
}

#[test]
fn oracle_rejects_multi_slot_instances() {
    let sys = SystemConfig::default();
    assert!(matches!(oracle_search(&sys, 0, &small_grid(&sys)), Err(HarnessError::Oracle(_))));
}

#[test]
fn oracle_rejects_oversized_grids() {
    let sys = instance(|_| {});
    let s = OracleSettings {
        phase_levels: 4000,
        ..OracleSettings::default()
    };
    let grid = OracleGrid::from_settings(&s, sys.max_power_w);
    assert!(matches!(oracle_search(&sys, 0, &grid), Err(HarnessError::Oracle(_))));
}

fn tiny_cfg() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.system.num_devices = 2;
    cfg.system.reflection_devices = 1;
    cfg.system.elements = 4;
    cfg.system.slots = 5;
    cfg.sweep.seeds = vec![0, 1, 2];
    cfg.sweep.eval_episodes = 3;
    cfg.training.iterations = 2;
    cfg.training.episodes_per_iteration = 4;
    cfg.training.parallel_envs = 2;
    cfg
}

#[test]
fn sweep_rows_cover_every_cell_and_rederive_from_traces() {
    let cfg = tiny_cfg();
    let grid = linspace(0.05, 0.1, 3);
    let schemes = [Scheme::FixedTrajectory, Scheme::FullOffload, Scheme::LocalOnly];
    let rows = run_sweep(&cfg, Axis::InputBits, &grid, &schemes, &mut PolicyStore::new()).unwrap();
    assert_eq!(rows.len(), grid.len() * cfg.sweep.seeds.len() * schemes.len());
    for r in &rows {
        let scheme = Scheme::parse(&r.scheme).unwrap();
        let sys = Axis::InputBits.apply(&cfg.system, r.value).unwrap();
        let traces = evaluate(&sys, scheme, None, r.seed, cfg.sweep.eval_episodes).unwrap();
        assert_eq!(*r, ResultRow::from_traces(&r.scheme, "input_bits", r.value, r.seed, &traces));
        let parts = r.local_energy_j + r.offload_energy_j + r.flight_energy_j;
        assert!((r.total_energy_j - parts).abs() <= 1e-12 * parts.max(1e-300));
        for t in &traces {
            assert!(t.slots.iter().flat_map(|s| &s.input_bits).all(|b| *b == r.value * 1e6));
        }
    }
    let summary = summarize(&rows);
    assert_eq!(summary.len(), grid.len() * schemes.len());
    assert!(summary.iter().all(|s| s.seeds == 3));
}

#[test]
fn learned_policies_are_trained_once_per_key() {
    let cfg = tiny_cfg();
    let mut store = PolicyStore::new();
    let rows = run_sweep(&cfg, Axis::InputBits, &[0.05, 0.1], &[Scheme::StarPpo], &mut store).unwrap();
    assert_eq!(rows.len(), 2 * 3);
    assert_eq!(store.policies.len(), 3);
    let again = run_sweep(&cfg, Axis::InputBits, &[0.05, 0.1], &[Scheme::StarPpo], &mut store).unwrap();
    assert_eq!(store.policies.len(), 3);
    assert_eq!(rows, again);
}

#[test]
fn element_sweep_trains_per_element_count() {
    let cfg = tiny_cfg();
    let mut store = PolicyStore::new();
    let rows = run_sweep(&cfg, Axis::Elements, &[2.0, 4.0], &[Scheme::ConvPpo, Scheme::FullOffload], &mut store).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 3);
    assert_eq!(store.policies.len(), 2 * 3);
    assert!(run_sweep(&cfg, Axis::Elements, &[2.5], &[Scheme::FullOffload], &mut store).is_err());
}
