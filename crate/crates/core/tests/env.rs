use starmec_core::baselines::{run_episode, FixedTrajectory, FullOffload, LocalOnly, RandomPolicy};
use starmec_core::compute::total_energy;
use starmec_core::env::{observation_dim, piecewise_c, reward, RewardTerms};
use starmec_core::mobility::check_return_constraint;
use starmec_core::*;

fn env() -> StarMecEnv {
    StarMecEnv::new(SystemConfig::default()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn same_seed_gives_same_observation() {
    let mut a = env();
    let mut b = env();
    assert_eq!(a.reset(17), b.reset(17));
    assert_ne!(a.reset(17), a.reset(18));
}

#[test]
fn observation_length_for_default_config() {
    // 2*20*7 channel + 20 beta + 80 phase + 2 position + 18 task + 6 power + 6 snr + 1 slot
    let e = env();
    assert_eq!(observation_dim(e.config()), 413);
    assert_eq!(e.observe().len(), 413);

    let cfg = SystemConfig {
        gain_features: false,
        num_devices: 2,
        reflection_devices: 1,
        elements: 4,
        ..SystemConfig::default()
    };
    // 2*4*3 + 4 + 16 + 2 + 6 + 2 + 1
    assert_eq!(StarMecEnv::new(cfg).unwrap().observe().len(), 55);
}

#[test]
fn slot_fraction_after_reset() {
    let mut e = env();
    let obs = e.reset(3);
    assert_eq!(e.state().slot, 1);
    assert_eq!(*obs.as_slice().last().unwrap(), 1.0 / 20.0);
}

#[test]
fn zero_action_reward_is_local_energy_plus_revenue() {
    let mut e = env();
    e.reset(5);
    let cfg = e.config().clone();
    let k = cfg.num_devices as f64;
    for _ in 0..cfg.slots {
        let out = e.step(&ControlAction::hold(&cfg, 0.0)).unwrap();
        let slot = e.trace().slots.last().unwrap();
        let local: f64 = slot
            .input_bits
            .iter()
            .map(|b| cfg.chip_coeff * cfg.cpu_freq_hz.powi(2) * b * cfg.cycles_per_bit)
            .sum();
        let expected = -local / e.energy_scale() + (2.0 * k + 1.0) * 0.1;
        assert!(rel(out.reward, expected) < 1e-9, "{} vs {}", out.reward, expected);
        assert_eq!(out.info.energy.offload, 0.0);
        assert_eq!(out.info.energy.flight, 0.0);
    }
}

#[test]
fn speed_penalty_when_clamp_disabled() {
    let mut cfg = SystemConfig {
        clamp_speed: false,
        enforce_return: false,
        ..SystemConfig::default()
    };
    // keep the raw C(x) value visible
    cfg.reward.penalty_floor = 100.0;
    let mut hold = StarMecEnv::new(cfg.clone()).unwrap();
    let mut fast = StarMecEnv::new(cfg.clone()).unwrap();
    hold.reset(1);
    fast.reset(1);
    let r_hold = hold.step(&ControlAction::hold(&cfg, 0.0)).unwrap();
    let mut a = ControlAction::hold(&cfg, 0.0);
    a.displacement = [35.0, 0.0];
    let r_fast = fast.step(&a).unwrap();
    assert!(r_fast.info.violations.speed);
    assert_eq!(fast.state().position().x, 85.0);

    // 14 m/s flight energy and C(17.5 - 35) = -17.5 replacing G0.
    let flight = cfg.flight_coeff * 35.0 / 2.5;
    let expected = r_hold.reward - flight / hold.energy_scale() - 17.5 - 0.1;
    assert!(rel(r_fast.reward, expected) < 1e-9);
}

#[test]
fn done_only_at_last_slot_and_no_step_after() {
    let mut e = env();
    e.reset(0);
    let cfg = e.config().clone();
    for n in 1..=cfg.slots {
        let out = e.step(&ControlAction::hold(&cfg, 0.3)).unwrap();
        assert_eq!(out.done, n == cfg.slots);
    }
    assert!(matches!(e.step(&ControlAction::hold(&cfg, 0.3)), Err(SimError::EpisodeFinished)));
    assert!(e.trace().is_complete());
}

#[test]
fn nan_and_shape_errors() {
    let mut e = env();
    let cfg = e.config().clone();
    let mut a = ControlAction::hold(&cfg, 0.0);
    a.delta_phi_r[3] = f64::NAN;
    assert!(matches!(e.step(&a), Err(SimError::InvalidAction(_))));
    let mut b = ControlAction::hold(&cfg, 0.0);
    b.lambda.pop();
    assert!(matches!(e.step(&b), Err(SimError::DimensionMismatch { .. })));
    assert!(e.step_squashed(&[0.0; 3]).is_err());
}

#[test]
fn invalid_config_lists_fields() {
    let cfg = SystemConfig {
        max_speed_mps: -1.0,
        elements: 0,
        ..SystemConfig::default()
    };
    match StarMecEnv::new(cfg) {
        Err(SimError::InvalidConfig(fields)) => {
            assert!(fields.iter().any(|f| f.contains("max_speed_mps")));
            assert!(fields.iter().any(|f| f.contains("elements")));
        }
        other => panic!("expected config error, got {:?}", other.err()),
    }
}

#[test]
fn piecewise_c_examples() {
    assert_eq!(piecewise_c(5.0, 1.0), 1.0);
    assert_eq!(piecewise_c(0.0, 0.1), 0.1);
    assert_eq!(piecewise_c(-2.0, 0.1), -2.0);
}

#[test]
fn reward_examples() {
    let cfg = RewardConfig::default();
    let zero = EnergyBreakdown::default();
    let terms = RewardTerms {
        energy: &zero,
        deadlines: &[2.0, 2.0],
        completion: &[1.0, 1.0],
        capacity_usage: &[0.0, 0.0],
        mec_capacity: 1e10,
        displacement: 0.0,
        max_step: 17.5,
    };
    assert!((reward(&terms, &cfg, 1.0) - 5.0 * 0.1).abs() < 1e-12);

    let late = RewardTerms {
        completion: &[2.1, 1.0],
        ..terms.clone()
    };
    // one deadline term drops from G0 to -0.1
    assert!((reward(&late, &cfg, 1.0) - (4.0 * 0.1 - 0.1)).abs() < 1e-12);
}

#[test]
fn conventional_mode_forces_one_hot_amplitudes() {
    let cfg = starmec_core::baselines::conventional_ris_mode(&SystemConfig::default());
    let mut e = StarMecEnv::new(cfg.clone()).unwrap();
    assert_eq!(e.action_space().dim(), 2 * 6 + 2 + 2 * 20);
    e.reset(2);
    for n in 1..=4 {
        assert!(e.state().coeffs.beta_r.iter().all(|&b| b == if n % 2 == 1 { 1.0 } else { 0.0 }));
        e.step(&ControlAction::hold(&cfg, 0.5)).unwrap();
        let slot = e.trace().slots.last().unwrap();
        let served = if n % 2 == 1 { Region::Reflection } else { Region::Transmission };
        assert_eq!(slot.served_region, Some(served));
        // devices on the dark side fall back to local execution
        for (k, r) in e.regions().iter().enumerate() {
            if *r != served {
                assert_eq!(slot.lambda_executed[k], 0.0);
                assert_eq!(slot.rate_bps[k], 0.0);
            }
        }
    }
}

#[test]
fn full_offload_has_no_local_energy() {
    let mut e = env();
    let t = run_episode(&mut e, &mut FullOffload, 4).unwrap();
    assert!(t.slots.iter().all(|s| s.lambda.iter().all(|&l| l == 1.0)));
    let total = total_energy(&t);
    assert_eq!(total.local, 0.0);
    assert!(total.offload > 0.0);
}

#[test]
fn local_only_total_is_sum_of_local_energy() {
    let mut e = env();
    let t = run_episode(&mut e, &mut LocalOnly, 9).unwrap();
    let cfg = e.config();
    let expected: f64 = t
        .slots
        .iter()
        .flat_map(|s| s.input_bits.iter())
        .map(|b| cfg.chip_coeff * cfg.cpu_freq_hz.powi(2) * b * cfg.cycles_per_bit)
        .sum();
    let total = total_energy(&t);
    assert!(rel(total.total, expected) < 1e-12);
    assert_eq!(total.local, total.total);
}

#[test]
fn fixed_trajectory_respects_speed_and_returns() {
    let mut e = env();
    let t = run_episode(&mut e, &mut FixedTrajectory::new(), 0).unwrap();
    let step = 7.0 * 2.5;
    assert!(t.slots.iter().all(|s| s.displacement_m <= step + 1e-9));
    assert!(check_return_constraint(&t, 1.0).unwrap());
    assert!(t.path_length() > 0.0);
    let s = &t.slots[0];
    assert_eq!(s.lambda, vec![0.5; 6]);
    assert!(s.power_w.iter().all(|p| (p - 0.1).abs() < 1e-12));
    assert!(s.beta_r.iter().all(|b| (b - 0.5).abs() < 1e-12));
}

#[test]
fn random_policy_returns_home() {
    let mut e = env();
    for seed in 0..5 {
        let t = run_episode(&mut e, &mut RandomPolicy::new(seed), seed).unwrap();
        assert!(t.return_distance() < 1e-9, "{}", t.return_distance());
    }
}

#[test]
fn hadamard_mode_cannot_move_zero_coordinate() {
    let cfg = SystemConfig {
        action_update: ActionUpdateMode::Hadamard,
        ..SystemConfig::default()
    };
    let mut e = StarMecEnv::new(cfg.clone()).unwrap();
    let mut a = ControlAction::hold(&cfg, 0.0);
    a.displacement = [0.1, 0.5];
    e.step(&a).unwrap();
    let q = e.state().position();
    assert!((q.x - 50.0 * 0.1f64.exp()).abs() < 1e-9);
    assert_eq!(q.y, 0.0);
}

#[test]
fn trace_round_trips_through_jsonl() {
    let mut e = env();
    let t = run_episode(&mut e, &mut RandomPolicy::new(3), 3).unwrap();
    let mut buf = Vec::new();
    t.write_jsonl(&mut buf).unwrap();
    t.write_jsonl(&mut buf).unwrap();
    let back = EpisodeTrace::read_jsonl(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[0], t);
}

#[test]
fn task_draws_do_not_depend_on_element_count() {
    let mut small = StarMecEnv::new(SystemConfig {
        elements: 10,
        ..SystemConfig::default()
    })
    .unwrap();
    let mut large = StarMecEnv::new(SystemConfig {
        elements: 40,
        ..SystemConfig::default()
    })
    .unwrap();
    let a = run_episode(&mut small, &mut LocalOnly, 8).unwrap();
    let b = run_episode(&mut large, &mut LocalOnly, 8).unwrap();
    for (x, y) in a.slots.iter().zip(&b.slots) {
        assert_eq!(x.input_bits, y.input_bits);
        assert_eq!(x.deadline_s, y.deadline_s);
    }
}

#[test]
fn upload_longer_than_a_slot_runs_locally() {
    let cfg = SystemConfig {
        bandwidth_hz: 1.0,
        ..SystemConfig::default()
    };
    let mut e = StarMecEnv::new(cfg.clone()).unwrap();
    e.reset(4);
    let out = e.step(&ControlAction::hold(&cfg, 1.0)).unwrap();
    let slot = e.trace().slots.last().unwrap();
    assert_eq!(out.info.violations.link_fallback, cfg.num_devices);
    assert!(slot.lambda_executed.iter().all(|l| *l == 0.0));
    assert_eq!(out.info.energy.offload, 0.0);
    assert!(out.info.energy.local > 0.0);
}

#[test]
fn fast_upload_is_not_a_fallback() {
    let cfg = SystemConfig::default();
    let mut e = StarMecEnv::new(cfg.clone()).unwrap();
    e.reset(4);
    let out = e.step(&ControlAction::hold(&cfg, 0.01)).unwrap();
    let slot = e.trace().slots.last().unwrap();
    assert!(slot.rate_bps.iter().all(|r| 0.01 * 1e5 / r < cfg.slot_duration()));
    assert_eq!(out.info.violations.link_fallback, 0);
    assert_eq!(slot.lambda_executed, vec![0.01; cfg.num_devices]);
}
