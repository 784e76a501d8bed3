use ndarray::Array2;
use starmec_agent::buffer::RolloutBuffer;
use starmec_agent::checkpoint;
use starmec_agent::ppo::{actor_loss_and_grads, critic_loss_and_grads};
use starmec_agent::train::{derive_seed, Trainer};
use starmec_agent::*;
use starmec_core::baselines::Controller;
use starmec_core::{StarMecEnv, SystemConfig};

fn tiny() -> SystemConfig {
    SystemConfig {
        num_devices: 2,
        reflection_devices: 1,
        elements: 4,
        slots: 5,
        ..SystemConfig::default()
    }
}

fn small_train(seed: u64, iterations: usize) -> TrainConfig {
    TrainConfig {
        iterations,
        episodes_per_iteration: 8,
        parallel_envs: 4,
        seed,
        episode_seed: None,
        ppo: PpoConfig {
            hidden: vec![32, 32],
            ..PpoConfig::default()
        },
    }
}

fn collected(seed: u64) -> (Trainer, RolloutBuffer) {
    let mut t = Trainer::new(&tiny(), small_train(seed, 1)).unwrap();
    let (mut buf, _, _) = t.collect().unwrap();
    buf.compute_returns_and_advantages(0.99, 0.95, 0.0, true).unwrap();
    (t, buf)
}

fn batch(buf: &RolloutBuffer) -> (Array2<f64>, Array2<f64>) {
    let obs = Array2::from_shape_vec((buf.len(), buf.obs_dim), buf.obs.clone()).unwrap();
    let act = Array2::from_shape_vec((buf.len(), buf.act_dim), buf.raw_actions.clone()).unwrap();
    (obs, act)
}

#[test]
fn first_pass_ratios_are_one() {
    for seed in 0..3 {
        let (mut t, buf) = collected(seed);
        let stats = t.agent.update(&buf, 0).unwrap();
        assert!(stats.first_ratio_deviation < 1e-6, "{}", stats.first_ratio_deviation);
        assert!((0.0..=1.0).contains(&stats.clip_fraction));
    }
}

#[test]
fn normalized_advantages_are_standardized() {
    let (_, buf) = collected(4);
    let n = buf.len() as f64;
    let mean = buf.advantages.iter().sum::<f64>() / n;
    let var = buf.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 1e-6);
    assert!((var - 1.0).abs() < 1e-6);
}

#[test]
fn zero_advantages_give_no_actor_gradient() {
    let (t, buf) = collected(5);
    let (obs, act) = batch(&buf);
    let cfg = PpoConfig {
        entropy_coef: 0.0,
        ..t.agent.cfg.clone()
    };
    let zeros = vec![0.0; buf.len()];
    let (_, g) = actor_loss_and_grads(&t.agent.params, obs.view(), act.view(), &buf.log_probs, &zeros, &cfg).unwrap();
    assert!(g.norm() < 1e-8);
}

#[test]
fn one_update_lowers_critic_loss() {
    let (t, buf) = collected(6);
    let (obs, _) = batch(&buf);
    let cfg = PpoConfig {
        critic_lr: 1e-4,
        actor_lr: 1e-4,
        epochs: 1,
        minibatch: buf.len(),
        hidden: vec![32, 32],
        ..PpoConfig::default()
    };
    let mut agent = PpoAgent::from_params(t.agent.params.clone(), cfg, 1);
    let (before, _) = critic_loss_and_grads(&agent.params, obs.view(), &buf.returns).unwrap();
    agent.update(&buf, 0).unwrap();
    let (after, _) = critic_loss_and_grads(&agent.params, obs.view(), &buf.returns).unwrap();
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn update_rejects_unprepared_buffers() {
    let mut agent = PpoAgent::new(3, 2, PpoConfig::default(), 0).unwrap();
    let mut buf = RolloutBuffer::new(3, 2);
    assert!(matches!(agent.update(&buf, 0), Err(AgentError::EmptyBuffer)));
    buf.push(&[0.0; 3], &[0.0; 2], 0.0, 1.0, 0.0, true).unwrap();
    assert!(matches!(agent.update(&buf, 0), Err(AgentError::MissingAdvantages)));
}

#[test]
fn non_finite_data_aborts_the_update() {
    let mut agent = PpoAgent::new(3, 2, PpoConfig::default(), 0).unwrap();
    let mut buf = RolloutBuffer::new(3, 2);
    buf.push(&[f64::NAN, 0.0, 0.0], &[0.0; 2], 0.0, 1.0, 0.0, true).unwrap();
    buf.push(&[0.0; 3], &[0.0; 2], 0.0, 2.0, 0.0, true).unwrap();
    buf.compute_returns_and_advantages(0.99, 0.95, 0.0, true).unwrap();
    let err = agent.update(&buf, 7).unwrap_err();
    assert!(matches!(err, AgentError::NonFinite { iteration: 7, .. }), "{err}");
}

#[test]
fn zero_iterations_return_initial_parameters() {
    let cfg = small_train(11, 0);
    let out = train(&tiny(), &cfg).unwrap();
    assert!(out.curve.rows.is_empty());
    let env = StarMecEnv::new(tiny()).unwrap();
    let fresh = PpoAgent::new(env.observation_dim(), env.action_space().dim(), cfg.ppo.clone(), derive_seed(11, 1)).unwrap();
    assert_eq!(out.agent.params, fresh.params);
}

#[test]
fn same_seed_same_curve() {
    let a = train(&tiny(), &small_train(3, 4)).unwrap();
    let b = train(&tiny(), &small_train(3, 4)).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.agent.params, b.agent.params);
    let c = train(&tiny(), &small_train(4, 4)).unwrap();
    assert_ne!(a.curve, c.curve);
    let mut csv = Vec::new();
    a.curve.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), LearningCurve::HEADER);
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let out = train(&tiny(), &small_train(2, 2)).unwrap();
    let dir = std::env::temp_dir().join(format!("starmec-ckpt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("policy.txt");
    checkpoint::save_file(&out.agent.params, &path).unwrap();
    let back = checkpoint::load_file(&path).unwrap();
    assert_eq!(back, out.agent.params);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn checkpoint_rejects_corruption() {
    let agent = PpoAgent::new(3, 2, PpoConfig::default(), 0).unwrap();
    let mut bytes = Vec::new();
    checkpoint::save(&agent.params, &mut bytes).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    assert!(checkpoint::load(text.replacen("starmec-ppo-checkpoint", "other", 1).as_bytes()).is_err());
    let truncated: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
    assert!(matches!(checkpoint::load(truncated.as_bytes()), Err(AgentError::Checkpoint(_))));
}

#[test]
fn output_bias_moves_the_greedy_action() {
    let mut env = StarMecEnv::new(tiny()).unwrap();
    let agent = PpoAgent::new(env.observation_dim(), env.action_space().dim(), PpoConfig::default(), 0).unwrap();
    let obs = env.reset(1);
    let mut ctl = PpoController::new(agent.params.clone(), &env, "ppo").unwrap();
    let before = ctl.squashed_action(&obs);
    ctl.params.actor.layers.last_mut().unwrap().b[0] += 1.0;
    let after = ctl.squashed_action(&obs);
    assert!(after[0] > before[0]);
    assert_eq!(after[1..], before[1..]);
    let lam = ctl.act(&env, &obs).lambda[0];
    assert!((lam - (after[0] + 1.0) / 2.0).abs() < 1e-12);
}

#[test]
fn controller_rejects_mismatched_policy() {
    let env = StarMecEnv::new(tiny()).unwrap();
    let agent = PpoAgent::new(env.observation_dim() + 1, env.action_space().dim(), PpoConfig::default(), 0).unwrap();
    assert!(PpoController::new(agent.params, &env, "ppo").is_err());
}
