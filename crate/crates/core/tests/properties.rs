mod common;

use proptest::prelude::*;

use qcartpole::agents::{ActionSelection, Agent, Backend};
use qcartpole::dynamics::{Action, CartState, EnvConfig, PhysicsParams, ReducedState};
use qcartpole::neural::softmax_logprob;
use qcartpole::quantum::NoiseParams;
use qcartpole::training::{check_success, compute_returns, AgentKind, Checkpoint, CheckpointMeta, TrainConfig};

fn state() -> impl Strategy<Value = CartState> {
    (-2.4..2.4f64, -3.0..3.0f64, -0.4..0.4f64, -3.0..3.0f64).prop_map(|(x, v, p, w)| CartState::new(x, v, p, w))
}

proptest! {
    #[test]
    fn dynamics_are_mirror_symmetric(s in state(), right in any::<bool>(), freq in prop::sample::select(vec![20.0, 25.0, 33.0, 50.0, 100.0])) {
        let physics = PhysicsParams::default();
        let action = if right { Action::Right } else { Action::Left };
        let dt = 1.0 / freq;
        let a = physics.integrate(&s, action, dt);
        let b = physics.integrate(&-s, action.mirrored(), dt);
        prop_assert!((a.x + b.x).abs() < 1e-12);
        prop_assert!((a.x_dot + b.x_dot).abs() < 1e-12);
        prop_assert!((a.phi + b.phi).abs() < 1e-12);
        prop_assert!((a.phi_dot + b.phi_dot).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_a_distribution(l0 in -50.0..50.0f64, l1 in -50.0..50.0f64, a in 0usize..2) {
        let (p, logp) = softmax_logprob(&[l0, l1], a);
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&q| (0.0..=1.0).contains(&q)));
        prop_assert!((logp - p[a].ln()).abs() < 1e-9 || p[a] == 0.0);
        let (shifted, _) = softmax_logprob(&[l0 + 7.0, l1 + 7.0], a);
        prop_assert!((shifted[0] - p[0]).abs() < 1e-12);
    }

    #[test]
    fn returns_match_direct_sum(
        rewards in prop::collection::vec(prop::sample::select(vec![0.0, 1.0]), 1..300),
        gamma in 0.0..0.999f64,
        bootstrap in -20.0..20.0f64,
        terminated in any::<bool>(),
    ) {
        let mut dones = vec![false; rewards.len()];
        *dones.last_mut().unwrap() = terminated;
        let got = compute_returns(&rewards, &dones, gamma, bootstrap).unwrap();
        let want = common::direct_returns(&rewards, &dones, gamma, bootstrap);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-10);
        }
        if terminated {
            let other = compute_returns(&rewards, &dones, gamma, bootstrap + 100.0).unwrap();
            prop_assert_eq!(got, other);
        }
    }

    #[test]
    fn success_needs_a_full_window(n in 0usize..250, hit in any::<bool>()) {
        let returns = vec![if hit { 500.0 } else { 499.0 }; n];
        prop_assert_eq!(check_success(&returns, 100, 500.0), hit && n >= 100);
    }

    #[test]
    fn policy_is_valid_under_noise(
        seed in 0u64..1000,
        v in -5.0..5.0f64, p in -0.4..0.4f64, w in -5.0..5.0f64,
        shots in 1u64..64,
    ) {
        let agent = AgentKind::Hybrid.init(seed);
        let backend = Backend::SampledNoisy { shots, noise: NoiseParams::emulated_device() };
        let out = agent.forward(&ReducedState { x_dot: v, phi: p, phi_dot: w }, &backend, &mut common::rng(seed)).unwrap();
        prop_assert!((out.action_probs[0] + out.action_probs[1] - 1.0).abs() < 1e-12);
        prop_assert!(out.action_probs.iter().all(|q| q.is_finite() && *q >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>(), hybrid in any::<bool>()) {
        let kind = if hybrid { AgentKind::Hybrid } else { AgentKind::Classical };
        let ckpt = Checkpoint {
            meta: CheckpointMeta::from_config(&TrainConfig { seed, ..TrainConfig::default() }, 7, Some(3)),
            agent: kind.init(seed),
        };
        let back = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap();
        let bits = |a: &Agent| a.actor_params().into_iter().chain(a.critic_params()).map(f64::to_bits).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.agent), bits(&ckpt.agent));
        prop_assert_eq!(back, ckpt);
    }
}

#[test]
fn sampled_probabilities_converge_to_analytic() {
    let agent = AgentKind::Hybrid.init(9);
    let mut rng = common::rng(9);
    let obs = ReducedState {
        x_dot: 0.3,
        phi: -0.05,
        phi_dot: 0.8,
    };
    let exact = agent.forward(&obs, &Backend::Analytic, &mut rng).unwrap().action_probs;
    for _ in 0..20 {
        let sampled = agent
            .forward(&obs, &Backend::Sampled { shots: 100_000 }, &mut rng)
            .unwrap()
            .action_probs;
        assert!((sampled[0] - exact[0]).abs() < 0.02);
    }
}

#[test]
fn episode_accounting() {
    // Returns count in-band steps; durations are steps / f.
    for freq in [20.0, 50.0, 100.0] {
        let env = EnvConfig::new(freq).unwrap();
        let agent = AgentKind::Hybrid.init(3);
        let mut streams = qcartpole::training::RngStreams::new(3);
        let traj =
            qcartpole::training::run_episode(&agent, &env, &Backend::Analytic, ActionSelection::Sample, &mut streams)
                .unwrap();
        assert!(traj.len() <= env.max_steps());
        assert!(traj.episode_return() <= traj.len() as f64);
        assert_eq!(
            traj.dones().iter().filter(|&&d| d).count(),
            usize::from(!traj.truncated)
        );
        assert_eq!(traj.episode_return(), traj.rewards().iter().sum::<f64>());
    }
}
