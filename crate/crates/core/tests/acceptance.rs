//! Acceptance gate: one PASS/FAIL line per criterion.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;

use qcartpole::agents::{ActionSelection, Backend};
use qcartpole::dynamics::EnvConfig;
use qcartpole::experiments::analysis::{column_min_mean, compare_spreads, monotonicity_violations};
use qcartpole::experiments::baseline::{run_baseline, BaselineReport};
use qcartpole::experiments::config::{BaselineConfig, SweepConfig, Variant};
use qcartpole::experiments::latency::{latency_report, reference_rates};
use qcartpole::experiments::sweep::{eval_matrices, train_agents};
use qcartpole::hardware::compile_to_prx;
use qcartpole::neural::Mlp;
use qcartpole::quantum::{
    estimate_z, expectation_z, parameter_shift_grad, sample_counts_for_expectation, CircuitInput, Evaluator,
    NoiseParams,
};
use qcartpole::training::{
    compute_returns, load_checkpoint, run_episode, save_checkpoint, AgentKind, Checkpoint, CheckpointMeta, RngStreams,
    TrainConfig,
};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn fmt_mean(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |m| format!("{m:.1}"))
}

fn sample_efficiency(report: &BaselineReport) -> Verdict {
    let classical = report.variant(Variant::Classical).unwrap();
    let hybrid = report.variant(Variant::HybridAnalytic).unwrap();
    let n = hybrid.runs.len();
    let (Some(h), Some(c)) = (hybrid.mean, classical.mean) else {
        return Verdict::new(false, "a variant never solved");
    };
    let pass = h <= 0.7 * c && hybrid.solved * 10 >= 8 * n && (50.0..=350.0).contains(&h);
    Verdict::new(
        pass,
        format!(
            "hybrid-analytic {}/{n} solved, mean {h:.1}; classical {}/{} solved, mean {c:.1}; ratio {:.2} (<= 0.70)",
            hybrid.solved,
            classical.solved,
            classical.runs.len(),
            h / c
        ),
    )
}

fn shift_rule_robustness(report: &BaselineReport) -> Verdict {
    let classical = report.variant(Variant::Classical).unwrap();
    let shot = report.variant(Variant::HybridShot).unwrap();
    let n = shot.runs.len();
    let below = matches!((shot.mean, classical.mean), (Some(s), Some(c)) if s < c);
    Verdict::new(
        shot.solved * 10 >= 7 * n && below,
        format!(
            "hybrid-shot (1024 shots) {}/{n} solved, mean {} vs classical {}",
            shot.solved,
            fmt_mean(shot.mean),
            fmt_mean(classical.mean)
        ),
    )
}

fn compatibility(matrices: &[qcartpole::experiments::matrix::DurationMatrix]) -> (Verdict, Verdict) {
    let floors: Vec<(u64, Option<f64>)> = matrices.iter().map(|m| (m.shots, column_min_mean(m, 100.0))).collect();
    let a = floors.iter().all(|(_, f)| f.is_some_and(|f| f >= 9.0));
    let violations: Vec<_> = matrices.iter().flat_map(monotonicity_violations).collect();
    let b = violations.is_empty();
    let at33 = |shots: u64| {
        matrices
            .iter()
            .find(|m| m.shots == shots)
            .and_then(|m| m.index_of_inference(33.0).and_then(|j| m.pooled_inference_column(j)))
            .map(|c| c.mean_s)
    };
    let (lo, hi) = (at33(128), at33(1024));
    let c = matches!((lo, hi), (Some(lo), Some(hi)) if hi >= lo);
    let floor_text: Vec<String> = floors
        .iter()
        .map(|(s, f)| format!("{s}:{}", f.map_or("n/a".into(), |f| format!("{f:.2}"))))
        .collect();
    let worst = violations
        .iter()
        .max_by(|x, y| (x.drop_s - x.pooled_se_s).total_cmp(&(y.drop_s - y.pooled_se_s)))
        .map_or("none".into(), |v| {
            format!(
                "{} shots, train {} Hz, {} -> {} Hz drop {:.2} s > se {:.2}",
                v.shots, v.train_freq, v.lower_inf, v.higher_inf, v.drop_s, v.pooled_se_s
            )
        });
    let trends = Verdict::new(
        a && b && c,
        format!(
            "(a) {} min 100 Hz-column mean by shots [{}] (>= 9.0); (b) {} {} monotonicity violations, worst: {worst}; (c) {} 33 Hz pooled mean 128 shots {} vs 1024 shots {}",
            if a { "ok" } else { "FAIL" },
            floor_text.join(", "),
            if b { "ok" } else { "FAIL" },
            violations.len(),
            if c { "ok" } else { "FAIL" },
            fmt_mean(lo),
            fmt_mean(hi)
        ),
    );

    let spreads: Vec<_> = matrices.iter().filter_map(compare_spreads).collect();
    let insensitive = spreads.len() == matrices.len() && spreads.iter().all(|s| s.train_freq_insensitive());
    let text: Vec<String> = spreads
        .iter()
        .map(|s| {
            format!(
                "{}: col {:.2} vs row {:.2}",
                s.shots, s.max_column_spread_s, s.min_row_spread_s
            )
        })
        .collect();
    (
        trends,
        Verdict::new(
            insensitive,
            format!(
                "max column spread < min row spread per shot count [{}]",
                text.join("; ")
            ),
        ),
    )
}

fn latency_model() -> Verdict {
    let report = latency_report(&reference_rates(), None).expect("reference fit");
    let worst = report.rows.iter().map(|r| r.low_level_rel_error()).fold(0.0, f64::max);
    let speedups: Vec<String> = report.rows.iter().map(|r| format!("{:.1}", r.speedup)).collect();
    let expected = ["43.3", "39.3", "30.1", "18.8"];
    let per_shot = report.model.low_level.per_shot_s();
    let floor = report.low_level_floor_s;
    Verdict::new(
        worst < 0.10 && speedups == expected && per_shot > floor,
        format!(
            "low-level max rel err {:.1}% (< 10%); speedups [{}]; per-shot {:.2} us > floor {:.2} us",
            worst * 100.0,
            speedups.join(", "),
            per_shot * 1e6,
            floor * 1e6
        ),
    )
}

fn quantum_kernel() -> Verdict {
    let mut rng = common::rng(2024);
    let mut input = || {
        CircuitInput::new(
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            rng.random_range(-2.0 * PI..2.0 * PI),
        )
    };
    let inputs: Vec<CircuitInput> = (0..10_000).map(|_| input()).collect();
    let closed = inputs
        .iter()
        .map(|x| (expectation_z(x) - common::circuit_z(x.angles.beta1, x.angles.beta2, x.angles.beta3, x.theta)).abs())
        .fold(0.0, f64::max);
    let prx = inputs
        .iter()
        .map(|x| {
            let b = x.angles;
            (common::pulses_z(compile_to_prx(x).pulses()) - common::circuit_z(b.beta1, b.beta2, b.beta3, x.theta)).abs()
        })
        .fold(0.0, f64::max);

    let mut rng = common::rng(7);
    let h = 1e-5;
    let shift = inputs
        .iter()
        .take(1000)
        .map(|x| {
            let g = parameter_shift_grad(x, &Evaluator::Analytic, &mut rng).unwrap();
            let fd =
                (expectation_z(&x.with_theta(x.theta + h)) - expectation_z(&x.with_theta(x.theta - h))) / (2.0 * h);
            (g - fd).abs()
        })
        .fold(0.0, f64::max);

    let n = 256;
    let reps = 4000;
    let sd_ratio = [-0.8, -0.3, 0.0, 0.5, 0.9]
        .iter()
        .map(|&z| {
            let est: Vec<f64> = (0..reps)
                .map(|_| estimate_z(&sample_counts_for_expectation(z, n, &NoiseParams::ideal(), &mut rng).unwrap()))
                .collect();
            let mean = est.iter().sum::<f64>() / reps as f64;
            let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
            (sd / ((1.0 - z * z) / n as f64).sqrt() - 1.0).abs()
        })
        .fold(0.0, f64::max);

    let noise = NoiseParams::emulated_device();
    let shots = 1_000_000;
    let affine_z = [-0.9, -0.2, 0.4, 1.0]
        .iter()
        .map(|&z| {
            let expected =
                (1.0 - noise.eps01 - noise.eps10) * (1.0 - noise.gate_depol).powi(3) * z + (noise.eps10 - noise.eps01);
            let est = estimate_z(&sample_counts_for_expectation(z, shots, &noise, &mut rng).unwrap());
            (est - expected).abs() / ((1.0 - expected * expected) / shots as f64).sqrt()
        })
        .fold(0.0, f64::max);
    let fidelity = (noise.eps01, noise.eps10) == (0.0295, 0.0615)
        && 1.0 - (noise.eps01 + noise.eps10) / 2.0 == 0.9545
        && noise.readout_fidelity() == 0.9545;

    Verdict::new(
        closed <= 1e-12 && shift <= 1e-6 && prx <= 1e-9 && sd_ratio < 0.2 && affine_z <= 3.0 && fidelity,
        format!(
            "closed form {closed:.1e}; shift vs fd {shift:.1e}; prx {prx:.1e}; shot sd dev {:.1}%; affine law {affine_z:.2} se; fidelity {}",
            sd_ratio * 100.0,
            noise.readout_fidelity()
        ),
    )
}

fn learning_stack() -> Verdict {
    let mut rng = common::rng(99);
    // Network backward against finite differences.
    let net = Mlp::uniform(&[3, 128, 256, 2], &mut rng);
    let x = [0.3, -0.05, 0.8];
    let c = [0.7, -1.3];
    let (_, cache) = net.forward(&x).unwrap();
    let grads = net.backward(&cache, &c).unwrap().flat_params();
    let params = net.flat_params();
    let idx: Vec<usize> = (0..400).map(|_| rng.random_range(0..params.len())).collect();
    let fd = common::finite_diff_at(&params, &idx, 1e-5, |p| {
        let mut n = net.clone();
        n.set_flat_params(p).unwrap();
        let (out, _) = n.forward(&x).unwrap();
        out[0] * c[0] + out[1] * c[1]
    });
    let picked: Vec<f64> = idx.iter().map(|&i| grads[i]).collect();
    let net_err = common::max_rel_err(&picked, &fd, 1e-6);

    // Whole-episode loss of a hybrid agent, every scalar including both angles.
    let agent = AgentKind::Hybrid.init(17);
    let env = EnvConfig::with_duration(25.0, 0.6).unwrap();
    let traj = run_episode(
        &agent,
        &env,
        &Backend::Analytic,
        ActionSelection::Sample,
        &mut RngStreams::new(17),
    )
    .unwrap();
    let returns = compute_returns(&traj.rewards(), &traj.dones(), 0.99, 2.0).unwrap();
    let g = agent
        .episode_gradients(&traj.transitions, &returns, &Backend::Analytic, 1.0, &mut rng)
        .unwrap();
    let fa = common::finite_diff(&agent.actor_params(), 1e-6, |p| {
        let mut a = agent.clone();
        a.set_actor_params(p).unwrap();
        common::episode_loss(&a, &traj.transitions, &returns, 1.0).0
    });
    let fc = common::finite_diff(&agent.critic_params(), 1e-6, |p| {
        let mut a = agent.clone();
        a.set_critic_params(p).unwrap();
        common::episode_loss(&a, &traj.transitions, &returns, 1.0).1
    });
    let e2e_err = common::max_rel_err(&g.actor, &fa, 1e-5).max(common::max_rel_err(&g.critic, &fc, 1e-5));

    let returns_err = (0..200)
        .map(|i| {
            let t = rng.random_range(1..400);
            let rewards: Vec<f64> = (0..t).map(|_| if rng.random_bool(0.8) { 1.0 } else { 0.0 }).collect();
            let mut dones = vec![false; t];
            dones[t - 1] = i % 2 == 0;
            let gamma = rng.random_range(0.0..0.999);
            let boot = rng.random_range(-10.0..10.0);
            let got = compute_returns(&rewards, &dones, gamma, boot).unwrap();
            let want = common::direct_returns(&rewards, &dones, gamma, boot);
            got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);

    let dir = tempfile::tempdir().unwrap();
    let round_trip = [AgentKind::Classical, AgentKind::Hybrid].iter().all(|&kind| {
        let ckpt = Checkpoint {
            meta: CheckpointMeta::from_config(&TrainConfig::default(), 0, None),
            agent: kind.init(5),
        };
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        let bits = |c: &Checkpoint| {
            c.agent
                .actor_params()
                .into_iter()
                .chain(c.agent.critic_params())
                .map(f64::to_bits)
                .collect::<Vec<_>>()
        };
        bits(&back) == bits(&ckpt)
    });

    Verdict::new(
        net_err < 1e-5 && e2e_err < 1e-4 && returns_err <= 1e-10 && round_trip,
        format!(
            "network rel err {net_err:.1e}; episode loss rel err {e2e_err:.1e} over {} steps; returns {returns_err:.1e}; checkpoint bit-exact {round_trip}",
            traj.len()
        ),
    )
}

fn main() -> ExitCode {
    let started = std::time::Instant::now();
    let baseline = run_baseline(&BaselineConfig::default(), None).expect("baseline ensemble");
    let sweep_config = SweepConfig::default();
    let agents = train_agents(&sweep_config).expect("sweep training");
    let matrices = eval_matrices(&sweep_config, &agents).expect("sweep evaluation");
    let (trends, insensitivity) = compatibility(&matrices);

    let verdicts = [
        ("1 sample-efficiency ordering", sample_efficiency(&baseline)),
        ("2 parameter-shift robustness", shift_rule_robustness(&baseline)),
        ("3 compatibility trends", trends),
        ("4 train-frequency insensitivity", insensitivity),
        ("5 latency model", latency_model()),
        ("6 quantum kernel properties", quantum_kernel()),
        ("7 learning-stack properties", learning_stack()),
    ];
    for (name, v) in &verdicts {
        println!("[{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let passed = verdicts.iter().filter(|(_, v)| v.pass).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.0}s",
        verdicts.len(),
        started.elapsed().as_secs_f64()
    );
    if passed == verdicts.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
