//! Named verification suites behind the `verify` CLI subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CheckReport;
use crate::gridworld::{self, Action};
use crate::mapper::{self, MapInput, MappingParams};
use crate::policy::{self, Activation, PolicyParams, PolicyTopology};
use crate::qsim::{self, QuantumParams};
use crate::qtgen::{self, GlobalModel, GradMethod};
use crate::trainer::{self, GradOptions, Trajectory, TrajectoryStep};

/// Dense-oracle equivalence and norm drift, n ≤ 4, 50 seeded circuits.
pub fn oracle_suite() -> Vec<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a5e);
    let mut max_amp_err: f64 = 0.0;
    let mut max_norm_drift: f64 = 0.0;
    for case in 0..50 {
        let n = 1 + (case % 4);
        let blocks = 1 + (case % 3);
        let params = QuantumParams::random(n, blocks, &mut rng);
        let fast = qsim::run_ansatz(&params);
        let dense = super::dense_ansatz_state(&params);
        for (a, b) in fast.amplitudes().iter().zip(dense.iter()) {
            max_amp_err = max_amp_err.max((a - b).norm());
        }
        max_norm_drift = max_norm_drift.max((fast.norm_sqr() - 1.0).abs());
    }
    vec![
        CheckReport::new(
            "qsim/dense-oracle amplitudes (n<=4, 50 cases)",
            max_amp_err,
            1e-10,
        ),
        CheckReport::new("qsim/statevector norm drift", max_norm_drift, 1e-12),
    ]
}

/// Shift-rule gradients against central finite differences for n ≤ 6,
/// L ≤ 3, over at least 20 seeded draws, plus adjoint/shift agreement.
pub fn qsim_gradient_suite() -> Vec<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51f7);
    let mut max_fd_err: f64 = 0.0;
    let mut max_adjoint_err: f64 = 0.0;
    let mut draws = 0;
    for n in 1..=6usize {
        for blocks in 1..=3usize {
            let reps = if n <= 3 { 2 } else { 1 };
            for _ in 0..reps {
                draws += 1;
                let params = QuantumParams::random(n, blocks, &mut rng);
                let weights: Vec<f64> =
                    (0..1usize << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let shift = qsim::weighted_prob_gradient(&params, &weights).unwrap();
                let adjoint = qsim::weighted_prob_gradient_adjoint(&params, &weights).unwrap();
                max_adjoint_err = max_adjoint_err.max(super::max_abs_diff(&shift, &adjoint));
                let fd = super::finite_difference(
                    &mut |angles| {
                        let p = QuantumParams::new(n, blocks, angles.to_vec()).unwrap();
                        let probs = qsim::probabilities(&qsim::run_ansatz(&p));
                        probs
                            .as_slice()
                            .iter()
                            .zip(&weights)
                            .map(|(p, w)| p * w)
                            .sum()
                    },
                    params.angles(),
                    1e-5,
                );
                max_fd_err = max_fd_err.max(super::max_abs_diff(&shift, &fd));
            }
        }
    }
    assert!(draws >= 20);
    vec![
        CheckReport::new(
            format!("qsim/shift rule vs finite differences ({draws} draws, n<=6)"),
            max_fd_err,
            1e-6,
        ),
        CheckReport::new("qsim/adjoint vs shift rule", max_adjoint_err, 1e-9),
    ]
}

/// Mapping-model backward pass against finite differences over ≥ 50 draws,
/// both the parameter gradient and the probability-input gradient.
pub fn mapper_suite() -> Vec<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3a99);
    let mut max_beta_err: f64 = 0.0;
    let mut max_prob_err: f64 = 0.0;
    let draws = 50;
    for _ in 0..draws {
        let n = rng.gen_range(2..=10usize);
        let beta = MappingParams::random(n + 1, &mut rng);
        let index = rng.gen_range(0..1usize << n.min(16));
        let prob: f64 = rng.gen_range(0.0..(1.0 / (1 << n) as f64) * 4.0);
        let upstream: f64 = rng.gen_range(-1.0..1.0);
        let input = MapInput::new(index, n, prob);
        let (grad_beta, grad_prob) = mapper::map_backward(&beta, &input, upstream).unwrap();

        let fd_beta = super::finite_difference(
            &mut |values| {
                let b = MappingParams::new(n + 1, values.to_vec()).unwrap();
                upstream * mapper::map_forward(&b, &input).unwrap()
            },
            beta.values(),
            1e-6,
        );
        max_beta_err = max_beta_err.max(super::max_rel_diff(&grad_beta, &fd_beta));

        let fd_prob = super::finite_difference(
            &mut |p| {
                let inp = MapInput::new(index, n, p[0]);
                upstream * mapper::map_forward(&beta, &inp).unwrap()
            },
            &[prob],
            1e-6,
        );
        max_prob_err = max_prob_err.max(super::max_rel_diff(&[grad_prob], &fd_prob));
    }
    vec![
        CheckReport::new(
            format!("mapper/parameter gradient vs finite differences ({draws} draws)"),
            max_beta_err,
            1e-6,
        ),
        CheckReport::new(
            format!("mapper/probability gradient vs finite differences ({draws} draws)"),
            max_prob_err,
            1e-6,
        ),
    ]
}

fn tiny_model(seed: u64, blocks: usize) -> GlobalModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topo = PolicyTopology {
        obs_dim: 1,
        hidden_dim: 2,
        actions: 2,
        activation: Activation::Tanh,
    };
    let n = qtgen::required_qubits(topo.param_count());
    let phi = QuantumParams::random(n, blocks, &mut rng);
    let beta = MappingParams::random(n + 1, &mut rng);
    GlobalModel::new(phi, beta, topo).unwrap()
}

/// Pull-back of policy-space gradients through the composed generator
/// against finite differences of Θ ↦ ⟨g, θ(Θ)⟩, for both gradient methods.
pub fn qtgen_suite() -> Vec<CheckReport> {
    let mut reports = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x97a1);
    for (seed, blocks) in [(1u64, 2usize), (2, 1), (3, 3)] {
        let model = tiny_model(seed, blocks);
        let grad_theta: Vec<f64> = (0..model.k()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fd = super::finite_difference(
            &mut |x| {
                let mut m = model.clone();
                m.set_flat_params(x).unwrap();
                qtgen::generate_theta(&m)
                    .iter()
                    .zip(&grad_theta)
                    .map(|(t, g)| t * g)
                    .sum()
            },
            &model.flat_params(),
            1e-5,
        );
        for method in [GradMethod::Shift, GradMethod::Adjoint] {
            let grad = qtgen::pullback_gradient(&model, &grad_theta, method).unwrap();
            let mut flat = grad.phi.clone();
            flat.extend_from_slice(&grad.beta);
            reports.push(CheckReport::new(
                format!("qtgen/composed Jacobian vs finite differences ({method:?}, L={blocks})"),
                super::max_abs_diff(&flat, &fd),
                1e-5,
            ));
        }
    }
    reports
}

/// Score-function gradient of the policy against finite differences, plus
/// the zero-mean score identity.
pub fn policy_suite() -> Vec<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x70a1);
    let topo = PolicyTopology {
        obs_dim: 6,
        hidden_dim: 4,
        actions: 3,
        activation: Activation::Tanh,
    };
    let mut max_fd_err: f64 = 0.0;
    let mut max_mean_err: f64 = 0.0;
    let draws = 20;
    for _ in 0..draws {
        let params = PolicyParams::random(topo, &mut rng);
        let obs: Vec<f64> = (0..topo.obs_dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        let action = rng.gen_range(0..topo.actions);
        let grad = policy::logpi_grad(&params, &obs, action).unwrap();
        let fd = super::finite_difference(
            &mut |theta| {
                let p = PolicyParams::new(topo, theta.to_vec()).unwrap();
                policy::log_prob(&p, &obs, action).unwrap()
            },
            params.theta(),
            1e-6,
        );
        max_fd_err = max_fd_err.max(super::max_rel_diff(&grad, &fd));

        let dist = policy::forward(&params, &obs).unwrap();
        let mut mean = vec![0.0; params.theta().len()];
        for a in 0..topo.actions {
            let g = policy::logpi_grad(&params, &obs, a).unwrap();
            for (m, gj) in mean.iter_mut().zip(&g) {
                *m += dist.probs()[a] * gj;
            }
        }
        max_mean_err = max_mean_err.max(mean.iter().fold(0.0f64, |acc, m| acc.max(m.abs())));
    }
    vec![
        CheckReport::new(
            format!("policy/log-prob gradient vs finite differences ({draws} draws)"),
            max_fd_err,
            1e-6,
        ),
        CheckReport::new("policy/score function zero mean", max_mean_err, 1e-10),
    ]
}

/// Frozen-trajectory end-to-end gradient: the full Θ → θ → log π chain
/// against finite differences, with and without return standardization.
pub fn trainer_suite() -> Vec<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a11);
    let model = tiny_model(17, 2);
    let traj = Trajectory {
        steps: (0..3)
            .map(|t| TrajectoryStep {
                observation: gridworld::Observation::from_values(vec![rng.gen_range(0.0..1.0)]),
                action: rng.gen_range(0..2),
                reward: if t == 2 { 1.0 } else { 0.0 },
            })
            .collect(),
    };
    let mut reports = Vec::new();
    for normalize in [false, true] {
        let opts = GradOptions {
            gamma: 0.9,
            normalize,
            method: GradMethod::Adjoint,
        };
        let packet = trainer::episode_gradient(&model, &traj, &opts).unwrap();
        let analytic = packet.flat();
        let returns = trainer::compute_returns(&traj.rewards(), opts.gamma).unwrap();
        let shaped = if normalize {
            let mean = returns.iter().sum::<f64>() / returns.len() as f64;
            let var = returns.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>()
                / returns.len() as f64;
            let std = var.sqrt() + 1e-8;
            returns.iter().map(|g| (g - mean) / std).collect()
        } else {
            returns
        };
        let fd = super::finite_difference(
            &mut |x| {
                let mut m = model.clone();
                m.set_flat_params(x).unwrap();
                let theta = qtgen::generate_theta(&m);
                let pp = PolicyParams::new(model.policy_topology(), theta).unwrap();
                let total: f64 = traj
                    .steps
                    .iter()
                    .zip(&shaped)
                    .map(|(step, g_t)| {
                        policy::log_prob(&pp, step.observation.as_slice(), step.action).unwrap()
                            * g_t
                    })
                    .sum();
                total / traj.len() as f64
            },
            &model.flat_params(),
            1e-5,
        );
        reports.push(CheckReport::new(
            format!("trainer/frozen-trajectory chain rule (normalize={normalize})"),
            super::max_abs_diff(&analytic, &fd),
            1e-5,
        ));
    }
    reports
}

/// Environment contract: fixed layout, shortest-path reward, wall blocking,
/// step cap, determinism, and a strictly positive random-agent success rate.
pub fn env_suite() -> Vec<CheckReport> {
    let mut reports = Vec::new();

    let (state, obs) = gridworld::reset(0);
    reports.push(CheckReport::flag(
        "env/reset layout",
        state.agent_pos == (1, 1) && state.goal_pos == (3, 3) && !state.done,
    ));
    reports.push(CheckReport::flag(
        "env/observation shape and range",
        obs.as_slice().len() == gridworld::OBS_LEN
            && obs.as_slice().iter().all(|v| (0.0..=1.0).contains(v)),
    ));

    // Shortest path: 5 steps, reward 0.955.
    let plan = [
        Action::Forward,
        Action::Forward,
        Action::Right,
        Action::Forward,
        Action::Forward,
    ];
    let mut st = state;
    let mut last = 0.0;
    for a in plan {
        let out = gridworld::step(&st, a).unwrap();
        st = out.state;
        last = out.reward;
    }
    reports.push(CheckReport::new(
        "env/shortest-path reward 0.955",
        (last - 0.955).abs(),
        1e-12,
    ));
    reports.push(CheckReport::flag("env/goal terminates episode", st.done));

    // Wall blocking.
    let (reset_state, _) = gridworld::reset(0);
    let turned = gridworld::step(&reset_state, Action::Left).unwrap().state;
    let bumped = gridworld::step(&turned, Action::Forward).unwrap();
    reports.push(CheckReport::flag(
        "env/walls block forward motion",
        bumped.state.agent_pos == (1, 1) && bumped.reward == 0.0,
    ));

    // Step cap.
    let mut spin = reset_state;
    let mut cap_ok = true;
    for i in 0..gridworld::MAX_STEPS {
        let out = gridworld::step(&spin, Action::Left).unwrap();
        spin = out.state;
        if i + 1 == gridworld::MAX_STEPS {
            cap_ok &= out.done && out.reward == 0.0;
        } else {
            cap_ok &= !out.done;
        }
    }
    reports.push(CheckReport::flag("env/step cap 100 with zero reward", cap_ok));

    // Determinism.
    let a = gridworld::step(&reset_state, Action::Forward).unwrap();
    let b = gridworld::step(&reset_state, Action::Forward).unwrap();
    reports.push(CheckReport::flag(
        "env/transition determinism",
        a.state == b.state && a.observation == b.observation,
    ));

    // Random-agent success rate over 1000 episodes.
    let mut rng = ChaCha8Rng::seed_from_u64(0xe57);
    let mut successes = 0usize;
    for _ in 0..1000 {
        let (mut s, _) = gridworld::reset(0);
        loop {
            let out = gridworld::step(&s, Action::from_index(rng.gen_range(0..3)).unwrap()).unwrap();
            s = out.state;
            if out.done {
                if out.reward > 0.0 {
                    successes += 1;
                }
                break;
            }
        }
    }
    reports.push(CheckReport::flag(
        format!("env/random-agent success rate > 0 ({successes}/1000)"),
        successes > 0,
    ));
    reports
}

/// Everything `verify gradient` runs: the five finite-difference suites.
pub fn gradient_suites() -> Vec<CheckReport> {
    let mut reports = qsim_gradient_suite();
    reports.extend(mapper_suite());
    reports.extend(qtgen_suite());
    reports.extend(policy_suite());
    reports.extend(trainer_suite());
    reports
}

/// Uniform-random-agent mean episode reward over `episodes` seeded episodes;
/// the evaluation baseline for untrained checkpoints.
pub fn random_agent_baseline(episodes: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rewards = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let (mut s, _) = gridworld::reset(0);
        loop {
            let out = gridworld::step(&s, Action::from_index(rng.gen_range(0..3)).unwrap()).unwrap();
            s = out.state;
            if out.done {
                rewards.push(out.reward);
                break;
            }
        }
    }
    let mean = rewards.iter().sum::<f64>() / episodes as f64;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / episodes as f64;
    (mean, var.sqrt())
}
