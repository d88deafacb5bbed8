//! Single-agent training: roll out one episode with the generated policy,
//! compute discounted returns, estimate the REINFORCE gradient, and pull it
//! back to the trainable (φ, β) parameters.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gridworld::{self, Action, Observation};
use crate::policy::{self, PolicyParams};
use crate::qtgen::{self, GlobalModel, TrainGradient};

pub use crate::qtgen::GradMethod;

/// One episode: ordered (observation, action, reward) steps.
#[derive(Debug, Clone)]
pub struct TrajectoryStep {
    pub observation: Observation,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Undiscounted episode return (the sparse terminal reward here).
    pub fn episode_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }
}

/// Per-agent gradient contribution, aligned with the GlobalModel layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPacket {
    pub grad_phi: Vec<f64>,
    pub grad_beta: Vec<f64>,
    pub episode_return: f64,
    pub episode_length: usize,
}

impl GradientPacket {
    pub fn zeros(model: &GlobalModel) -> Self {
        GradientPacket {
            grad_phi: vec![0.0; model.phi.len()],
            grad_beta: vec![0.0; model.beta.len()],
            episode_return: 0.0,
            episode_length: 0,
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        let finite = self
            .grad_phi
            .iter()
            .chain(&self.grad_beta)
            .all(|g| g.is_finite());
        if !finite || !self.episode_return.is_finite() {
            return Err(Error::PoisonedGradient("gradient packet"));
        }
        Ok(())
    }

    /// Flat gradient, φ then β, matching [`GlobalModel::flat_params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.grad_phi.len() + self.grad_beta.len());
        flat.extend_from_slice(&self.grad_phi);
        flat.extend_from_slice(&self.grad_beta);
        flat
    }
}

/// Gradient-estimation knobs shared by the quantum and classical paths.
#[derive(Debug, Clone, Copy)]
pub struct GradOptions {
    pub gamma: f64,
    /// Standardize returns to zero mean / unit variance (variance reduction;
    /// off recovers the plain estimator exactly).
    pub normalize: bool,
    pub method: GradMethod,
}

impl Default for GradOptions {
    fn default() -> Self {
        GradOptions {
            gamma: 0.99,
            normalize: true,
            method: GradMethod::Adjoint,
        }
    }
}

/// Rolls out one episode with a fixed policy parameter vector.
pub fn run_episode_with_policy<R: Rng>(
    params: &PolicyParams,
    rng: &mut R,
) -> Result<Trajectory> {
    let (mut state, mut obs) = gridworld::reset(0);
    let mut steps = Vec::new();
    loop {
        let dist = policy::forward(params, obs.as_slice())?;
        let action = policy::sample_action(&dist, rng);
        let out = gridworld::step(&state, Action::from_index(action)?)?;
        steps.push(TrajectoryStep {
            observation: obs,
            action,
            reward: out.reward,
        });
        state = out.state;
        obs = out.observation;
        if out.done {
            break;
        }
    }
    Ok(Trajectory { steps })
}

/// Rolls out one episode: θ is generated once at episode start and held
/// fixed for the whole episode.
pub fn run_episode<R: Rng>(model: &GlobalModel, rng: &mut R) -> Result<Trajectory> {
    let theta = qtgen::generate_theta(model);
    let params = PolicyParams::new(model.policy_topology(), theta)?;
    run_episode_with_policy(&params, rng)
}

/// Discounted returns G_t = r_t + γ·G_{t+1}, computed by exact backward
/// recursion.
pub fn compute_returns(rewards: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidGamma(gamma));
    }
    if rewards.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (g, r) in returns.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *g = acc;
    }
    Ok(returns)
}

/// Standardized copy (zero mean, unit variance, population std, ε-guarded).
fn standardize(returns: &[f64]) -> Vec<f64> {
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    returns.iter().map(|g| (g - mean) / std).collect()
}

/// REINFORCE estimate in policy space:
/// (1/|τ|)·Σ_t ∇_θ log π_θ(a_t|s_t)·Ĝ_t (ascent direction).
pub fn reinforce_grad_theta(
    params: &PolicyParams,
    traj: &Trajectory,
    gamma: f64,
    normalize: bool,
) -> Result<Vec<f64>> {
    let returns = compute_returns(&traj.rewards(), gamma)?;
    let shaped = if normalize && returns.len() >= 2 {
        standardize(&returns)
    } else {
        returns
    };
    let mut grad = vec![0.0; params.theta().len()];
    for (step, g_t) in traj.steps.iter().zip(&shaped) {
        let step_grad = policy::logpi_grad(params, step.observation.as_slice(), step.action)?;
        for (acc, g) in grad.iter_mut().zip(&step_grad) {
            *acc += g * g_t;
        }
    }
    let scale = 1.0 / traj.len() as f64;
    for g in &mut grad {
        *g *= scale;
    }
    Ok(grad)
}

/// Full per-episode gradient: REINFORCE in θ-space pulled back through the
/// generator to (φ, β). Errors with a poisoned-packet diagnostic if any
/// entry is non-finite.
pub fn episode_gradient(
    model: &GlobalModel,
    traj: &Trajectory,
    opts: &GradOptions,
) -> Result<GradientPacket> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let theta = qtgen::generate_theta(model);
    let params = PolicyParams::new(model.policy_topology(), theta)?;
    let grad_theta = reinforce_grad_theta(&params, traj, opts.gamma, opts.normalize)?;
    let TrainGradient { phi, beta } = qtgen::pullback_gradient(model, &grad_theta, opts.method)?;
    let packet = GradientPacket {
        grad_phi: phi,
        grad_beta: beta,
        episode_return: traj.episode_return(),
        episode_length: traj.len(),
    };
    packet.check_finite()?;
    Ok(packet)
}

/// Gradient for the classical baseline: REINFORCE applied to θ directly.
pub fn classical_episode_gradient(
    params: &PolicyParams,
    traj: &Trajectory,
    gamma: f64,
    normalize: bool,
) -> Result<Vec<f64>> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let grad = reinforce_grad_theta(params, traj, gamma, normalize)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::PoisonedGradient("classical gradient"));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::MappingParams;
    use crate::policy::{Activation, PolicyTopology};
    use crate::qsim::QuantumParams;
    use crate::verify;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Real-environment model kept deliberately small: 147→2→3 policy
    /// (k = 305 → n = 9 qubits), one ansatz block.
    fn small_env_model(seed: u64) -> GlobalModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = PolicyTopology {
            obs_dim: crate::gridworld::OBS_LEN,
            hidden_dim: 2,
            actions: 3,
            activation: Activation::Tanh,
        };
        let n = qtgen::required_qubits(topo.param_count());
        let phi = QuantumParams::random(n, 1, &mut rng);
        let beta = MappingParams::random(n + 1, &mut rng);
        GlobalModel::new(phi, beta, topo).unwrap()
    }

    fn zero_beta_model(seed: u64) -> GlobalModel {
        let mut model = small_env_model(seed);
        model.beta = MappingParams::zeros(model.beta.input_dim());
        model
    }

    #[test]
    fn returns_match_hand_computation() {
        let g = compute_returns(&[0.0, 0.0, 1.0], 0.9).unwrap();
        assert!((g[0] - 0.81).abs() < 1e-15);
        assert!((g[1] - 0.9).abs() < 1e-15);
        assert!((g[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_gamma_returns_rewards() {
        let rewards = [0.3, 0.0, 0.7];
        assert_eq!(compute_returns(&rewards, 0.0).unwrap(), rewards.to_vec());
    }

    #[test]
    fn zero_rewards_zero_returns() {
        assert_eq!(
            compute_returns(&[0.0; 5], 0.99).unwrap(),
            vec![0.0; 5]
        );
    }

    #[test]
    fn gamma_out_of_range_rejected() {
        assert!(matches!(
            compute_returns(&[1.0], 1.5),
            Err(Error::InvalidGamma(_))
        ));
        assert!(matches!(
            compute_returns(&[1.0], -0.1),
            Err(Error::InvalidGamma(_))
        ));
    }

    #[test]
    fn empty_rewards_rejected() {
        assert!(matches!(
            compute_returns(&[], 0.9),
            Err(Error::EmptyTrajectory)
        ));
    }

    #[test]
    fn zero_beta_gives_uniform_random_walk() {
        // θ = 0 → uniform policy; the walk is seeded and bounded.
        let model = zero_beta_model(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let traj = run_episode(&model, &mut rng).unwrap();
        assert!(!traj.is_empty());
        assert!(traj.len() <= crate::gridworld::MAX_STEPS as usize);
        for (i, step) in traj.steps.iter().enumerate() {
            if i + 1 < traj.len() {
                assert_eq!(step.reward, 0.0);
            }
        }
    }

    #[test]
    fn episodes_are_seed_deterministic() {
        let model = small_env_model(3);
        let a = run_episode(&model, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = run_episode(&model, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.steps.iter().zip(&b.steps) {
            assert_eq!(x.action, y.action);
            assert_eq!(x.reward.to_bits(), y.reward.to_bits());
            assert_eq!(x.observation, y.observation);
        }
    }

    #[test]
    fn zero_returns_give_zero_packet() {
        let model = small_env_model(4);
        // Truncated all-zero-reward trajectory (goal never reached).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut traj = run_episode(&model, &mut rng).unwrap();
        for step in &mut traj.steps {
            step.reward = 0.0;
        }
        let opts = GradOptions { normalize: false, ..GradOptions::default() };
        let packet = episode_gradient(&model, &traj, &opts).unwrap();
        assert!(packet.grad_phi.iter().all(|g| *g == 0.0));
        assert!(packet.grad_beta.iter().all(|g| *g == 0.0));
        // Normalized path: standardized zeros stay zero.
        let opts = GradOptions { normalize: true, ..GradOptions::default() };
        let packet = episode_gradient(&model, &traj, &opts).unwrap();
        assert!(packet.grad_phi.iter().all(|g| *g == 0.0));
        assert!(packet.grad_beta.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn zero_beta_kills_phi_gradient() {
        let model = zero_beta_model(6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let traj = run_episode(&model, &mut rng).unwrap();
        let packet = episode_gradient(&model, &traj, &GradOptions::default()).unwrap();
        assert!(packet.grad_phi.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn frozen_trajectory_gradient_matches_finite_differences() {
        // Tiny synthetic policy (k = 10 → n = 4) with a frozen 3-step
        // trajectory; checks the entire Θ → θ → log π chain.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let topo = PolicyTopology {
            obs_dim: 1,
            hidden_dim: 2,
            actions: 2,
            activation: Activation::Tanh,
        };
        let n = qtgen::required_qubits(topo.param_count());
        let phi = QuantumParams::random(n, 2, &mut rng);
        let beta = MappingParams::random(n + 1, &mut rng);
        let model = GlobalModel::new(phi, beta, topo).unwrap();

        let traj = Trajectory {
            steps: vec![
                TrajectoryStep {
                    observation: fake_obs(0.3),
                    action: 0,
                    reward: 0.0,
                },
                TrajectoryStep {
                    observation: fake_obs(0.9),
                    action: 1,
                    reward: 0.0,
                },
                TrajectoryStep {
                    observation: fake_obs(0.5),
                    action: 1,
                    reward: 1.0,
                },
            ],
        };

        for normalize in [false, true] {
            let opts = GradOptions {
                gamma: 0.9,
                normalize,
                method: GradMethod::Adjoint,
            };
            let packet = episode_gradient(&model, &traj, &opts).unwrap();
            let analytic = packet.flat();

            let returns = compute_returns(&traj.rewards(), opts.gamma).unwrap();
            let shaped = if normalize { super::standardize(&returns) } else { returns };
            let fd = verify::finite_difference(
                &mut |x| {
                    let mut m = model.clone();
                    m.set_flat_params(x).unwrap();
                    let theta = qtgen::generate_theta(&m);
                    let pp = PolicyParams::new(topo, theta).unwrap();
                    let mut total = 0.0;
                    for (step, g_t) in traj.steps.iter().zip(&shaped) {
                        total += policy::log_prob(&pp, step.observation.as_slice(), step.action)
                            .unwrap()
                            * g_t;
                    }
                    total / traj.len() as f64
                },
                &model.flat_params(),
                1e-5,
            );
            let err = verify::max_abs_diff(&analytic, &fd);
            assert!(err < 1e-5, "normalize={normalize}: max err {err}");
        }
    }

    fn fake_obs(fill: f64) -> Observation {
        // Observation for the synthetic 1-feature policy.
        Observation::from_values(vec![fill])
    }

    proptest! {
        #[test]
        fn return_recursion_identity(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let len = rng.gen_range(1..20);
            let rewards: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let gamma = rng.gen_range(0.0..1.0);
            let g = compute_returns(&rewards, gamma).unwrap();
            for t in 0..len {
                let expected = if t + 1 < len { rewards[t] + gamma * g[t + 1] } else { rewards[t] };
                prop_assert!((g[t] - expected).abs() < 1e-12);
            }
        }
    }
}
