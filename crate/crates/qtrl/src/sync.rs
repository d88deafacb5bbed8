//! Synchronous N-agent coordination: broadcast the shared model, collect one
//! gradient packet per agent, average in fixed agent-index order, update,
//! repeat. Agents run in parallel (or strictly sequentially under the
//! reproducibility flag) but the coordinator is the only writer, and only at
//! round boundaries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::optim::{Optimizer, OptimizerKind};
use crate::policy::PolicyParams;
use crate::qtgen::GlobalModel;
use crate::trainer::{self, GradOptions, GradientPacket};

/// Coordinator configuration.
#[derive(Debug, Clone)]
pub struct SyncConfig {
    pub num_agents: usize,
    pub learning_rate: f64,
    /// Episodes each agent accumulates into one packet per round.
    pub episodes_per_round: usize,
    pub max_rounds: usize,
    pub target_reward: f64,
    pub target_window: usize,
    pub optimizer: OptimizerKind,
    pub grad: GradOptions,
    /// Stop as soon as the moving average reaches the target.
    pub stop_on_target: bool,
    /// Force the deterministic serial path (also zeroes wall-clock columns).
    pub sequential: bool,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            num_agents: 1,
            learning_rate: 0.01,
            episodes_per_round: 1,
            max_rounds: 5000,
            target_reward: 0.8,
            target_window: 50,
            optimizer: OptimizerKind::AdaptiveMoment,
            grad: GradOptions::default(),
            stop_on_target: true,
            sequential: false,
        }
    }
}

impl SyncConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_agents < 1 {
            return Err(Error::InvalidConfig("num_agents must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.episodes_per_round < 1 {
            return Err(Error::InvalidConfig("episodes_per_round must be >= 1".into()));
        }
        if !(0.0 < self.target_reward && self.target_reward <= 1.0) {
            return Err(Error::InvalidConfig("target_reward must lie in (0, 1]".into()));
        }
        if self.target_window < 1 {
            return Err(Error::InvalidConfig("target_window must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.grad.gamma) {
            return Err(Error::InvalidGamma(self.grad.gamma));
        }
        Ok(())
    }
}

/// One completed synchronization round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: usize,
    pub agent_returns: Vec<f64>,
    pub mean_return: f64,
    /// Trailing average of mean returns over the configured window
    /// (partial before a full window exists).
    pub moving_avg: f64,
    /// L2 norm of the averaged flat gradient.
    pub grad_norm: f64,
    pub wall_ms: u64,
}

/// Per-round training log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub rounds: Vec<RoundRecord>,
    pub num_agents: usize,
    pub episodes_per_round: usize,
}

impl TrainingHistory {
    pub fn mean_returns(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.mean_return).collect()
    }

    /// Episodes consumed per agent so far.
    pub fn episodes_per_agent(&self) -> usize {
        self.rounds.len() * self.episodes_per_round
    }

    /// Trailing `window` average of the final rounds, if a full window exists.
    pub fn final_moving_avg(&self, window: usize) -> Option<f64> {
        if window == 0 || self.rounds.len() < window {
            return None;
        }
        let tail = &self.rounds[self.rounds.len() - window..];
        Some(tail.iter().map(|r| r.mean_return).sum::<f64>() / window as f64)
    }
}

/// Averages packets in slice order (the caller provides agent-index order)
/// after checking shape agreement and finiteness.
pub fn averaged_gradient(packets: &[GradientPacket]) -> Result<Vec<f64>> {
    let first = packets.first().ok_or(Error::EmptyRound)?;
    let dim = first.grad_phi.len() + first.grad_beta.len();
    let mut sum = vec![0.0; dim];
    for packet in packets {
        packet.check_finite()?;
        if packet.grad_phi.len() != first.grad_phi.len()
            || packet.grad_beta.len() != first.grad_beta.len()
        {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: packet.grad_phi.len() + packet.grad_beta.len(),
            });
        }
        for (acc, g) in sum.iter_mut().zip(packet.grad_phi.iter().chain(&packet.grad_beta)) {
            *acc += g;
        }
    }
    let scale = 1.0 / packets.len() as f64;
    for g in &mut sum {
        *g *= scale;
    }
    Ok(sum)
}

/// Slots `(agent index, packet)` pairs delivered in any order back into
/// agent-index order, so the averaged sum is independent of arrival order.
pub fn order_packets(
    mut pairs: Vec<(usize, GradientPacket)>,
    num_agents: usize,
) -> Result<Vec<GradientPacket>> {
    if pairs.len() != num_agents {
        return Err(Error::Protocol(format!(
            "expected {num_agents} packets, received {}",
            pairs.len()
        )));
    }
    let mut slots: Vec<Option<GradientPacket>> = (0..num_agents).map(|_| None).collect();
    for (index, packet) in pairs.drain(..) {
        let slot = slots
            .get_mut(index)
            .ok_or_else(|| Error::Protocol(format!("agent index {index} out of range")))?;
        if slot.is_some() {
            return Err(Error::Protocol(format!("duplicate packet from agent {index}")));
        }
        *slot = Some(packet);
    }
    Ok(slots.into_iter().map(|s| s.expect("all slots filled")).collect())
}

/// One synchronous update: average the packets and take one ascent step on
/// the flat (φ, β) vector. Plain-ascent mode applies the literal averaged
/// update Θ ← Θ + η·ḡ; adaptive-moment mode feeds ḡ to the moment update.
pub fn sync_round(
    model: &GlobalModel,
    packets: &[GradientPacket],
    eta: f64,
    optimizer: &mut Optimizer,
) -> Result<GlobalModel> {
    for packet in packets {
        if packet.grad_phi.len() != model.phi.len() || packet.grad_beta.len() != model.beta.len() {
            return Err(Error::DimensionMismatch {
                expected: model.trainable_count(),
                actual: packet.grad_phi.len() + packet.grad_beta.len(),
            });
        }
    }
    let grad = averaged_gradient(packets)?;
    let mut flat = model.flat_params();
    optimizer.step(&mut flat, &grad, eta);
    let mut updated = model.clone();
    updated.set_flat_params(&flat)?;
    Ok(updated)
}

/// Runs `episodes_per_round` episodes with a model snapshot and accumulates
/// them into one packet (component-wise mean; lengths summed).
fn agent_round(
    model: &GlobalModel,
    rng: &mut ChaCha8Rng,
    config: &SyncConfig,
) -> Result<GradientPacket> {
    let mut accumulated = GradientPacket::zeros(model);
    for _ in 0..config.episodes_per_round {
        let traj = trainer::run_episode(model, rng)?;
        let packet = trainer::episode_gradient(model, &traj, &config.grad)?;
        for (acc, g) in accumulated.grad_phi.iter_mut().zip(&packet.grad_phi) {
            *acc += g;
        }
        for (acc, g) in accumulated.grad_beta.iter_mut().zip(&packet.grad_beta) {
            *acc += g;
        }
        accumulated.episode_return += packet.episode_return;
        accumulated.episode_length += packet.episode_length;
    }
    let scale = 1.0 / config.episodes_per_round as f64;
    for g in accumulated
        .grad_phi
        .iter_mut()
        .chain(accumulated.grad_beta.iter_mut())
    {
        *g *= scale;
    }
    accumulated.episode_return *= scale;
    Ok(accumulated)
}

fn record_round(
    history: &mut TrainingHistory,
    round: usize,
    packets: &[GradientPacket],
    grad_norm: f64,
    window: usize,
    wall_ms: u64,
) {
    let agent_returns: Vec<f64> = packets.iter().map(|p| p.episode_return).collect();
    let mean_return = agent_returns.iter().sum::<f64>() / agent_returns.len() as f64;
    history.rounds.push(RoundRecord {
        round,
        agent_returns,
        mean_return,
        moving_avg: 0.0,
        grad_norm,
        wall_ms,
    });
    let completed = history.rounds.len();
    let span = window.min(completed);
    let tail_sum: f64 = history.rounds[completed - span..]
        .iter()
        .map(|r| r.mean_return)
        .sum();
    history.rounds[completed - 1].moving_avg = tail_sum / span as f64;
}

fn target_hit(history: &TrainingHistory, config: &SyncConfig) -> bool {
    config.stop_on_target
        && history.rounds.len() >= config.target_window
        && history.rounds.last().map(|r| r.moving_avg).unwrap_or(0.0) >= config.target_reward
}

/// Distributed training loop. Per-agent RNG streams are seeded
/// `base_seed + agent_index`; both the parallel and sequential paths produce
/// bit-identical model trajectories.
pub fn train_distributed(
    config: &SyncConfig,
    mut model: GlobalModel,
    base_seed: u64,
) -> Result<(GlobalModel, TrainingHistory)> {
    config.validate()?;
    let mut rngs: Vec<ChaCha8Rng> = (0..config.num_agents)
        .map(|i| ChaCha8Rng::seed_from_u64(base_seed + i as u64))
        .collect();
    let mut optimizer = Optimizer::new(config.optimizer, model.trainable_count());
    let mut history = TrainingHistory {
        num_agents: config.num_agents,
        episodes_per_round: config.episodes_per_round,
        ..TrainingHistory::default()
    };

    for round in 1..=config.max_rounds {
        let started = Instant::now();
        let snapshot = &model;
        let collected: Vec<(usize, GradientPacket)> = if config.sequential {
            let mut pairs = Vec::with_capacity(config.num_agents);
            for (i, rng) in rngs.iter_mut().enumerate() {
                pairs.push((i, agent_round(snapshot, rng, config)?));
            }
            pairs
        } else {
            rngs.par_iter_mut()
                .enumerate()
                .map(|(i, rng)| agent_round(snapshot, rng, config).map(|p| (i, p)))
                .collect::<Result<Vec<_>>>()?
        };
        let packets = order_packets(collected, config.num_agents)?;
        let averaged = averaged_gradient(&packets)?;
        let grad_norm = averaged.iter().map(|g| g * g).sum::<f64>().sqrt();
        model = sync_round(&model, &packets, config.learning_rate, &mut optimizer)?;

        let wall_ms = if config.sequential {
            0
        } else {
            started.elapsed().as_millis() as u64
        };
        record_round(&mut history, round, &packets, grad_norm, config.target_window, wall_ms);
        if target_hit(&history, config) {
            break;
        }
    }
    Ok((model, history))
}

/// Bare single-agent loop: the reference the N = 1 distributed run must
/// reproduce bit-for-bit.
pub fn train_single_agent(
    config: &SyncConfig,
    mut model: GlobalModel,
    seed: u64,
) -> Result<(GlobalModel, TrainingHistory)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut optimizer = Optimizer::new(config.optimizer, model.trainable_count());
    let mut history = TrainingHistory {
        num_agents: 1,
        episodes_per_round: config.episodes_per_round,
        ..TrainingHistory::default()
    };
    for round in 1..=config.max_rounds {
        let packet = agent_round(&model, &mut rng, config)?;
        let packets = [packet];
        let averaged = averaged_gradient(&packets)?;
        let grad_norm = averaged.iter().map(|g| g * g).sum::<f64>().sqrt();
        model = sync_round(&model, &packets, config.learning_rate, &mut optimizer)?;
        record_round(&mut history, round, &packets, grad_norm, config.target_window, 0);
        if target_hit(&history, config) {
            break;
        }
    }
    Ok((model, history))
}

/// Classical-baseline loop: same REINFORCE machinery, gradient applied to θ
/// directly (single agent).
pub fn train_classical(
    config: &SyncConfig,
    mut params: PolicyParams,
    seed: u64,
) -> Result<(PolicyParams, TrainingHistory)> {
    config.validate()?;
    if config.num_agents != 1 {
        return Err(Error::InvalidConfig(
            "the classical baseline trains a single agent".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut optimizer = Optimizer::new(config.optimizer, params.theta().len());
    let mut history = TrainingHistory {
        num_agents: 1,
        episodes_per_round: config.episodes_per_round,
        ..TrainingHistory::default()
    };
    for round in 1..=config.max_rounds {
        let mut grad = vec![0.0; params.theta().len()];
        let mut ret = 0.0;
        let mut length = 0usize;
        for _ in 0..config.episodes_per_round {
            let traj = trainer::run_episode_with_policy(&params, &mut rng)?;
            let g = trainer::classical_episode_gradient(
                &params,
                &traj,
                config.grad.gamma,
                config.grad.normalize,
            )?;
            for (acc, gj) in grad.iter_mut().zip(&g) {
                *acc += gj;
            }
            ret += traj.episode_return();
            length += traj.len();
        }
        let scale = 1.0 / config.episodes_per_round as f64;
        for g in &mut grad {
            *g *= scale;
        }
        ret *= scale;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        optimizer.step(params.theta_mut(), &grad, config.learning_rate);

        let packet = GradientPacket {
            grad_phi: Vec::new(),
            grad_beta: grad,
            episode_return: ret,
            episode_length: length,
        };
        record_round(
            &mut history,
            round,
            std::slice::from_ref(&packet),
            grad_norm,
            config.target_window,
            0,
        );
        if target_hit(&history, config) {
            break;
        }
    }
    Ok((params, history))
}

/// First round whose trailing `window`-round moving average of mean returns
/// reaches `target`; `None` if it never does.
pub fn rounds_to_target(history: &TrainingHistory, target: f64, window: usize) -> Option<usize> {
    if window == 0 {
        return None;
    }
    let means = history.mean_returns();
    let mut window_sum: f64 = 0.0;
    for (i, m) in means.iter().enumerate() {
        window_sum += m;
        if i >= window {
            window_sum -= means[i - window];
        }
        if i + 1 >= window && window_sum / window as f64 >= target {
            return Some(i + 1);
        }
    }
    None
}

/// Table-II figure of merit: centric rounds / distributed rounds.
pub fn speedup(centric_rounds: usize, distributed_rounds: usize) -> f64 {
    centric_rounds as f64 / distributed_rounds as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::MappingParams;
    use crate::policy::{Activation, PolicyTopology};
    use crate::qsim::QuantumParams;
    use crate::qtgen;
    use rand::Rng;

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

    fn quick_config(num_agents: usize, max_rounds: usize) -> SyncConfig {
        SyncConfig {
            num_agents,
            max_rounds,
            stop_on_target: false,
            sequential: false,
            ..SyncConfig::default()
        }
    }

    fn fake_packet(phi: Vec<f64>, beta: Vec<f64>) -> GradientPacket {
        GradientPacket {
            grad_phi: phi,
            grad_beta: beta,
            episode_return: 0.5,
            episode_length: 10,
        }
    }

    #[test]
    fn averaging_matches_hand_computed_update() {
        // Two packets [1,3] and [3,1]: averaged gradient [2,2], plain-ascent
        // step from Θ = 0 with η = 0.1 lands on [0.2, 0.2].
        let packets = [
            fake_packet(vec![1.0], vec![3.0]),
            fake_packet(vec![3.0], vec![1.0]),
        ];
        let avg = averaged_gradient(&packets).unwrap();
        assert_eq!(avg, vec![2.0, 2.0]);
        let mut theta = vec![0.0, 0.0];
        Optimizer::new(OptimizerKind::PlainAscent, 2).step(&mut theta, &avg, 0.1);
        assert!((theta[0] - 0.2).abs() < 1e-15);
        assert!((theta[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn empty_round_rejected() {
        assert!(matches!(averaged_gradient(&[]), Err(Error::EmptyRound)));
    }

    #[test]
    fn poisoned_packet_rejected() {
        let packets = [fake_packet(vec![f64::NAN], vec![0.0])];
        assert!(matches!(
            averaged_gradient(&packets),
            Err(Error::PoisonedGradient(_))
        ));
    }

    #[test]
    fn zero_packets_keep_model_in_plain_mode() {
        let model = small_env_model(1);
        let packets = [GradientPacket::zeros(&model)];
        let mut opt = Optimizer::new(OptimizerKind::PlainAscent, model.trainable_count());
        let updated = sync_round(&model, &packets, 0.05, &mut opt).unwrap();
        assert_eq!(updated.flat_params(), model.flat_params());
    }

    #[test]
    fn identical_packets_match_single_packet_update() {
        let model = small_env_model(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g: Vec<f64> = (0..model.trainable_count())
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect();
        let m = model.phi.len();
        let packet = fake_packet(g[..m].to_vec(), g[m..].to_vec());
        let many = vec![packet.clone(); 4];

        let mut opt_a = Optimizer::new(OptimizerKind::PlainAscent, model.trainable_count());
        let a = sync_round(&model, &many, 0.1, &mut opt_a).unwrap();
        let mut opt_b = Optimizer::new(OptimizerKind::PlainAscent, model.trainable_count());
        let b = sync_round(&model, std::slice::from_ref(&packet), 0.1, &mut opt_b).unwrap();
        // Identical up to the 1/N reassociation, which is exact here.
        assert_eq!(a.flat_params(), b.flat_params());
    }

    #[test]
    fn packet_order_is_slotted_by_agent_index() {
        let model = small_env_model(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let make = |rng: &mut ChaCha8Rng| {
            let phi: Vec<f64> = (0..model.phi.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let beta: Vec<f64> = (0..model.beta.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            fake_packet(phi, beta)
        };
        let packets: Vec<GradientPacket> = (0..4).map(|_| make(&mut rng)).collect();

        let in_order: Vec<(usize, GradientPacket)> =
            packets.iter().cloned().enumerate().collect();
        let permuted: Vec<(usize, GradientPacket)> = [2usize, 0, 3, 1]
            .iter()
            .map(|&i| (i, packets[i].clone()))
            .collect();

        let a = averaged_gradient(&order_packets(in_order, 4).unwrap()).unwrap();
        let b = averaged_gradient(&order_packets(permuted, 4).unwrap()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn duplicate_or_missing_packets_rejected() {
        let p = fake_packet(vec![0.0], vec![0.0]);
        assert!(matches!(
            order_packets(vec![(0, p.clone()), (0, p.clone())], 2),
            Err(Error::Protocol(_))
        ));
        assert!(matches!(
            order_packets(vec![(0, p.clone())], 2),
            Err(Error::Protocol(_))
        ));
        assert!(matches!(
            order_packets(vec![(5, p.clone())], 1),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn n1_distributed_matches_single_agent_bitwise() {
        let model = small_env_model(6);
        let config = quick_config(1, 5);
        let (dist_model, dist_hist) =
            train_distributed(&config, model.clone(), 99).unwrap();
        let (single_model, single_hist) = train_single_agent(&config, model, 99).unwrap();
        let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
        assert_eq!(bits(dist_model.flat_params()), bits(single_model.flat_params()));
        assert_eq!(dist_hist.mean_returns(), single_hist.mean_returns());
    }

    #[test]
    fn sequential_and_parallel_runs_agree_bitwise() {
        let model = small_env_model(7);
        let mut config = quick_config(4, 4);
        let (par_model, par_hist) = train_distributed(&config, model.clone(), 11).unwrap();
        config.sequential = true;
        let (seq_model, seq_hist) = train_distributed(&config, model, 11).unwrap();
        let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
        assert_eq!(bits(par_model.flat_params()), bits(seq_model.flat_params()));
        assert_eq!(par_hist.mean_returns(), seq_hist.mean_returns());
    }

    #[test]
    fn zero_rounds_give_empty_history() {
        let model = small_env_model(8);
        let config = quick_config(2, 0);
        let before = model.flat_params();
        let (after, history) = train_distributed(&config, model, 1).unwrap();
        assert!(history.rounds.is_empty());
        assert_eq!(after.flat_params(), before);
    }

    #[test]
    fn rounds_to_target_examples() {
        let mk = |means: Vec<f64>| TrainingHistory {
            rounds: means
                .iter()
                .enumerate()
                .map(|(i, m)| RoundRecord {
                    round: i + 1,
                    agent_returns: vec![*m],
                    mean_return: *m,
                    moving_avg: 0.0,
                    grad_norm: 0.0,
                    wall_ms: 0,
                })
                .collect(),
            num_agents: 1,
            episodes_per_round: 1,
        };
        let constant = mk(vec![1.0; 20]);
        assert_eq!(rounds_to_target(&constant, 0.8, 10), Some(10));
        let zeros = mk(vec![0.0; 20]);
        assert_eq!(rounds_to_target(&zeros, 0.8, 10), None);
        let ramp = mk((1..=100).map(|r| 0.01 * r as f64).collect());
        assert_eq!(rounds_to_target(&ramp, 0.5, 1), Some(50));
    }

    #[test]
    fn speedup_ratios() {
        assert_eq!(speedup(100, 50), 2.0);
        assert_eq!(speedup(100, 100), 1.0);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut config = SyncConfig::default();
        config.num_agents = 0;
        assert!(config.validate().is_err());
        let mut config = SyncConfig::default();
        config.learning_rate = 0.0;
        assert!(config.validate().is_err());
        let mut config = SyncConfig::default();
        config.target_reward = 1.5;
        assert!(config.validate().is_err());
        let mut config = SyncConfig::default();
        config.target_window = 0;
        assert!(config.validate().is_err());
    }
}
