//! The generated policy network π_θ(a|s): one hidden layer, softmax output,
//! with an exact score-function gradient for REINFORCE.
//!
//! The default generated topology is 147→6→3 (k = 909 flat parameters); the
//! classical comparison baseline is 147→32→3 (k = 4835). Flat layout:
//! `[W1 (hidden×obs) row-major | b1 (hidden) | W2 (actions×hidden) | b2 (actions)]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer activation. The generated policy always uses tanh; the
/// classical baseline can be flipped to relu for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation value and pre-activation.
    fn derivative(&self, z: f64, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyTopology {
    pub obs_dim: usize,
    pub hidden_dim: usize,
    pub actions: usize,
    pub activation: Activation,
}

impl PolicyTopology {
    /// Topology of the quantum-generated policy: 147→6→3, tanh.
    pub fn generated() -> Self {
        PolicyTopology {
            obs_dim: crate::gridworld::OBS_LEN,
            hidden_dim: 6,
            actions: 3,
            activation: Activation::Tanh,
        }
    }

    /// Topology of the classical comparison baseline: 147→32→3.
    pub fn classical_baseline(activation: Activation) -> Self {
        PolicyTopology {
            obs_dim: crate::gridworld::OBS_LEN,
            hidden_dim: 32,
            actions: 3,
            activation,
        }
    }

    /// k = hidden·(obs+1) + actions·(hidden+1).
    pub fn param_count(&self) -> usize {
        self.hidden_dim * (self.obs_dim + 1) + self.actions * (self.hidden_dim + 1)
    }
}

/// Flat policy parameters paired with their topology.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    topology: PolicyTopology,
    theta: Vec<f64>,
}

/// Unpacked view of the flat parameter vector.
pub struct PolicyView<'a> {
    pub w1: &'a [f64],
    pub b1: &'a [f64],
    pub w2: &'a [f64],
    pub b2: &'a [f64],
}

impl PolicyParams {
    pub fn new(topology: PolicyTopology, theta: Vec<f64>) -> Result<Self> {
        let expected = topology.param_count();
        if theta.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: theta.len(),
            });
        }
        Ok(PolicyParams { topology, theta })
    }

    pub fn zeros(topology: PolicyTopology) -> Self {
        PolicyParams {
            theta: vec![0.0; topology.param_count()],
            topology,
        }
    }

    /// Per-layer uniform(−1/√fan_in, +1/√fan_in), seeded; used by the
    /// classical baseline (the generated policy gets θ from the mapper).
    pub fn random<R: Rng>(topology: PolicyTopology, rng: &mut R) -> Self {
        let h = topology.hidden_dim;
        let o = topology.obs_dim;
        let a = topology.actions;
        let mut theta = Vec::with_capacity(topology.param_count());
        let b1 = 1.0 / (o as f64).sqrt();
        for _ in 0..h * o + h {
            theta.push(rng.gen_range(-b1..b1));
        }
        let b2 = 1.0 / (h as f64).sqrt();
        for _ in 0..a * h + a {
            theta.push(rng.gen_range(-b2..b2));
        }
        PolicyParams { topology, theta }
    }

    pub fn topology(&self) -> PolicyTopology {
        self.topology
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Splits the flat vector into the documented W1/b1/W2/b2 views.
    pub fn unpack(&self) -> PolicyView<'_> {
        let t = &self.topology;
        let (w1, rest) = self.theta.split_at(t.hidden_dim * t.obs_dim);
        let (b1, rest) = rest.split_at(t.hidden_dim);
        let (w2, b2) = rest.split_at(t.actions * t.hidden_dim);
        PolicyView { w1, b1, w2, b2 }
    }

    /// Inverse of [`unpack`](Self::unpack); round-trips exactly.
    pub fn pack(
        topology: PolicyTopology,
        w1: &[f64],
        b1: &[f64],
        w2: &[f64],
        b2: &[f64],
    ) -> Result<Self> {
        let mut theta = Vec::with_capacity(topology.param_count());
        theta.extend_from_slice(w1);
        theta.extend_from_slice(b1);
        theta.extend_from_slice(w2);
        theta.extend_from_slice(b2);
        PolicyParams::new(topology, theta)
    }
}

/// Probability distribution over the 3 actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

struct PolicyTrace {
    z1: Vec<f64>,
    h: Vec<f64>,
    probs: Vec<f64>,
}

fn forward_trace(params: &PolicyParams, obs: &[f64]) -> Result<PolicyTrace> {
    let t = params.topology();
    if obs.len() != t.obs_dim {
        return Err(Error::DimensionMismatch {
            expected: t.obs_dim,
            actual: obs.len(),
        });
    }
    let view = params.unpack();
    let mut z1 = vec![0.0; t.hidden_dim];
    let mut h = vec![0.0; t.hidden_dim];
    for o in 0..t.hidden_dim {
        let row = &view.w1[o * t.obs_dim..(o + 1) * t.obs_dim];
        z1[o] = view.b1[o] + row.iter().zip(obs).map(|(w, x)| w * x).sum::<f64>();
        h[o] = t.activation.apply(z1[o]);
    }
    let mut logits = vec![0.0; t.actions];
    for a in 0..t.actions {
        let row = &view.w2[a * t.hidden_dim..(a + 1) * t.hidden_dim];
        logits[a] = view.b2[a] + row.iter().zip(&h).map(|(w, x)| w * x).sum::<f64>();
    }
    // Numerically stabilized softmax.
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let probs = exps.iter().map(|e| e / total).collect();
    Ok(PolicyTrace { z1, h, probs })
}

/// π_θ(·|obs).
pub fn forward(params: &PolicyParams, obs: &[f64]) -> Result<ActionDistribution> {
    Ok(ActionDistribution {
        probs: forward_trace(params, obs)?.probs,
    })
}

/// Categorical sample via inverse CDF on one uniform draw.
pub fn sample_action<R: Rng>(dist: &ActionDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (a, p) in dist.probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return a;
        }
    }
    dist.probs.len() - 1
}

/// log π_θ(action|obs).
pub fn log_prob(params: &PolicyParams, obs: &[f64], action: usize) -> Result<f64> {
    let trace = forward_trace(params, obs)?;
    Ok(trace.probs[action].ln())
}

/// Exact ∇_θ log π_θ(action|obs), flat in the PolicyParams layout.
pub fn logpi_grad(params: &PolicyParams, obs: &[f64], action: usize) -> Result<Vec<f64>> {
    let t = params.topology();
    if action >= t.actions {
        return Err(Error::DimensionMismatch {
            expected: t.actions,
            actual: action,
        });
    }
    let trace = forward_trace(params, obs)?;
    let view = params.unpack();

    // d log softmax: one-hot(action) − probs.
    let mut d_logits = trace.probs.iter().map(|p| -p).collect::<Vec<f64>>();
    d_logits[action] += 1.0;

    let mut grad = vec![0.0; params.theta.len()];
    let (g_w1, rest) = grad.split_at_mut(t.hidden_dim * t.obs_dim);
    let (g_b1, rest) = rest.split_at_mut(t.hidden_dim);
    let (g_w2, g_b2) = rest.split_at_mut(t.actions * t.hidden_dim);

    let mut d_h = vec![0.0; t.hidden_dim];
    for a in 0..t.actions {
        let dl = d_logits[a];
        g_b2[a] = dl;
        for j in 0..t.hidden_dim {
            g_w2[a * t.hidden_dim + j] = dl * trace.h[j];
            d_h[j] += dl * view.w2[a * t.hidden_dim + j];
        }
    }
    for o in 0..t.hidden_dim {
        let dz = d_h[o] * t.activation.derivative(trace.z1[o], trace.h[o]);
        g_b1[o] = dz;
        for i in 0..t.obs_dim {
            g_w1[o * t.obs_dim + i] = dz * obs[i];
        }
    }
    Ok(grad)
}
