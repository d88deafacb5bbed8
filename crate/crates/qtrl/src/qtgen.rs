//! Quantum-train parameter generation: the k policy weights are read off the
//! circuit's measurement distribution through the mapping network,
//! θ = M_β(φ), and policy-space gradients are pulled back to (φ, β).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapper::{self, MapInput, MappingParams};
use crate::policy::PolicyTopology;
use crate::qsim::{self, QuantumParams};

/// How ∇_φ is evaluated during the pull-back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GradMethod {
    /// Parameter-shift rule: 2m ansatz runs.
    Shift,
    /// Adjoint backward sweep: one forward run plus one reverse pass.
    /// Matches the shift rule to 1e-9; the training default.
    #[default]
    Adjoint,
}

/// The only trainable state: circuit angles φ, mapping parameters β, and the
/// topology of the policy they generate. n = ⌈log₂ k⌉ qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub phi: QuantumParams,
    pub beta: MappingParams,
    policy: PolicyTopology,
}

impl GlobalModel {
    pub fn new(phi: QuantumParams, beta: MappingParams, policy: PolicyTopology) -> Result<Self> {
        let k = policy.param_count();
        let n = required_qubits(k);
        if phi.qubits() != n {
            return Err(Error::InvalidConfig(format!(
                "k = {k} requires n = {n} qubits, circuit has {}",
                phi.qubits()
            )));
        }
        if beta.input_dim() != n + 1 {
            return Err(Error::InvalidConfig(format!(
                "mapping input width must be n+1 = {}, got {}",
                n + 1,
                beta.input_dim()
            )));
        }
        Ok(GlobalModel { phi, beta, policy })
    }

    pub fn policy_topology(&self) -> PolicyTopology {
        self.policy
    }

    /// Number of generated policy parameters.
    pub fn k(&self) -> usize {
        self.policy.param_count()
    }

    pub fn qubits(&self) -> usize {
        self.phi.qubits()
    }

    pub fn blocks(&self) -> usize {
        self.phi.blocks()
    }

    /// m + l: what actually gets trained.
    pub fn trainable_count(&self) -> usize {
        self.phi.len() + self.beta.len()
    }

    /// The compression ordering m + l < k of every shipped configuration.
    pub fn check_compressive(&self) -> Result<()> {
        if self.trainable_count() >= self.k() {
            return Err(Error::InvalidConfig(format!(
                "trainable count {} is not smaller than generated count {}",
                self.trainable_count(),
                self.k()
            )));
        }
        Ok(())
    }

    /// Trainable parameters as one flat vector, φ then β.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.trainable_count());
        flat.extend_from_slice(self.phi.angles());
        flat.extend_from_slice(self.beta.values());
        flat
    }

    /// Writes a flat vector (φ then β) back into the model.
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.trainable_count() {
            return Err(Error::DimensionMismatch {
                expected: self.trainable_count(),
                actual: flat.len(),
            });
        }
        let m = self.phi.len();
        self.phi.angles_mut().copy_from_slice(&flat[..m]);
        self.beta.values_mut().copy_from_slice(&flat[m..]);
        Ok(())
    }
}

/// n = ⌈log₂ k⌉.
pub fn required_qubits(k: usize) -> usize {
    assert!(k >= 2, "need at least two generated parameters");
    (usize::BITS - (k - 1).leading_zeros()) as usize
}

/// θ = map_all(β, probabilities(run_ansatz(φ)), k). Deterministic and
/// side-effect free.
pub fn generate_theta(model: &GlobalModel) -> Vec<f64> {
    let probs = qsim::probabilities(&qsim::run_ansatz(&model.phi));
    mapper::map_all(&model.beta, &probs, model.k())
        .expect("k <= 2^n by construction")
}

/// Gradient of the training objective with respect to (φ, β).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainGradient {
    pub phi: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Pulls a policy-space gradient ∇_θ J back to (φ, β) with the chain rule:
/// β receives the summed per-weight mapper gradients, and φ receives one
/// weighted probability gradient on w where w[i] = ∂J/∂p_i for i < k
/// (zero for the ignored surplus states) — identical to the full Jacobian
/// contraction by linearity, at the cost of a single circuit gradient.
pub fn pullback_gradient(
    model: &GlobalModel,
    grad_theta: &[f64],
    method: GradMethod,
) -> Result<TrainGradient> {
    let k = model.k();
    if grad_theta.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: grad_theta.len(),
        });
    }
    let n = model.qubits();
    let probs = qsim::probabilities(&qsim::run_ansatz(&model.phi));

    let mut grad_beta = vec![0.0; model.beta.len()];
    let mut weights = vec![0.0; probs.len()];
    for i in 0..k {
        let input = MapInput::new(i, n, probs[i]);
        let (g_beta, g_prob) = mapper::map_backward(&model.beta, &input, grad_theta[i])?;
        for (acc, g) in grad_beta.iter_mut().zip(&g_beta) {
            *acc += g;
        }
        weights[i] = g_prob;
    }

    let grad_phi = match method {
        GradMethod::Shift => qsim::weighted_prob_gradient(&model.phi, &weights)?,
        GradMethod::Adjoint => qsim::weighted_prob_gradient_adjoint(&model.phi, &weights)?,
    };
    Ok(TrainGradient {
        phi: grad_phi,
        beta: grad_beta,
    })
}
