//! Experiment configuration: JSON file with flat keys, overridable by CLI
//! flags, plus the preset constants of the benchmark configurations.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapper::MappingParams;
use crate::optim::OptimizerKind;
use crate::policy::{Activation, PolicyParams, PolicyTopology};
use crate::qsim::QuantumParams;
use crate::qtgen::{self, GlobalModel, GradMethod};
use crate::sync::SyncConfig;
use crate::trainer::GradOptions;

/// Seed salt for model initialization, keeping the init stream distinct from
/// the agent episode streams (`base_seed + agent_index`).
const MODEL_SEED_SALT: u64 = 0x6d6f_64656c;
/// Seed salt for evaluation episodes.
pub const EVAL_SEED_SALT: u64 = 0x6576_616c;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Plain REINFORCE on a 147→32→3 policy.
    ClassicalBaseline,
    /// Single-agent quantum-train run.
    #[default]
    QtrlCentric,
    /// N-agent synchronous quantum-train run.
    QtrlDistributed,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::ClassicalBaseline => "classical-baseline",
            Mode::QtrlCentric => "qtrl-centric",
            Mode::QtrlDistributed => "qtrl-distributed",
        }
    }
}

/// Flat experiment configuration. Every field has a default, so JSON files
/// only list the keys they override.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Ansatz depth L.
    pub layers: usize,
    /// Agent count N.
    pub agents: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub normalize_returns: bool,
    pub optimizer: OptimizerKind,
    pub gradient_method: GradMethod,
    /// Round budget; `None` picks the per-mode default (5000 centric /
    /// classical, 2000 distributed).
    pub max_rounds: Option<usize>,
    pub episodes_per_round: usize,
    pub target_reward: f64,
    pub target_window: usize,
    pub stop_on_target: bool,
    pub base_seed: u64,
    pub sequential: bool,
    /// Output directory for metrics.csv / model.ckpt / speedup.csv.
    pub out_dir: PathBuf,
    /// Hidden activation of the classical baseline (the generated policy is
    /// always tanh).
    pub classical_activation: Activation,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::QtrlCentric,
            layers: 3,
            agents: 1,
            gamma: 0.99,
            learning_rate: 0.01,
            normalize_returns: true,
            optimizer: OptimizerKind::AdaptiveMoment,
            gradient_method: GradMethod::Adjoint,
            max_rounds: None,
            episodes_per_round: 1,
            target_reward: 0.8,
            target_window: 50,
            stop_on_target: true,
            base_seed: 42,
            sequential: false,
            out_dir: PathBuf::from("out"),
            classical_activation: Activation::Tanh,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 {
            return Err(Error::InvalidConfig("layers must be >= 1".into()));
        }
        if self.agents < 1 {
            return Err(Error::InvalidConfig("agents must be >= 1".into()));
        }
        if self.mode != Mode::QtrlDistributed && self.agents != 1 {
            return Err(Error::InvalidConfig(format!(
                "{} mode trains a single agent, got agents = {}",
                self.mode.as_str(),
                self.agents
            )));
        }
        self.sync_config().validate()
    }

    pub fn max_rounds(&self) -> usize {
        self.max_rounds.unwrap_or(match self.mode {
            Mode::QtrlDistributed => 2000,
            _ => 5000,
        })
    }

    pub fn sync_config(&self) -> SyncConfig {
        SyncConfig {
            num_agents: self.agents,
            learning_rate: self.learning_rate,
            episodes_per_round: self.episodes_per_round,
            max_rounds: self.max_rounds(),
            target_reward: self.target_reward,
            target_window: self.target_window,
            optimizer: self.optimizer,
            grad: GradOptions {
                gamma: self.gamma,
                normalize: self.normalize_returns,
                method: self.gradient_method,
            },
            stop_on_target: self.stop_on_target,
            sequential: self.sequential,
        }
    }

    fn model_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.base_seed ^ MODEL_SEED_SALT)
    }

    /// Builds the quantum-train model for this configuration and asserts the
    /// compression ordering m + l < k < classical parameter count.
    pub fn build_quantum_model(&self) -> Result<GlobalModel> {
        let mut rng = self.model_rng();
        let topology = PolicyTopology::generated();
        let n = qtgen::required_qubits(topology.param_count());
        let phi = QuantumParams::random(n, self.layers, &mut rng);
        let beta = MappingParams::random(n + 1, &mut rng);
        let model = GlobalModel::new(phi, beta, topology)?;
        model.check_compressive()?;
        let classical = PolicyTopology::classical_baseline(self.classical_activation).param_count();
        if model.k() >= classical {
            return Err(Error::InvalidConfig(format!(
                "generated count {} is not smaller than the classical baseline {classical}",
                model.k()
            )));
        }
        Ok(model)
    }

    pub fn build_classical_params(&self) -> PolicyParams {
        let mut rng = self.model_rng();
        PolicyParams::random(
            PolicyTopology::classical_baseline(self.classical_activation),
            &mut rng,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn preset_parameter_counts() {
        for (layers, trainable) in [(3, 331), (7, 451), (13, 631)] {
            let config = ExperimentConfig {
                layers,
                ..ExperimentConfig::default()
            };
            let model = config.build_quantum_model().unwrap();
            assert_eq!(model.trainable_count(), trainable);
            assert_eq!(model.k(), 909);
        }
        let classical = ExperimentConfig::default().build_classical_params();
        assert_eq!(classical.theta().len(), 4835);
    }

    #[test]
    fn json_round_trip_with_kebab_enums() {
        let config = ExperimentConfig {
            mode: Mode::QtrlDistributed,
            agents: 4,
            ..ExperimentConfig::default()
        };
        let text = serde_json::to_string(&config).unwrap();
        assert!(text.contains("\"qtrl-distributed\""));
        assert!(text.contains("\"adaptive-moment\""));
        let parsed: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.mode, Mode::QtrlDistributed);
        assert_eq!(parsed.agents, 4);
    }

    #[test]
    fn partial_json_uses_defaults() {
        let parsed: ExperimentConfig =
            serde_json::from_str(r#"{"layers": 7, "base_seed": 9}"#).unwrap();
        assert_eq!(parsed.layers, 7);
        assert_eq!(parsed.base_seed, 9);
        assert_eq!(parsed.agents, 1);
        assert_eq!(parsed.target_reward, 0.8);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"layerz": 7}"#).is_err());
    }

    #[test]
    fn multi_agent_requires_distributed_mode() {
        let config = ExperimentConfig {
            mode: Mode::QtrlCentric,
            agents: 4,
            ..ExperimentConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn mode_default_budgets() {
        let centric = ExperimentConfig::default();
        assert_eq!(centric.max_rounds(), 5000);
        let distributed = ExperimentConfig {
            mode: Mode::QtrlDistributed,
            agents: 2,
            ..ExperimentConfig::default()
        };
        assert_eq!(distributed.max_rounds(), 2000);
        let fixed = ExperimentConfig {
            max_rounds: Some(17),
            ..ExperimentConfig::default()
        };
        assert_eq!(fixed.max_rounds(), 17);
    }
}
