//! The `qtrl` command line: `train`, `bench-speedup`, `verify`, `eval`.
//! Flag values override the JSON config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{self, Checkpoint};
use crate::config::{ExperimentConfig, Mode, EVAL_SEED_SALT};
use crate::error::{Error, Result};
use crate::metrics::{self, SpeedupRow};
use crate::optim::OptimizerKind;
use crate::qtgen::GradMethod;
use crate::sync::{self, TrainingHistory};
use crate::trainer;
use crate::verify::{self, CheckReport};

#[derive(Debug, Parser)]
#[command(
    name = "qtrl",
    about = "Quantum-train reinforcement learning benchmark harness",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one configuration end to end; writes metrics.csv and model.ckpt.
    Train(TrainArgs),
    /// Run the centric reference plus distributed presets and report
    /// measured speedups next to the reference values.
    BenchSpeedup(BenchArgs),
    /// Run the numerical verification suites.
    Verify(VerifyArgs),
    /// Evaluate a checkpoint over seeded episodes.
    Eval(EvalArgs),
}

/// Flags shared by `train` and `bench-speedup`; every field overrides the
/// config file when present.
#[derive(Debug, Args, Clone, Default)]
pub struct ConfigOverrides {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Training mode.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Number of agents N.
    #[arg(long)]
    pub agents: Option<usize>,
    /// Ansatz depth L.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Base RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Force the deterministic serial path.
    #[arg(long)]
    pub sequential: bool,
    /// Optimizer for the synchronized update.
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerKind>,
    /// Learning rate η.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Discount factor γ.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Disable return standardization (recovers the plain estimator).
    #[arg(long)]
    pub no_normalize_returns: bool,
    /// Round budget (default 5000 centric, 2000 distributed).
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Target moving-average reward.
    #[arg(long)]
    pub target: Option<f64>,
    /// Moving-average window (rounds).
    #[arg(long)]
    pub window: Option<usize>,
    /// Episodes per agent per round.
    #[arg(long)]
    pub episodes_per_round: Option<usize>,
    /// Keep training after the target is reached.
    #[arg(long)]
    pub no_early_stop: bool,
    /// Gradient method for the circuit pull-back.
    #[arg(long, value_enum)]
    pub gradient_method: Option<GradMethod>,
}

impl ConfigOverrides {
    /// File config (when given) with CLI overrides applied on top.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(mode) = self.mode {
            config.mode = mode;
        }
        if let Some(agents) = self.agents {
            config.agents = agents;
        }
        if let Some(layers) = self.layers {
            config.layers = layers;
        }
        if let Some(seed) = self.seed {
            config.base_seed = seed;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if self.sequential {
            config.sequential = true;
        }
        if let Some(optimizer) = self.optimizer {
            config.optimizer = optimizer;
        }
        if let Some(lr) = self.lr {
            config.learning_rate = lr;
        }
        if let Some(gamma) = self.gamma {
            config.gamma = gamma;
        }
        if self.no_normalize_returns {
            config.normalize_returns = false;
        }
        if let Some(max_rounds) = self.max_rounds {
            config.max_rounds = Some(max_rounds);
        }
        if let Some(target) = self.target {
            config.target_reward = target;
        }
        if let Some(window) = self.window {
            config.target_window = window;
        }
        if let Some(episodes) = self.episodes_per_round {
            config.episodes_per_round = episodes;
        }
        if self.no_early_stop {
            config.stop_on_target = false;
        }
        if let Some(method) = self.gradient_method {
            config.gradient_method = method;
        }
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub overrides: ConfigOverrides,
    /// Distributed agent counts to benchmark against the centric reference.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    pub bench_agents: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VerifySuite {
    Gradient,
    Oracle,
    Env,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite to run; all three when omitted.
    #[arg(value_enum)]
    pub suite: Option<VerifySuite>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint produced by `train`.
    pub checkpoint: PathBuf,
    /// Number of evaluation episodes (must be > 0).
    #[arg(long, default_value_t = 200)]
    pub episodes: usize,
    /// Evaluation seed.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

/// Outcome of a training run, for summaries and tests.
pub struct TrainOutcome {
    pub history: TrainingHistory,
    pub rounds_to_target: Option<usize>,
}

fn print_parameter_counts(config: &ExperimentConfig) -> Result<()> {
    match config.mode {
        Mode::ClassicalBaseline => {
            let params = config.build_classical_params();
            println!("trainable parameters: {}", params.theta().len());
        }
        _ => {
            let model = config.build_quantum_model()?;
            println!(
                "trainable parameters: {} (phi {} + beta {})",
                model.trainable_count(),
                model.phi.len(),
                model.beta.len()
            );
            println!("generated policy parameters: {}", model.k());
        }
    }
    Ok(())
}

fn run_training(config: &ExperimentConfig) -> Result<(Checkpoint, TrainingHistory)> {
    let sync_config = config.sync_config();
    match config.mode {
        Mode::ClassicalBaseline => {
            let params = config.build_classical_params();
            let (params, history) = sync::train_classical(&sync_config, params, config.base_seed)?;
            Ok((
                Checkpoint::Classical {
                    params,
                    seed: config.base_seed,
                },
                history,
            ))
        }
        Mode::QtrlCentric | Mode::QtrlDistributed => {
            let model = config.build_quantum_model()?;
            let (model, history) =
                sync::train_distributed(&sync_config, model, config.base_seed)?;
            Ok((
                Checkpoint::Quantum {
                    model,
                    seed: config.base_seed,
                },
                history,
            ))
        }
    }
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainOutcome> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    println!(
        "mode: {} (L={}, N={}, seed={})",
        config.mode.as_str(),
        config.layers,
        config.agents,
        config.base_seed
    );
    print_parameter_counts(config)?;

    let (checkpoint, history) = run_training(config)?;
    metrics::write_metrics_csv(&config.out_dir.join("metrics.csv"), &history)?;
    checkpoint::save(&config.out_dir.join("model.ckpt"), &checkpoint)?;

    let reached = sync::rounds_to_target(&history, config.target_reward, config.target_window);
    println!(
        "rounds completed: {} ({} episodes per agent)",
        history.rounds.len(),
        history.episodes_per_agent()
    );
    match reached {
        Some(round) => println!(
            "target {} (window {}) reached at round {round}",
            config.target_reward, config.target_window
        ),
        None => println!(
            "target {} (window {}) not reached",
            config.target_reward, config.target_window
        ),
    }
    if let Some(avg) = history.final_moving_avg(config.target_window) {
        println!("final moving average: {avg:.4}");
    }
    Ok(TrainOutcome {
        history,
        rounds_to_target: reached,
    })
}

/// Reference speedups reported alongside the measurements.
fn paper_reference(agents: usize) -> Option<f64> {
    match agents {
        2 => Some(2.06),
        4 => Some(3.33),
        8 => Some(5.33),
        _ => None,
    }
}

pub fn cmd_bench_speedup(config: &ExperimentConfig, agent_counts: &[usize]) -> Result<Vec<SpeedupRow>> {
    std::fs::create_dir_all(&config.out_dir)?;

    let mut centric = config.clone();
    centric.mode = Mode::QtrlCentric;
    centric.agents = 1;
    centric.max_rounds = Some(config.max_rounds.unwrap_or(5000));
    centric.stop_on_target = true;
    centric.validate()?;

    println!(
        "centric reference: L={}, seed={}, target {} (window {})",
        centric.layers, centric.base_seed, centric.target_reward, centric.target_window
    );
    let (_, centric_history) = run_training(&centric)?;
    let centric_rounds =
        sync::rounds_to_target(&centric_history, centric.target_reward, centric.target_window);
    match centric_rounds {
        Some(rounds) => println!("centric rounds to target: {rounds}"),
        None => println!("centric run never reached the target; speedups are undefined"),
    }

    let mut rows = vec![SpeedupRow {
        agents: 1,
        rounds_to_target: centric_rounds,
        centric_rounds,
        speedup: centric_rounds.map(|_| 1.0),
        paper_reference: None,
    }];

    for &agents in agent_counts {
        let mut distributed = config.clone();
        distributed.mode = Mode::QtrlDistributed;
        distributed.agents = agents;
        distributed.max_rounds = Some(config.max_rounds.unwrap_or(2000));
        distributed.stop_on_target = true;
        distributed.validate()?;
        let (_, history) = run_training(&distributed)?;
        let rounds =
            sync::rounds_to_target(&history, distributed.target_reward, distributed.target_window);
        let speedup = match (centric_rounds, rounds) {
            (Some(c), Some(d)) => Some(sync::speedup(c, d)),
            _ => None,
        };
        println!(
            "distributed N={agents}: rounds {}, speedup {}",
            rounds.map_or_else(|| "NA".into(), |r| r.to_string()),
            speedup.map_or_else(|| "NA".into(), |s| format!("x{s:.2}")),
        );
        rows.push(SpeedupRow {
            agents,
            rounds_to_target: rounds,
            centric_rounds,
            speedup,
            paper_reference: paper_reference(agents),
        });
    }

    metrics::write_speedup_csv(&config.out_dir.join("speedup.csv"), &rows)?;
    print!("{}", metrics::render_speedup_table(&rows));
    Ok(rows)
}

pub fn cmd_verify(suite: Option<VerifySuite>) -> Vec<CheckReport> {
    let mut reports = Vec::new();
    let run_gradient = matches!(suite, None | Some(VerifySuite::Gradient));
    let run_oracle = matches!(suite, None | Some(VerifySuite::Oracle));
    let run_env = matches!(suite, None | Some(VerifySuite::Env));
    if run_gradient {
        reports.extend(verify::gradient_suites());
    }
    if run_oracle {
        reports.extend(verify::oracle_suite());
    }
    if run_env {
        reports.extend(verify::env_suite());
    }
    for report in &reports {
        let status = if report.passed { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {} (max err {:.3e}, tol {:.1e})",
            report.name, report.max_err, report.tolerance
        );
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!(
        "{} checks, {} failed",
        reports.len(),
        failed
    );
    reports
}

pub struct EvalOutcome {
    pub mean: f64,
    pub stddev: f64,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalOutcome> {
    if args.episodes == 0 {
        return Err(Error::InvalidConfig(
            "refusing an empty evaluation (episodes = 0)".into(),
        ));
    }
    let checkpoint = checkpoint::load(&args.checkpoint)?;
    let params = checkpoint.policy_params()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ EVAL_SEED_SALT);
    let mut rewards = Vec::with_capacity(args.episodes);
    for _ in 0..args.episodes {
        let traj = trainer::run_episode_with_policy(&params, &mut rng)?;
        rewards.push(traj.episode_return());
    }
    let mean = rewards.iter().sum::<f64>() / args.episodes as f64;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
        / args.episodes as f64;
    let stddev = var.sqrt();
    println!(
        "episodes: {}, mean reward: {mean:.4}, std dev: {stddev:.4}",
        args.episodes
    );
    Ok(EvalOutcome { mean, stddev })
}
