//! Quantum-train reinforcement learning, simulated end to end on a CPU.
//!
//! A parameterized quantum circuit (simulated as a statevector) feeds a small
//! mapping network that generates the weights of a gridworld policy; N
//! synchronous agents train the shared circuit/mapping parameters with
//! REINFORCE and gradient averaging. The crate ships the simulator, the
//! generator, the environment, the single-agent and distributed trainers, and
//! a benchmarking CLI (`qtrl`) with `train`, `bench-speedup`, `verify` and
//! `eval` subcommands.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod gridworld;
pub mod metrics;
pub mod mapper;
pub mod optim;
pub mod policy;
pub mod qtgen;
pub mod sync;
pub mod trainer;
pub mod qsim;
pub mod verify;

mod error;
pub use error::{Error, Result};
