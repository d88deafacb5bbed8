//! Gradient-ascent optimizers for the averaged round gradient.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    /// Θ ← Θ + η·g, the literal synchronous update.
    PlainAscent,
    /// Adam-style moment estimates fed with the averaged gradient
    /// (β1 = 0.9, β2 = 0.999, ε = 1e-8); the training default because plain
    /// ascent moves too slowly on sparse rewards.
    #[default]
    AdaptiveMoment,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, dim: usize) -> Self {
        let state = match kind {
            OptimizerKind::PlainAscent => 0,
            OptimizerKind::AdaptiveMoment => dim,
        };
        Optimizer {
            kind,
            m: vec![0.0; state],
            v: vec![0.0; state],
            t: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// One ascent step along `grad` with learning rate `eta`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], eta: f64) {
        assert_eq!(params.len(), grad.len());
        match self.kind {
            OptimizerKind::PlainAscent => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p += eta * g;
                }
            }
            OptimizerKind::AdaptiveMoment => {
                self.t += 1;
                let bc1 = 1.0 - BETA1.powi(self.t as i32);
                let bc2 = 1.0 - BETA2.powi(self.t as i32);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p += eta * m_hat / (v_hat.sqrt() + EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_ascent_adds_scaled_gradient() {
        let mut opt = Optimizer::new(OptimizerKind::PlainAscent, 2);
        let mut params = vec![0.0, 1.0];
        opt.step(&mut params, &[2.0, -2.0], 0.1);
        assert!((params[0] - 0.2).abs() < 1e-15);
        assert!((params[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adaptive_first_step_is_signed_unit_step() {
        // With bias correction, the first Adam step is η·g/(|g|+ε').
        let mut opt = Optimizer::new(OptimizerKind::AdaptiveMoment, 2);
        let mut params = vec![0.0, 0.0];
        opt.step(&mut params, &[3.0, -0.5], 0.01);
        assert!((params[0] - 0.01).abs() < 1e-6);
        assert!((params[1] + 0.01).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_keeps_plain_params() {
        let mut opt = Optimizer::new(OptimizerKind::PlainAscent, 3);
        let mut params = vec![0.5, -0.5, 0.25];
        let before = params.clone();
        opt.step(&mut params, &[0.0; 3], 0.1);
        assert_eq!(params, before);
    }
}
