//! The classical mapping model: a (n+1)→10→10→1 network that turns one
//! (basis bit-string, measurement probability) pair into one policy weight,
//! with exact reverse-mode gradients with respect to both its own parameters
//! and the probability input.
//!
//! Input encoding: the n basis-state bits are remapped {0,1}→{−1,+1} (bit of
//! qubit 0 first, matching the simulator's most-significant-bit convention)
//! and the probability is scaled by 2^n so a near-uniform state feeds values
//! of order one. Hidden layers use tanh; the output is linear.

use rand::Rng;

use crate::error::{Error, Result};
use crate::qsim::{bit_of, ProbVector};

/// Width of both hidden layers.
pub const HIDDEN: usize = 10;

/// Weights and biases of the mapping network, flattened layer by layer as
/// row-major weights followed by biases:
/// `[W1 (10×(n+1)) | b1 (10) | W2 (10×10) | b2 (10) | W3 (1×10) | b3 (1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingParams {
    values: Vec<f64>,
    input_dim: usize,
}

/// l = 10·(n+1) + 10 + 10·10 + 10 + 10 + 1 for input width n+1.
pub fn param_count(input_dim: usize) -> usize {
    HIDDEN * input_dim + HIDDEN + HIDDEN * HIDDEN + HIDDEN + HIDDEN + 1
}

impl MappingParams {
    pub fn new(input_dim: usize, values: Vec<f64>) -> Result<Self> {
        let expected = param_count(input_dim);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(MappingParams { values, input_dim })
    }

    pub fn zeros(input_dim: usize) -> Self {
        MappingParams {
            values: vec![0.0; param_count(input_dim)],
            input_dim,
        }
    }

    /// Per-layer uniform(−1/√fan_in, +1/√fan_in) for weights and biases.
    pub fn random<R: Rng>(input_dim: usize, rng: &mut R) -> Self {
        let mut values = Vec::with_capacity(param_count(input_dim));
        for (fan_in, weights, biases) in [
            (input_dim, HIDDEN * input_dim, HIDDEN),
            (HIDDEN, HIDDEN * HIDDEN, HIDDEN),
            (HIDDEN, HIDDEN, 1),
        ] {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..weights + biases {
                values.push(rng.gen_range(-bound..bound));
            }
        }
        MappingParams { values, input_dim }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// l.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    // Offsets into the flat layout.
    fn w1(&self) -> &[f64] {
        &self.values[..HIDDEN * self.input_dim]
    }
    fn b1(&self) -> &[f64] {
        let o = HIDDEN * self.input_dim;
        &self.values[o..o + HIDDEN]
    }
    fn w2(&self) -> &[f64] {
        let o = HIDDEN * self.input_dim + HIDDEN;
        &self.values[o..o + HIDDEN * HIDDEN]
    }
    fn b2(&self) -> &[f64] {
        let o = HIDDEN * self.input_dim + HIDDEN + HIDDEN * HIDDEN;
        &self.values[o..o + HIDDEN]
    }
    fn w3(&self) -> &[f64] {
        let o = HIDDEN * self.input_dim + 2 * HIDDEN + HIDDEN * HIDDEN;
        &self.values[o..o + HIDDEN]
    }
    fn b3(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// One mapping input: the ±1 bit-string of a basis state plus its scaled
/// measurement probability.
#[derive(Debug, Clone, PartialEq)]
pub struct MapInput {
    bits: Vec<f64>,
    scaled_prob: f64,
}

impl MapInput {
    /// Encodes basis state `index` of an n-qubit register with probability
    /// `prob`: bits {0,1}→{−1,+1}, probability scaled by 2^n.
    pub fn new(index: usize, qubits: usize, prob: f64) -> Self {
        let bits = (0..qubits)
            .map(|q| if bit_of(index, qubits, q) == 1 { 1.0 } else { -1.0 })
            .collect();
        MapInput {
            bits,
            scaled_prob: (1u64 << qubits) as f64 * prob,
        }
    }

    /// Raw input, for tests.
    pub fn from_parts(bits: Vec<f64>, scaled_prob: f64) -> Self {
        MapInput { bits, scaled_prob }
    }

    pub fn bits(&self) -> &[f64] {
        &self.bits
    }

    pub fn scaled_prob(&self) -> f64 {
        self.scaled_prob
    }

    fn feature_vec(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.bits.len() + 1);
        x.extend_from_slice(&self.bits);
        x.push(self.scaled_prob);
        x
    }
}

struct ForwardTrace {
    x: Vec<f64>,
    h1: [f64; HIDDEN],
    h2: [f64; HIDDEN],
    y: f64,
}

fn forward_trace(beta: &MappingParams, input: &MapInput) -> Result<ForwardTrace> {
    let x = input.feature_vec();
    if x.len() != beta.input_dim {
        return Err(Error::DimensionMismatch {
            expected: beta.input_dim,
            actual: x.len(),
        });
    }
    let (w1, b1, w2, b2, w3) = (beta.w1(), beta.b1(), beta.w2(), beta.b2(), beta.w3());
    let mut h1 = [0.0; HIDDEN];
    for o in 0..HIDDEN {
        let row = &w1[o * beta.input_dim..(o + 1) * beta.input_dim];
        let z: f64 = b1[o] + row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
        h1[o] = z.tanh();
    }
    let mut h2 = [0.0; HIDDEN];
    for o in 0..HIDDEN {
        let row = &w2[o * HIDDEN..(o + 1) * HIDDEN];
        let z: f64 = b2[o] + row.iter().zip(&h1).map(|(w, v)| w * v).sum::<f64>();
        h2[o] = z.tanh();
    }
    let y = beta.b3() + w3.iter().zip(&h2).map(|(w, v)| w * v).sum::<f64>();
    Ok(ForwardTrace { x, h1, h2, y })
}

/// θ_i = M_β(bits, scaled prob): deterministic scalar output.
pub fn map_forward(beta: &MappingParams, input: &MapInput) -> Result<f64> {
    Ok(forward_trace(beta, input)?.y)
}

/// Applies the mapping to the first `k` basis states in ascending index
/// order; the remaining 2^n − k probabilities are ignored.
pub fn map_all(beta: &MappingParams, probs: &ProbVector, k: usize) -> Result<Vec<f64>> {
    if k > probs.len() {
        return Err(Error::CapacityExceeded {
            requested: k,
            capacity: probs.len(),
        });
    }
    let n = probs.qubits();
    (0..k)
        .map(|i| map_forward(beta, &MapInput::new(i, n, probs[i])))
        .collect()
}

/// Reverse-mode gradients of `upstream · θ_i` with respect to every mapping
/// parameter and to the **raw** probability p_i (the 2^n input scaling is
/// folded in, so the returned `grad_prob` is d(upstream·θ_i)/d p_i).
pub fn map_backward(
    beta: &MappingParams,
    input: &MapInput,
    upstream: f64,
) -> Result<(Vec<f64>, f64)> {
    let trace = forward_trace(beta, input)?;
    let in_dim = beta.input_dim;
    let (w1, w2, w3) = (beta.w1(), beta.w2(), beta.w3());

    let mut grad = vec![0.0; beta.len()];
    let (g_w1, rest) = grad.split_at_mut(HIDDEN * in_dim);
    let (g_b1, rest) = rest.split_at_mut(HIDDEN);
    let (g_w2, rest) = rest.split_at_mut(HIDDEN * HIDDEN);
    let (g_b2, rest) = rest.split_at_mut(HIDDEN);
    let (g_w3, g_b3) = rest.split_at_mut(HIDDEN);

    // Output layer: y = w3·h2 + b3.
    g_b3[0] = upstream;
    let mut d_h2 = [0.0; HIDDEN];
    for j in 0..HIDDEN {
        g_w3[j] = upstream * trace.h2[j];
        d_h2[j] = upstream * w3[j];
    }

    // Second hidden layer: h2 = tanh(W2·h1 + b2).
    let mut d_h1 = [0.0; HIDDEN];
    for o in 0..HIDDEN {
        let dz = d_h2[o] * (1.0 - trace.h2[o] * trace.h2[o]);
        g_b2[o] = dz;
        for i in 0..HIDDEN {
            g_w2[o * HIDDEN + i] = dz * trace.h1[i];
            d_h1[i] += dz * w2[o * HIDDEN + i];
        }
    }

    // First hidden layer: h1 = tanh(W1·x + b1).
    let mut d_x_last = 0.0;
    for o in 0..HIDDEN {
        let dz = d_h1[o] * (1.0 - trace.h1[o] * trace.h1[o]);
        g_b1[o] = dz;
        for i in 0..in_dim {
            g_w1[o * in_dim + i] = dz * trace.x[i];
        }
        d_x_last += dz * w1[o * in_dim + (in_dim - 1)];
    }

    // x_last = 2^n · p, so d/dp = 2^n · d/dx_last.
    let scale = (1u64 << input.bits.len()) as f64;
    Ok((grad, d_x_last * scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{probabilities, run_ansatz, QuantumParams};
    use crate::verify;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Independent straightforward re-implementation of the same arithmetic,
    // kept free of the slicing/tracing machinery above.
    fn naive_forward(values: &[f64], in_dim: usize, x: &[f64]) -> f64 {
        let mut idx = 0;
        let mut take = |count: usize| {
            let s = &values[idx..idx + count];
            idx += count;
            s.to_vec()
        };
        let w1 = take(HIDDEN * in_dim);
        let b1 = take(HIDDEN);
        let w2 = take(HIDDEN * HIDDEN);
        let b2 = take(HIDDEN);
        let w3 = take(HIDDEN);
        let b3 = take(1)[0];

        let mut h1 = vec![0.0; HIDDEN];
        for o in 0..HIDDEN {
            let mut z = b1[o];
            for i in 0..in_dim {
                z += w1[o * in_dim + i] * x[i];
            }
            h1[o] = z.tanh();
        }
        let mut h2 = vec![0.0; HIDDEN];
        for o in 0..HIDDEN {
            let mut z = b2[o];
            for i in 0..HIDDEN {
                z += w2[o * HIDDEN + i] * h1[i];
            }
            h2[o] = z.tanh();
        }
        let mut y = b3;
        for i in 0..HIDDEN {
            y += w3[i] * h2[i];
        }
        y
    }

    fn seeded_params(input_dim: usize, seed: u64) -> MappingParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MappingParams::random(input_dim, &mut rng)
    }

    #[test]
    fn param_count_matches_documented_topology() {
        assert_eq!(param_count(11), 241);
        assert_eq!(param_count(5), 181);
    }

    #[test]
    fn zero_params_give_zero_output() {
        let beta = MappingParams::zeros(4);
        let input = MapInput::new(5, 3, 0.2);
        assert_eq!(map_forward(&beta, &input).unwrap(), 0.0);
    }

    #[test]
    fn final_bias_only_gives_constant_output() {
        let mut beta = MappingParams::zeros(4);
        let last = beta.len() - 1;
        beta.values_mut()[last] = 0.5;
        for index in 0..8 {
            let input = MapInput::new(index, 3, 0.1 * index as f64);
            assert_eq!(map_forward(&beta, &input).unwrap(), 0.5);
        }
    }

    #[test]
    fn forward_matches_duplicate_arithmetic_oracle() {
        let beta = seeded_params(6, 77);
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for _ in 0..20 {
            let bits: Vec<f64> = (0..5)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            let scaled: f64 = rng.gen_range(0.0..4.0);
            let input = MapInput::from_parts(bits.clone(), scaled);
            let mut x = bits;
            x.push(scaled);
            let expected = naive_forward(beta.values(), 6, &x);
            let got = map_forward(&beta, &input).unwrap();
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_input_width_errors() {
        let beta = MappingParams::zeros(4);
        let input = MapInput::new(0, 5, 0.1); // 6 features for a 4-wide model
        assert!(matches!(
            map_forward(&beta, &input),
            Err(Error::DimensionMismatch { expected: 4, actual: 6 })
        ));
    }

    #[test]
    fn map_all_zero_params() {
        let beta = MappingParams::zeros(4);
        let probs = probabilities(&run_ansatz(&QuantumParams::zeros(3, 1)));
        assert_eq!(map_all(&beta, &probs, 5).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn map_all_matches_individual_calls() {
        let beta = seeded_params(4, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = QuantumParams::random(3, 2, &mut rng);
        let probs = probabilities(&run_ansatz(&params));
        let theta = map_all(&beta, &probs, 5).unwrap();
        for i in 0..5 {
            let one = map_forward(&beta, &MapInput::new(i, 3, probs[i])).unwrap();
            assert_eq!(theta[i], one);
        }
    }

    #[test]
    fn map_all_rejects_oversized_k() {
        let beta = MappingParams::zeros(4);
        let probs = probabilities(&run_ansatz(&QuantumParams::zeros(3, 1)));
        assert!(matches!(
            map_all(&beta, &probs, 9),
            Err(Error::CapacityExceeded { requested: 9, capacity: 8 })
        ));
    }

    #[test]
    fn entry_only_depends_on_its_own_probability() {
        let beta = seeded_params(4, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let params = QuantumParams::random(3, 2, &mut rng);
        let probs = probabilities(&run_ansatz(&params));
        let theta = map_all(&beta, &probs, 8).unwrap();
        // Recompute entry 2 with every other probability replaced.
        let perturbed = map_forward(&beta, &MapInput::new(2, 3, probs[2])).unwrap();
        assert_eq!(theta[2], perturbed);
    }

    #[test]
    fn backward_zero_upstream() {
        let beta = seeded_params(4, 11);
        let input = MapInput::new(3, 3, 0.125);
        let (grad, grad_prob) = map_backward(&beta, &input, 0.0).unwrap();
        assert!(grad.iter().all(|g| *g == 0.0));
        assert_eq!(grad_prob, 0.0);
    }

    #[test]
    fn backward_dead_network_structure() {
        let beta = MappingParams::zeros(4);
        let input = MapInput::new(3, 3, 0.125);
        let (grad, grad_prob) = map_backward(&beta, &input, 1.0).unwrap();
        assert_eq!(grad_prob, 0.0);
        // Only the final bias can move the output of an all-zero network.
        let last = grad.len() - 1;
        for (j, g) in grad.iter().enumerate() {
            if j == last {
                assert_eq!(*g, 1.0);
            } else {
                assert_eq!(*g, 0.0);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let beta = seeded_params(5, 13);
        let input = MapInput::new(6, 4, 0.04);
        let upstream = 0.7;
        let (grad_beta, grad_prob) = map_backward(&beta, &input, upstream).unwrap();

        let fd_beta = verify::finite_difference(
            &mut |values| {
                let b = MappingParams::new(5, values.to_vec()).unwrap();
                upstream * map_forward(&b, &input).unwrap()
            },
            beta.values(),
            1e-6,
        );
        assert!(verify::max_rel_diff(&grad_beta, &fd_beta) < 1e-6);

        let fd_prob = verify::finite_difference(
            &mut |p| {
                let inp = MapInput::new(6, 4, p[0]);
                upstream * map_forward(&beta, &inp).unwrap()
            },
            &[0.04],
            1e-6,
        );
        assert!((grad_prob - fd_prob[0]).abs() / fd_prob[0].abs().max(1.0) < 1e-6);
    }

    #[test]
    fn deterministic_outputs() {
        let beta = seeded_params(4, 21);
        let input = MapInput::new(5, 3, 0.3);
        let a = map_forward(&beta, &input).unwrap();
        let b = map_forward(&beta, &input).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
