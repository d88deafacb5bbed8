//! Statevector simulation of the layered U3 ansatz and exact differentiation
//! of computational-basis measurement probabilities.
//!
//! Qubit ordering: qubit 0 is the **most significant bit** of the basis-state
//! index, so for a 3-qubit register the basis state |q0 q1 q2⟩ = |110⟩ lives
//! at index 0b110 = 6. The same convention is used by the bit-string inputs
//! of the mapping model.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{Error, Result};

/// Full complex amplitude vector of an n-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    qubits: usize,
}

impl StateVector {
    /// |0…0⟩ on `qubits` qubits.
    pub fn zero_state(qubits: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        StateVector { amplitudes, qubits }
    }

    /// Basis state |index⟩.
    pub fn basis_state(qubits: usize, index: usize) -> Self {
        assert!(index < 1 << qubits, "basis index out of range");
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        StateVector { amplitudes, qubits }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Σ_i |a_i|².
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies the general single-qubit rotation
    /// U3(θ,φ,λ) = [[cos(θ/2), −e^{iλ}·sin(θ/2)],
    ///              [e^{iφ}·sin(θ/2), e^{i(φ+λ)}·cos(θ/2)]]
    /// to `qubit`.
    pub fn apply_u3(&mut self, qubit: usize, theta: f64, phi: f64, lambda: f64) -> Result<()> {
        if qubit >= self.qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                qubits: self.qubits,
            });
        }
        let u = u3_matrix(theta, phi, lambda);
        self.apply_single(qubit, &u);
        Ok(())
    }

    /// Flips `target` on every basis state whose `control` bit is set.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        if control == target {
            return Err(Error::InvalidGate(control));
        }
        for q in [control, target] {
            if q >= self.qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    qubits: self.qubits,
                });
            }
        }
        let mc = bit_mask(self.qubits, control);
        let mt = bit_mask(self.qubits, target);
        for i in 0..self.amplitudes.len() {
            if i & mc != 0 && i & mt == 0 {
                self.amplitudes.swap(i, i | mt);
            }
        }
        Ok(())
    }

    /// Applies a 2x2 matrix `[u00, u01, u10, u11]` to `qubit`. Caller checks range.
    fn apply_single(&mut self, qubit: usize, u: &[Complex64; 4]) {
        let mask = bit_mask(self.qubits, qubit);
        let dim = self.amplitudes.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + mask {
                let j = i | mask;
                let a = self.amplitudes[i];
                let b = self.amplitudes[j];
                self.amplitudes[i] = u[0] * a + u[1] * b;
                self.amplitudes[j] = u[2] * a + u[3] * b;
            }
            base += mask << 1;
        }
    }
}

/// Bit mask selecting `qubit` inside a basis index (qubit 0 = MSB).
#[inline]
pub fn bit_mask(qubits: usize, qubit: usize) -> usize {
    1 << (qubits - 1 - qubit)
}

/// Value of `qubit` in basis index `i` (qubit 0 = MSB).
#[inline]
pub fn bit_of(index: usize, qubits: usize, qubit: usize) -> usize {
    (index >> (qubits - 1 - qubit)) & 1
}

/// Entries of U3(θ,φ,λ) in row-major order.
pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> [Complex64; 4] {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let e_phi = Complex64::from_polar(1.0, phi);
    let e_lam = Complex64::from_polar(1.0, lambda);
    [
        Complex64::new(c, 0.0),
        -e_lam * s,
        e_phi * s,
        e_phi * e_lam * c,
    ]
}

/// Entry-wise derivatives of U3 with respect to θ, φ and λ.
fn u3_derivatives(theta: f64, phi: f64, lambda: f64) -> [[Complex64; 4]; 3] {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let e_phi = Complex64::from_polar(1.0, phi);
    let e_lam = Complex64::from_polar(1.0, lambda);
    let i = Complex64::new(0.0, 1.0);
    let zero = Complex64::new(0.0, 0.0);
    let d_theta = [
        Complex64::new(-s / 2.0, 0.0),
        -e_lam * (c / 2.0),
        e_phi * (c / 2.0),
        -e_phi * e_lam * (s / 2.0),
    ];
    let d_phi = [zero, zero, i * e_phi * s, i * e_phi * e_lam * c];
    let d_lambda = [zero, -i * e_lam * s, zero, i * e_phi * e_lam * c];
    [d_theta, d_phi, d_lambda]
}

/// Rotation angles of the layered ansatz: 3 angles per qubit per block,
/// m = 3·n·L in total. Angle j of qubit q in block b sits at index
/// `3·(b·n + q) + j` with j ∈ {0: θ, 1: φ, 2: λ}.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumParams {
    angles: Vec<f64>,
    qubits: usize,
    blocks: usize,
}

impl QuantumParams {
    pub fn new(qubits: usize, blocks: usize, angles: Vec<f64>) -> Result<Self> {
        let expected = 3 * qubits * blocks;
        if angles.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: angles.len(),
            });
        }
        Ok(QuantumParams {
            angles,
            qubits,
            blocks,
        })
    }

    pub fn zeros(qubits: usize, blocks: usize) -> Self {
        QuantumParams {
            angles: vec![0.0; 3 * qubits * blocks],
            qubits,
            blocks,
        }
    }

    /// Seeded initialization: every angle uniform in [0, 2π).
    pub fn random<R: Rng>(qubits: usize, blocks: usize, rng: &mut R) -> Self {
        let angles = (0..3 * qubits * blocks)
            .map(|_| rng.gen_range(0.0..TAU))
            .collect();
        QuantumParams {
            angles,
            qubits,
            blocks,
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// m = 3·n·L.
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn angles_mut(&mut self) -> &mut [f64] {
        &mut self.angles
    }

    /// (θ, φ, λ) of `qubit` in `block`.
    pub fn block_angles(&self, block: usize, qubit: usize) -> (f64, f64, f64) {
        let base = 3 * (block * self.qubits + qubit);
        (
            self.angles[base],
            self.angles[base + 1],
            self.angles[base + 2],
        )
    }

    /// Copy with every angle reduced to [0, 2π). Measurement probabilities are
    /// invariant under the reduction; used when writing checkpoints.
    pub fn wrapped(&self) -> Self {
        QuantumParams {
            angles: self.angles.iter().map(|a| a.rem_euclid(TAU)).collect(),
            qubits: self.qubits,
            blocks: self.blocks,
        }
    }
}

/// Computational-basis measurement distribution, length 2^n.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    probs: Vec<f64>,
    qubits: usize,
}

impl ProbVector {
    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// p_i = |⟨i|ψ⟩|².
pub fn probabilities(state: &StateVector) -> ProbVector {
    ProbVector {
        probs: state.amplitudes().iter().map(|a| a.norm_sqr()).collect(),
        qubits: state.qubits(),
    }
}

/// Runs the L-block ansatz from |0…0⟩: each block applies one U3 per qubit
/// followed by the nearest-neighbour CNOT ring CNOT(q, (q+1) mod n),
/// skipped entirely when n = 1.
pub fn run_ansatz(params: &QuantumParams) -> StateVector {
    let n = params.qubits();
    let mut state = StateVector::zero_state(n);
    for block in 0..params.blocks() {
        for q in 0..n {
            let (theta, phi, lambda) = params.block_angles(block, q);
            state
                .apply_u3(q, theta, phi, lambda)
                .expect("qubit in range by construction");
        }
        if n > 1 {
            for q in 0..n {
                state
                    .apply_cnot(q, (q + 1) % n)
                    .expect("ring qubits in range by construction");
            }
        }
    }
    state
}

fn weighted_sum(params: &QuantumParams, weights: &[f64]) -> f64 {
    let probs = probabilities(&run_ansatz(params));
    probs
        .as_slice()
        .iter()
        .zip(weights)
        .map(|(p, w)| p * w)
        .sum()
}

fn check_weights(params: &QuantumParams, weights: &[f64]) -> Result<()> {
    let dim = 1 << params.qubits();
    if weights.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: weights.len(),
        });
    }
    Ok(())
}

/// Exact gradient of f(φ) = Σ_i weights[i]·p_i(φ) with respect to every
/// ansatz angle, via the parameter-shift rule: each U3 angle enters through
/// rotation generators (U3 = RZ·RY·RZ up to global phase), so
/// ∂f/∂φ_j = [f(φ_j + π/2) − f(φ_j − π/2)] / 2. Costs 2m ansatz runs.
pub fn weighted_prob_gradient(params: &QuantumParams, weights: &[f64]) -> Result<Vec<f64>> {
    check_weights(params, weights)?;
    let mut shifted = params.clone();
    let mut grad = vec![0.0; params.len()];
    for j in 0..params.len() {
        let original = shifted.angles()[j];
        shifted.angles_mut()[j] = original + FRAC_PI_2;
        let plus = weighted_sum(&shifted, weights);
        shifted.angles_mut()[j] = original - FRAC_PI_2;
        let minus = weighted_sum(&shifted, weights);
        shifted.angles_mut()[j] = original;
        grad[j] = (plus - minus) / 2.0;
    }
    Ok(grad)
}

/// Adjoint-mode evaluation of the same gradient as [`weighted_prob_gradient`]:
/// one forward run plus one backward sweep instead of 2m runs. Exact for the
/// noiseless simulator; agreement with the shift rule is enforced by tests at
/// 1e-9.
pub fn weighted_prob_gradient_adjoint(params: &QuantumParams, weights: &[f64]) -> Result<Vec<f64>> {
    check_weights(params, weights)?;
    let n = params.qubits();
    let mut grad = vec![0.0; params.len()];

    // psi: state after the full circuit, then progressively un-applied.
    // lam:  diag(weights)·psi_final, then progressively un-applied.
    let mut psi = run_ansatz(params);
    let mut lam = psi.clone();
    for (l, w) in lam.amplitudes.iter_mut().zip(weights) {
        *l *= *w;
    }

    for block in (0..params.blocks()).rev() {
        if n > 1 {
            for q in (0..n).rev() {
                // CNOT is self-inverse.
                psi.apply_cnot(q, (q + 1) % n).expect("ring in range");
                lam.apply_cnot(q, (q + 1) % n).expect("ring in range");
            }
        }
        for q in (0..n).rev() {
            let (theta, phi, lambda) = params.block_angles(block, q);
            let u = u3_matrix(theta, phi, lambda);
            let u_dag = dagger(&u);
            // Un-apply the gate so psi holds the state *before* it.
            psi.apply_single(q, &u_dag);
            let derivs = u3_derivatives(theta, phi, lambda);
            let base = 3 * (block * n + q);
            for (comp, d) in derivs.iter().enumerate() {
                grad[base + comp] = 2.0 * overlap_with_applied(&lam, &psi, q, d).re;
            }
            lam.apply_single(q, &u_dag);
        }
    }
    Ok(grad)
}

fn dagger(u: &[Complex64; 4]) -> [Complex64; 4] {
    [u[0].conj(), u[2].conj(), u[1].conj(), u[3].conj()]
}

/// ⟨lam| (D on `qubit`) |psi⟩ without materializing D|psi⟩.
fn overlap_with_applied(
    lam: &StateVector,
    psi: &StateVector,
    qubit: usize,
    d: &[Complex64; 4],
) -> Complex64 {
    let mask = bit_mask(psi.qubits(), qubit);
    let dim = psi.amplitudes.len();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut base = 0;
    while base < dim {
        for i in base..base + mask {
            let j = i | mask;
            let a = psi.amplitudes[i];
            let b = psi.amplitudes[j];
            acc += lam.amplitudes[i].conj() * (d[0] * a + d[1] * b);
            acc += lam.amplitudes[j].conj() * (d[2] * a + d[3] * b);
        }
        base += mask << 1;
    }
    acc
}
