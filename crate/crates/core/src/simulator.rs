//! Dense statevector simulation with postselection.
//!
//! Qubit `q` is bit `q` of the basis index (little-endian).

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Angle, Circuit, Gate, GateKind};

/// Survival norms below this are treated as a failed postselection.
pub const SURVIVAL_EPS: f64 = 1e-12;
/// Step for central differences on parameters used by several gates.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("qubit {qubit} out of range for a {n}-qubit state")]
    IndexOutOfRange { qubit: usize, n: usize },
    #[error("expected {expected} parameters, got {got}")]
    ParamCountMismatch { expected: usize, got: usize },
    #[error("gate {0:?} needs an angle")]
    MissingAngle(GateKind),
    #[error("postselection survival norm {0:e} is below threshold")]
    ZeroSurvival(f64),
    #[error("readout needs exactly one output qubit, circuit has {0}")]
    WrongOutputArity(usize),
    #[error("start state has {got} amplitudes, expected {expected}")]
    StateSizeMismatch { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n` qubits.
    pub fn zero(n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { n, amps }
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self, SimError> {
        if amps.len() != 1 << n {
            return Err(SimError::StateSizeMismatch { expected: 1 << n, got: amps.len() });
        }
        Ok(Self { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check(&self, q: usize) -> Result<(), SimError> {
        if q >= self.n {
            Err(SimError::IndexOutOfRange { qubit: q, n: self.n })
        } else {
            Ok(())
        }
    }

    fn apply_1q(&mut self, m: [[Complex64; 2]; 2], target: usize, control: Option<usize>) {
        let tbit = 1usize << target;
        let cmask = control.map_or(0, |c| 1usize << c);
        for i in 0..self.amps.len() {
            if i & tbit != 0 || i & cmask != cmask {
                continue;
            }
            let j = i | tbit;
            let (a, b) = (self.amps[i], self.amps[j]);
            self.amps[i] = m[0][0] * a + m[0][1] * b;
            self.amps[j] = m[1][0] * a + m[1][1] * b;
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rotation(kind: GateKind, theta: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = (theta / 2.0).sin_cos();
    match kind {
        GateKind::RX | GateKind::CRX => [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]],
        GateKind::RY => [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]],
        GateKind::RZ | GateKind::CRZ => [[c(co, -s), c(0.0, 0.0)], [c(0.0, 0.0), c(co, s)]],
        GateKind::H | GateKind::CNOT => unreachable!("fixed gate"),
    }
}

pub fn apply(state: &mut StateVector, gate: &Gate, angle: Option<f64>) -> Result<(), SimError> {
    for &q in &gate.qubits {
        state.check(q)?;
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let theta = || angle.ok_or(SimError::MissingAngle(gate.kind));
    match gate.kind {
        GateKind::H => state.apply_1q([[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]], gate.qubits[0], None),
        GateKind::RX | GateKind::RY | GateKind::RZ => {
            state.apply_1q(rotation(gate.kind, theta()?), gate.qubits[0], None)
        }
        GateKind::CNOT => state.apply_1q([[zero, one], [one, zero]], gate.qubits[1], Some(gate.qubits[0])),
        GateKind::CRX | GateKind::CRZ => {
            state.apply_1q(rotation(gate.kind, theta()?), gate.qubits[1], Some(gate.qubits[0]))
        }
    }
    Ok(())
}

fn angle_of(gate: &Gate, params: &[f64]) -> Option<f64> {
    gate.param.map(|a| match a {
        Angle::Symbol(i) => params[i],
        Angle::Const(x) => x,
    })
}

fn check_params(circuit: &Circuit, params: &[f64]) -> Result<(), SimError> {
    if params.len() != circuit.symbols.len() {
        return Err(SimError::ParamCountMismatch { expected: circuit.symbols.len(), got: params.len() });
    }
    Ok(())
}

/// Applies every gate to `start` without any projection.
pub fn evolve_from(circuit: &Circuit, params: &[f64], mut start: StateVector) -> Result<StateVector, SimError> {
    check_params(circuit, params)?;
    if start.n != circuit.n_qubits {
        return Err(SimError::StateSizeMismatch { expected: 1 << circuit.n_qubits, got: start.amps.len() });
    }
    for g in &circuit.gates {
        apply(&mut start, g, angle_of(g, params))?;
    }
    Ok(start)
}

pub fn evolve(circuit: &Circuit, params: &[f64]) -> Result<StateVector, SimError> {
    evolve_from(circuit, params, StateVector::zero(circuit.n_qubits))
}

/// The state projected onto the postselected outcomes, left unnormalised.
#[derive(Clone, Debug, PartialEq)]
pub struct Projected {
    /// Qubits not postselected, ascending; bit `i` of an amplitude index
    /// refers to `kept[i]`.
    pub kept: Vec<usize>,
    pub amplitudes: Vec<Complex64>,
    pub survival_norm: f64,
}

impl Projected {
    /// Unnormalised weights of the two outcomes of `qubit`.
    pub fn outcome_weights(&self, qubit: usize) -> [f64; 2] {
        let bit = self.kept.iter().position(|&q| q == qubit).expect("qubit is not postselected");
        let mut u = [0.0; 2];
        for (i, a) in self.amplitudes.iter().enumerate() {
            u[(i >> bit) & 1] += a.norm_sqr();
        }
        u
    }
}

fn project(circuit: &Circuit, state: &StateVector) -> Projected {
    let post_mask: usize = circuit.postselect.iter().fold(0, |m, &q| m | (1 << q));
    let kept: Vec<usize> = (0..circuit.n_qubits).filter(|q| post_mask & (1 << q) == 0).collect();
    let mut amplitudes = vec![c(0.0, 0.0); 1 << kept.len()];
    for (j, amp) in amplitudes.iter_mut().enumerate() {
        let i = kept.iter().enumerate().fold(0usize, |acc, (b, &q)| acc | (((j >> b) & 1) << q));
        *amp = state.amps[i];
    }
    let survival_norm = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    Projected { kept, amplitudes, survival_norm }
}

fn project_checked(circuit: &Circuit, state: &StateVector) -> Result<Projected, SimError> {
    let p = project(circuit, state);
    if p.survival_norm < SURVIVAL_EPS {
        return Err(SimError::ZeroSurvival(p.survival_norm));
    }
    Ok(p)
}

pub fn run(circuit: &Circuit, params: &[f64]) -> Result<Projected, SimError> {
    project_checked(circuit, &evolve(circuit, params)?)
}

/// [`run`] from an arbitrary, possibly unnormalised, start state.
#[doc(hidden)]
pub fn run_from_state(circuit: &Circuit, params: &[f64], start: StateVector) -> Result<Projected, SimError> {
    project_checked(circuit, &evolve_from(circuit, params, start)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub probs: [f64; 2],
    /// Postselection failed and `probs` is the uniform fallback.
    pub degenerate: bool,
}

fn output_qubit(circuit: &Circuit) -> Result<usize, SimError> {
    match circuit.output_qubits.as_slice() {
        [q] => Ok(*q),
        other => Err(SimError::WrongOutputArity(other.len())),
    }
}

fn weights(circuit: &Circuit, params: &[f64], out: usize) -> Result<[f64; 2], SimError> {
    Ok(project(circuit, &evolve(circuit, params)?).outcome_weights(out))
}

fn normalise(u: [f64; 2]) -> Distribution {
    let s = u[0] + u[1];
    if s < SURVIVAL_EPS {
        Distribution { probs: [0.5, 0.5], degenerate: true }
    } else {
        Distribution { probs: [u[0] / s, u[1] / s], degenerate: false }
    }
}

pub fn sentence_distribution(circuit: &Circuit, params: &[f64]) -> Result<Distribution, SimError> {
    let out = output_qubit(circuit)?;
    Ok(normalise(weights(circuit, params, out)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub distribution: Distribution,
    /// `d loss / d params`, aligned with the symbol table.
    pub grad: Vec<f64>,
}

/// Gradient of `upstream · p` where `p` is the renormalised output
/// distribution.
///
/// Parameters used by exactly one gate are differentiated with shift rules
/// on the unnormalised outcome weights: the two-term `±π/2` rule for
/// RX/RY/RZ and the four-term rule for the controlled rotations, whose
/// generator has eigenvalues `{0, ±1/2}`. Parameters shared between gates
/// fall back to central differences.
pub fn gradient(circuit: &Circuit, params: &[f64], upstream: [f64; 2]) -> Result<Gradient, SimError> {
    let out = output_qubit(circuit)?;
    let u = weights(circuit, params, out)?;
    let distribution = normalise(u);
    let mut grad = vec![0.0; params.len()];
    if distribution.degenerate {
        return Ok(Gradient { distribution, grad });
    }
    let s = u[0] + u[1];
    // d(upstream · p)/du_j = (upstream_j − upstream · p) / s
    let dot = upstream[0] * distribution.probs[0] + upstream[1] * distribution.probs[1];
    let du = [(upstream[0] - dot) / s, (upstream[1] - dot) / s];

    let mut uses: Vec<Vec<GateKind>> = vec![Vec::new(); params.len()];
    for g in &circuit.gates {
        if let Some(Angle::Symbol(i)) = g.param {
            uses[i].push(g.kind);
        }
    }
    let mut shifted = params.to_vec();
    let mut at = |i: usize, delta: f64| -> Result<[f64; 2], SimError> {
        shifted[i] = params[i] + delta;
        let w = weights(circuit, &shifted, out);
        shifted[i] = params[i];
        w
    };
    let diff = |a: [f64; 2], b: [f64; 2], scale: f64| [scale * (a[0] - b[0]), scale * (a[1] - b[1])];
    for (i, kinds) in uses.iter().enumerate() {
        let d = match kinds.as_slice() {
            [] => continue,
            [GateKind::RX | GateKind::RY | GateKind::RZ] => diff(at(i, FRAC_PI_2)?, at(i, -FRAC_PI_2)?, 0.5),
            [GateKind::CRX | GateKind::CRZ] => {
                let dp = (SQRT_2 + 1.0) / (4.0 * SQRT_2);
                let dm = (SQRT_2 - 1.0) / (4.0 * SQRT_2);
                let near = diff(at(i, FRAC_PI_2)?, at(i, -FRAC_PI_2)?, dp);
                let far = diff(at(i, 3.0 * FRAC_PI_2)?, at(i, -3.0 * FRAC_PI_2)?, dm);
                [near[0] - far[0], near[1] - far[1]]
            }
            _ => diff(at(i, FD_STEP)?, at(i, -FD_STEP)?, 0.5 / FD_STEP),
        };
        grad[i] = du[0] * d[0] + du[1] * d[1];
    }
    Ok(Gradient { distribution, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::cup_block;
    use crate::symbol::Symbol;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circuit(n: usize, gates: Vec<Gate>, postselect: Vec<usize>, outputs: Vec<usize>, n_symbols: usize) -> Circuit {
        Circuit {
            n_qubits: n,
            gates,
            postselect,
            output_qubits: outputs,
            symbols: (0..n_symbols).map(|i| Symbol::new("w", "n", i)).collect(),
        }
    }

    fn gate(kind: GateKind, qubits: Vec<usize>, param: Option<usize>) -> Gate {
        Gate { kind, qubits, param: param.map(Angle::Symbol) }
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn single_gate_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut s = StateVector::zero(1);
        apply(&mut s, &gate(GateKind::H, vec![0], None), None).unwrap();
        assert!(close(s.amps[0], c(h, 0.0), 1e-15) && close(s.amps[1], c(h, 0.0), 1e-15));

        let mut s = StateVector::zero(1);
        apply(&mut s, &gate(GateKind::RZ, vec![0], Some(0)), Some(0.7)).unwrap();
        assert!(close(s.amps[0], Complex64::from_polar(1.0, -0.35), 1e-15));
        assert_eq!(s.amps[1], c(0.0, 0.0));

        // |10⟩ in the usual left-to-right reading: qubit 0 set.
        let mut s = StateVector::from_amplitudes(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        apply(&mut s, &gate(GateKind::CNOT, vec![0, 1], None), None).unwrap();
        assert_eq!(s.amps[3], c(1.0, 0.0));

        let mut s = StateVector::zero(1);
        assert_eq!(
            apply(&mut s, &gate(GateKind::H, vec![1], None), None),
            Err(SimError::IndexOutOfRange { qubit: 1, n: 1 })
        );
    }

    #[test]
    fn cup_block_on_basis_and_orthogonal_states() {
        let (gates, post) = cup_block(0, 1);
        let cup = circuit(2, gates, post.to_vec(), vec![], 0);
        assert!((run(&cup, &[]).unwrap().survival_norm - 0.5).abs() < 1e-15);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = StateVector::from_amplitudes(2, vec![c(0.0, 0.0), c(h, 0.0), c(h, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(run_from_state(&cup, &[], psi), Err(SimError::ZeroSurvival(_))));
    }

    #[test]
    fn empty_circuit_and_bit_flip() {
        let empty = circuit(1, vec![], vec![], vec![0], 0);
        let r = run(&empty, &[]).unwrap();
        assert_eq!(r.amplitudes, vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(r.survival_norm, 1.0);
        assert_eq!(sentence_distribution(&empty, &[]).unwrap().probs, [1.0, 0.0]);

        let flip = circuit(1, vec![gate(GateKind::RX, vec![0], Some(0))], vec![], vec![0], 1);
        let p = sentence_distribution(&flip, &[std::f64::consts::PI]).unwrap().probs;
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn output_arity_is_checked() {
        let two = circuit(2, vec![], vec![], vec![0, 1], 0);
        assert_eq!(sentence_distribution(&two, &[]), Err(SimError::WrongOutputArity(2)));
    }

    #[test]
    fn degenerate_postselection_gives_uniform() {
        let dead = circuit(2, vec![gate(GateKind::RX, vec![1], Some(0))], vec![1], vec![0], 1);
        let d = sentence_distribution(&dead, &[std::f64::consts::PI]).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.probs, [0.5, 0.5]);
        let g = gradient(&dead, &[std::f64::consts::PI], [1.0, -1.0]).unwrap();
        assert_eq!(g.grad, vec![0.0]);
    }

    #[test]
    fn rx_derivative_at_half_pi() {
        let rx = circuit(1, vec![gate(GateKind::RX, vec![0], Some(0))], vec![], vec![0], 1);
        let g = gradient(&rx, &[FRAC_PI_2], [0.0, 1.0]).unwrap();
        assert!((g.grad[0] - 0.5).abs() < 1e-12);
    }

    const ALL_KINDS: [GateKind; 7] =
        [GateKind::H, GateKind::RX, GateKind::RY, GateKind::RZ, GateKind::CNOT, GateKind::CRZ, GateKind::CRX];

    fn random_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize, n_symbols: usize) -> Circuit {
        random_circuit_of(rng, &ALL_KINDS, n, len, n_symbols)
    }

    fn random_circuit_of(rng: &mut ChaCha8Rng, kinds: &[GateKind], n: usize, len: usize, n_symbols: usize) -> Circuit {
        let gates = (0..len)
            .map(|_| {
                let kind = kinds[rng.random_range(0..kinds.len())];
                let a = rng.random_range(0..n);
                let qubits = if kind.arity() == 2 { vec![a, (a + rng.random_range(1..n)) % n] } else { vec![a] };
                let param = kind.is_parameterised().then(|| rng.random_range(0..n_symbols));
                gate(kind, qubits, param)
            })
            .collect();
        circuit(n, gates, vec![n - 1], vec![0], n_symbols)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let c = random_circuit(&mut rng, 3, 14, 5);
            let params: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..6.3)).collect();
            let up = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let g = gradient(&c, &params, up).unwrap();
            for i in 0..params.len() {
                let f = |d: f64| {
                    let mut p = params.clone();
                    p[i] += d;
                    let q = sentence_distribution(&c, &p).unwrap().probs;
                    up[0] * q[0] + up[1] * q[1]
                };
                let h = 1e-5;
                let fd = (f(h) - f(-h)) / (2.0 * h);
                assert!((g.grad[i] - fd).abs() < 1e-7, "{} vs {fd}", g.grad[i]);
            }
        }
    }

    #[test]
    fn unitarity_and_periodicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let c = random_circuit(&mut rng, 4, 20, 6);
            let params: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..6.3)).collect();
            assert!((evolve(&c, &params).unwrap().norm_sqr() - 1.0).abs() < 1e-10);
            // A 2π shift flips the sign of a rotation matrix. That is a global
            // phase for uncontrolled rotations only.
            let uncontrolled = [GateKind::H, GateKind::RX, GateKind::RY, GateKind::RZ, GateKind::CNOT];
            let c = random_circuit_of(&mut rng, &uncontrolled, 4, 20, 6);
            let shifted: Vec<f64> = params.iter().map(|p| p + 2.0 * std::f64::consts::PI).collect();
            let a = sentence_distribution(&c, &params).unwrap().probs;
            let b = sentence_distribution(&c, &shifted).unwrap().probs;
            assert!((a[0] - b[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn postselection_is_linear_in_the_start_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let circ = random_circuit(&mut rng, 3, 12, 4);
        let params = [0.3, 1.1, 2.0, 4.0];
        let amps: Vec<Complex64> = (0..8).map(|_| c64(&mut rng)).collect();
        let alpha = c(0.4, -1.3);
        let a = run_from_state(&circ, &params, StateVector::from_amplitudes(3, amps.clone()).unwrap()).unwrap();
        let scaled = amps.iter().map(|x| x * alpha).collect();
        let b = run_from_state(&circ, &params, StateVector::from_amplitudes(3, scaled).unwrap()).unwrap();
        for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
            assert!(close(x * alpha, *y, 1e-12));
        }
        assert!((a.survival_norm * alpha.norm_sqr() - b.survival_norm).abs() < 1e-12);
    }

    fn c64(rng: &mut ChaCha8Rng) -> Complex64 {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }
}
