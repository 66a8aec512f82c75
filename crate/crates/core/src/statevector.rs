//! Dense 2^N state-vector simulation: gate kernels, the heuristic circuit,
//! exact expectations, exact Jastrow projection, and ground-state solvers.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jastrow::JastrowParams;
use crate::pauli::{Axis, PauliSum};

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Dense amplitudes over a 2^N register. Qubit k is bit k of the index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    num_qubits: usize,
}

impl StateVector {
    /// |0...0>
    pub fn zero_state(num_qubits: usize) -> Self {
        Self::basis_state(num_qubits, 0)
    }

    pub fn basis_state(num_qubits: usize, index: u64) -> Self {
        let dim = 1usize << num_qubits;
        assert!((index as usize) < dim, "basis index out of range");
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index as usize] = Complex64::new(1.0, 0.0);
        Self { amps, num_qubits }
    }

    /// Build from raw amplitudes, normalizing to unit norm.
    pub fn from_amplitudes(num_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1usize << num_qubits {
            return Err(Error::SizeMismatch {
                left: amps.len(),
                right: 1usize << num_qubits,
            });
        }
        let mut sv = Self { amps, num_qubits };
        let norm = sv.norm();
        if norm < 1e-300 {
            return Err(Error::VanishingNorm(1e-300));
        }
        for a in &mut sv.amps {
            *a /= norm;
        }
        Ok(sv)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: u64) -> Complex64 {
        self.amps[index as usize]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probability(&self, index: u64) -> f64 {
        self.amps[index as usize].norm_sqr()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Debug dump: one `index amplitude_re amplitude_im` row per amplitude
    /// with magnitude above 1e-12.
    pub fn dump_nonzero<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm() > 1e-12 {
                writeln!(w, "{} {} {}", i, a.re, a.im)?;
            }
        }
        Ok(())
    }

    pub(crate) fn apply_single_qubit_pub(&mut self, target: usize, m: [Complex64; 4]) {
        self.apply_single_qubit(target, m);
    }

    /// Apply one gate to a copy of the state. `Ry` gates need an angle.
    pub fn with_gate(&self, gate: Gate, angle: Option<f64>) -> Result<StateVector> {
        let mut probe = Circuit::new(self.num_qubits);
        probe.push(gate)?;
        let mut out = self.clone();
        match gate {
            Gate::Ry { target } => {
                let angle = angle.ok_or(Error::ParameterCount {
                    expected: 1,
                    got: 0,
                })?;
                out.apply_single_qubit(target, ry_matrix(angle));
            }
            Gate::H { target } => out.apply_single_qubit(target, hadamard_matrix()),
            Gate::Cnot { control, target } => out.apply_cnot(control, target),
            Gate::PostRotation { axis, target } => {
                if let Some(m) = post_rotation_matrix(axis) {
                    out.apply_single_qubit(target, m);
                }
            }
        }
        Ok(out)
    }

    fn apply_single_qubit(&mut self, target: usize, m: [Complex64; 4]) {
        let bit = 1usize << target;
        for base in 0..self.amps.len() {
            if base & bit != 0 {
                continue;
            }
            let pair = base | bit;
            let a = self.amps[base];
            let b = self.amps[pair];
            self.amps[base] = m[0] * a + m[1] * b;
            self.amps[pair] = m[2] * a + m[3] * b;
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cbit != 0 && i & tbit == 0 {
                self.amps.swap(i, i | tbit);
            }
        }
    }
}

/// Circuit gate. `Ry` gates are parameterized and consume one angle from the
/// parameter vector, in circuit order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Ry { target: usize },
    H { target: usize },
    Cnot { control: usize, target: usize },
    PostRotation { axis: Axis, target: usize },
}

/// Ordered gate sequence over a fixed register, started from |0...0>.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let check = |index: usize| -> Result<()> {
            if index >= self.num_qubits {
                Err(Error::QubitIndex {
                    index,
                    num_qubits: self.num_qubits,
                })
            } else {
                Ok(())
            }
        };
        match gate {
            Gate::Ry { target } | Gate::H { target } | Gate::PostRotation { target, .. } => {
                check(target)?
            }
            Gate::Cnot { control, target } => {
                check(control)?;
                check(target)?;
                if control == target {
                    return Err(Error::QubitIndex {
                        index: target,
                        num_qubits: self.num_qubits,
                    });
                }
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Number of Ry parameter slots, in gate order.
    pub fn num_params(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Ry { .. }))
            .count()
    }
}

/// The heuristic ansatz: d blocks, each of L parametrized Ry rotations
/// followed by a CNOT cascade with qubit i controlling qubit i+1.
pub fn build_ry_cnot(num_qubits: usize, depth: usize) -> Circuit {
    assert!(num_qubits >= 1, "need at least one qubit");
    let mut c = Circuit::new(num_qubits);
    for _ in 0..depth {
        for q in 0..num_qubits {
            c.push(Gate::Ry { target: q }).expect("index in range");
        }
        for q in 0..num_qubits.saturating_sub(1) {
            c.push(Gate::Cnot {
                control: q,
                target: q + 1,
            })
            .expect("index in range");
        }
    }
    c
}

/// A Hadamard on every qubit (the equal-superposition preparation).
pub fn hadamard_wall(num_qubits: usize) -> Circuit {
    let mut c = Circuit::new(num_qubits);
    for q in 0..num_qubits {
        c.push(Gate::H { target: q }).expect("index in range");
    }
    c
}

fn ry_matrix(angle: f64) -> [Complex64; 4] {
    let (s, c) = (angle / 2.0).sin_cos();
    [
        Complex64::new(c, 0.0),
        Complex64::new(-s, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(c, 0.0),
    ]
}

fn hadamard_matrix() -> [Complex64; 4] {
    [
        Complex64::new(SQRT_HALF, 0.0),
        Complex64::new(SQRT_HALF, 0.0),
        Complex64::new(SQRT_HALF, 0.0),
        Complex64::new(-SQRT_HALF, 0.0),
    ]
}

/// Post-rotation mapping axis eigenstates onto the computational basis.
/// Z and I need no rotation; X uses the Hadamard; Y maps |+i>, |-i> to
/// |0>, |1>.
pub fn post_rotation_matrix(axis: Axis) -> Option<[Complex64; 4]> {
    match axis {
        Axis::Z | Axis::I => None,
        Axis::X => Some(hadamard_matrix()),
        Axis::Y => Some([
            Complex64::new(SQRT_HALF, 0.0),
            Complex64::new(0.0, -SQRT_HALF),
            Complex64::new(SQRT_HALF, 0.0),
            Complex64::new(0.0, SQRT_HALF),
        ]),
    }
}

/// Run a circuit from |0...0> with the given Ry angles.
pub fn run_circuit(circuit: &Circuit, theta: &[f64]) -> Result<StateVector> {
    if theta.len() != circuit.num_params() {
        return Err(Error::ParameterCount {
            expected: circuit.num_params(),
            got: theta.len(),
        });
    }
    let mut sv = StateVector::zero_state(circuit.num_qubits());
    let mut next_param = 0;
    for gate in circuit.gates() {
        match *gate {
            Gate::Ry { target } => {
                sv.apply_single_qubit(target, ry_matrix(theta[next_param]));
                next_param += 1;
            }
            Gate::H { target } => sv.apply_single_qubit(target, hadamard_matrix()),
            Gate::Cnot { control, target } => sv.apply_cnot(control, target),
            Gate::PostRotation { axis, target } => {
                if let Some(m) = post_rotation_matrix(axis) {
                    sv.apply_single_qubit(target, m);
                }
            }
        }
    }
    Ok(sv)
}

/// Apply an operator to raw amplitudes (unnormalized output).
pub fn apply_pauli_sum_raw(h: &PauliSum, amps: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    for (letters, coeff) in h.terms() {
        let string = crate::pauli::PauliString::new(letters.to_vec());
        for (j, &a) in amps.iter().enumerate() {
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (k, phase) = string.apply_to_basis(j as u64);
            out[k as usize] += coeff * phase * a;
        }
    }
    out
}

/// `<ψ|H|ψ>` for a Hermitian operator. The imaginary residue is checked
/// against 1e-8 and discarded.
pub fn expectation(h: &PauliSum, psi: &StateVector) -> Result<f64> {
    if h.num_qubits() != psi.num_qubits() {
        return Err(Error::SizeMismatch {
            left: h.num_qubits(),
            right: psi.num_qubits(),
        });
    }
    if !h.is_hermitian(1e-10) {
        return Err(Error::NonHermitian(h.max_imag()));
    }
    let h_psi = apply_pauli_sum_raw(h, psi.amplitudes());
    let value: Complex64 = psi
        .amplitudes()
        .iter()
        .zip(&h_psi)
        .map(|(a, b)| a.conj() * b)
        .sum();
    if value.im.abs() > 1e-8 {
        return Err(Error::ImaginaryResidue(value.im));
    }
    Ok(value.re)
}

/// Multiply each amplitude by `exp(Σ_{s<t} λ_class(s,t) z_s z_t)` and
/// renormalize. Weights are positive, so amplitude signs are unchanged.
pub fn apply_jastrow_exact(psi: &StateVector, jp: &JastrowParams) -> Result<StateVector> {
    if jp.num_qubits() != psi.num_qubits() {
        return Err(Error::SizeMismatch {
            left: jp.num_qubits(),
            right: psi.num_qubits(),
        });
    }
    // Shift the exponent by its maximum over the support so the weights
    // stay inside f64 range; the shift cancels in the normalization.
    let mut max_log = f64::NEG_INFINITY;
    let mut logs = vec![0.0; psi.dim()];
    for (i, a) in psi.amplitudes().iter().enumerate() {
        if a.norm_sqr() > 0.0 {
            let lw = jp.log_weight(i as u64);
            logs[i] = lw;
            if lw > max_log {
                max_log = lw;
            }
        }
    }
    if !max_log.is_finite() {
        return Err(Error::VanishingNorm(1e-300));
    }
    let mut amps = psi.amplitudes().to_vec();
    for (i, a) in amps.iter_mut().enumerate() {
        if a.norm_sqr() > 0.0 {
            *a *= (logs[i] - max_log).exp();
        }
    }
    let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if norm_sq.sqrt() < 1e-300 {
        return Err(Error::VanishingNorm(1e-300));
    }
    let inv = 1.0 / norm_sq.sqrt();
    for a in &mut amps {
        *a *= inv;
    }
    Ok(StateVector {
        amps,
        num_qubits: psi.num_qubits(),
    })
}

/// Dense matrix of an operator, built column-by-column from the action of
/// each term on basis states.
pub fn pauli_sum_to_dense(h: &PauliSum) -> DMatrix<Complex64> {
    let dim = 1usize << h.num_qubits();
    let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for (letters, coeff) in h.terms() {
        let string = crate::pauli::PauliString::new(letters.to_vec());
        for j in 0..dim {
            let (k, phase) = string.apply_to_basis(j as u64);
            m[(k as usize, j)] += coeff * phase;
        }
    }
    m
}

/// Register size above which the ground-state solver switches from dense
/// diagonalization to the iterative extremal-eigenvalue solver.
pub const DENSE_SOLVER_MAX_QUBITS: usize = 12;
const LANCZOS_MAX_ITER: usize = 5000;
const LANCZOS_TOL: f64 = 1e-10;

/// Minimal eigenvalue and a unit-norm eigenvector of a Hermitian operator.
/// Dense up to [`DENSE_SOLVER_MAX_QUBITS`] qubits, Lanczos beyond (N <= 16).
pub fn exact_ground_state(h: &PauliSum) -> Result<(f64, StateVector)> {
    let n = h.num_qubits();
    if n > 16 {
        return Err(Error::RegisterTooLarge { got: n, limit: 16 });
    }
    if !h.is_hermitian(1e-10) {
        return Err(Error::NonHermitian(h.max_imag()));
    }
    if n <= DENSE_SOLVER_MAX_QUBITS {
        let m = pauli_sum_to_dense(h);
        let eig = m.symmetric_eigen();
        let (min_idx, &energy) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("real eigenvalues"))
            .expect("non-empty spectrum");
        let column = eig.eigenvectors.column(min_idx);
        let ground = StateVector::from_amplitudes(n, column.iter().copied().collect())?;
        Ok((energy, ground))
    } else {
        ground_state_lanczos(h, LANCZOS_MAX_ITER, LANCZOS_TOL)
    }
}

/// Lanczos iteration with full reorthogonalization for the minimal
/// eigenpair of a Hermitian operator, applied matrix-free.
pub(crate) fn ground_state_lanczos(
    h: &PauliSum,
    max_iter: usize,
    tol: f64,
) -> Result<(f64, StateVector)> {
    let n = h.num_qubits();
    let dim = 1usize << n;
    let m_cap = max_iter.min(dim);

    let mut rng = ChaCha8Rng::seed_from_u64(0x6a71_6373);
    let mut q: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let norm = vec_norm(&q);
    q.iter_mut().for_each(|a| *a /= norm);

    let mut basis: Vec<Vec<Complex64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut prev_ground = f64::MAX;

    for j in 0..m_cap {
        let mut w = apply_pauli_sum_raw(h, &basis[j]);
        let a = basis[j]
            .iter()
            .zip(&w)
            .map(|(qi, wi)| (qi.conj() * wi).re)
            .sum::<f64>();
        alpha.push(a);
        for (wi, qi) in w.iter_mut().zip(&basis[j]) {
            *wi -= qi * a;
        }
        if j > 0 {
            let b = beta[j - 1];
            for (wi, qi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= qi * b;
            }
        }
        // Full reorthogonalization keeps the Krylov basis numerically clean.
        for prev in &basis {
            let overlap: Complex64 = prev.iter().zip(&w).map(|(p, wi)| p.conj() * wi).sum();
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi -= pi * overlap;
            }
        }
        let b = vec_norm(&w);

        let exhausted = b < 1e-14 || j + 1 == m_cap || basis.len() == dim;
        if (j + 1) % 10 == 0 || exhausted {
            let (value, _) = tridiag_ground(&alpha, &beta);
            if (prev_ground - value).abs() < tol || b < 1e-14 || basis.len() == dim {
                return lanczos_eigenvector(h.num_qubits(), &alpha, &beta, &basis);
            }
            prev_ground = value;
        }
        if exhausted {
            break;
        }
        beta.push(b);
        let next: Vec<Complex64> = w.iter().map(|wi| wi / b).collect();
        basis.push(next);
    }
    Err(Error::NonConvergence(m_cap))
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn tridiag_ground(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i > 0 {
            t[(i, i - 1)] = beta[i - 1];
            t[(i - 1, i)] = beta[i - 1];
        }
    }
    let eig = t.symmetric_eigen();
    let (idx, &value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("real eigenvalues"))
        .expect("non-empty spectrum");
    (value, eig.eigenvectors.column(idx).iter().copied().collect())
}

fn lanczos_eigenvector(
    num_qubits: usize,
    alpha: &[f64],
    beta: &[f64],
    basis: &[Vec<Complex64>],
) -> Result<(f64, StateVector)> {
    let (value, coeffs) = tridiag_ground(alpha, beta);
    let dim = basis[0].len();
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    for (c, q) in coeffs.iter().zip(basis) {
        for (vi, qi) in v.iter_mut().zip(q) {
            *vi += qi * *c;
        }
    }
    let sv = StateVector::from_amplitudes(num_qubits, v)?;
    Ok((value, sv))
}
