//! The entangled-copy sampling path: extended circuits, shot sampling,
//! Jastrow reweighting of counts, reduced-probability reconstruction for
//! positive and sign-solved states, and energy assembly.
//!
//! Measured outcomes over the 2L-qubit extended register encode the integer
//! `j * 2^L + i`: the ancilla readout `j` sits in the high bits, the
//! (post-rotated) system readout `i` in the low bits.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jastrow::JastrowParams;
use crate::pauli::{
    build_model, diagonal_expectation, group_by_basis, rotate_to_diagonal, Axis,
    MeasurementBasis, ModelSpec, PauliSum,
};
use crate::statevector::{run_circuit, Circuit, Gate, StateVector};

/// How measured counts are reweighted by the Jastrow factor.
///
/// `AmplitudeLevel` applies `w(j) = exp(2 J(j))` so the estimator matches the
/// amplitude-level projector exactly; `Literal` applies `w(j) = exp(J(j))`,
/// which acts as `exp(J/2)` on amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightConvention {
    AmplitudeLevel,
    Literal,
}

impl Default for WeightConvention {
    fn default() -> Self {
        WeightConvention::AmplitudeLevel
    }
}

impl WeightConvention {
    pub fn exponent_factor(self) -> f64 {
        match self {
            WeightConvention::AmplitudeLevel => 2.0,
            WeightConvention::Literal => 1.0,
        }
    }
}

/// Shot-sampling parameters. `shots` counts measurements per basis;
/// repetitions derive their RNG streams as `seed + repetition`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SamplingConfig {
    pub shots: u64,
    pub m_rep: usize,
    pub seed: u64,
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots < 1 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if self.m_rep < 1 {
            return Err(Error::Config("m_rep must be at least 1".into()));
        }
        Ok(())
    }
}

/// Bit-string counts over a register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsTable {
    counts: BTreeMap<u64, u64>,
    shots: u64,
    register_size: usize,
}

impl CountsTable {
    pub fn from_pairs(register_size: usize, pairs: &[(u64, u64)]) -> Result<Self> {
        let mut counts = BTreeMap::new();
        let mut shots = 0u64;
        let limit = 1u64 << register_size;
        for &(index, count) in pairs {
            if index >= limit {
                return Err(Error::Parse(format!(
                    "outcome {index} out of range for {register_size} bits"
                )));
            }
            if count == 0 {
                continue;
            }
            *counts.entry(index).or_insert(0) += count;
            shots += count;
        }
        Ok(Self {
            counts,
            shots,
            register_size,
        })
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn register_size(&self) -> usize {
        self.register_size
    }

    pub fn count(&self, index: u64) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }

    pub fn num_outcomes(&self) -> usize {
        self.counts.len()
    }
}

/// Normalized bit-string probabilities with sparse storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist {
    probs: BTreeMap<u64, f64>,
    register_size: usize,
}

impl ProbDist {
    /// Build from explicit probabilities; they must be nonnegative and sum
    /// to one within 1e-9.
    pub fn from_pairs(register_size: usize, pairs: &[(u64, f64)]) -> Result<Self> {
        let dist = Self::from_unnormalized(register_size, pairs.iter().copied())?;
        let total: f64 = pairs.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Unnormalized(total));
        }
        Ok(dist)
    }

    /// Build from nonnegative weights, normalizing to one.
    pub fn from_unnormalized(
        register_size: usize,
        pairs: impl Iterator<Item = (u64, f64)>,
    ) -> Result<Self> {
        let mut probs = BTreeMap::new();
        let mut total = 0.0;
        let limit = 1u64 << register_size;
        for (index, p) in pairs {
            if index >= limit {
                return Err(Error::Parse(format!(
                    "outcome {index} out of range for {register_size} bits"
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Unnormalized(p));
            }
            if p > 0.0 {
                *probs.entry(index).or_insert(0.0) += p;
                total += p;
            }
        }
        if total <= 0.0 {
            return Err(Error::Unnormalized(total));
        }
        for p in probs.values_mut() {
            *p /= total;
        }
        Ok(Self {
            probs,
            register_size,
        })
    }

    pub fn from_counts(table: &CountsTable) -> Result<Self> {
        Self::from_unnormalized(
            table.register_size(),
            table.iter().map(|(i, c)| (i, c as f64)),
        )
    }

    /// Exact outcome distribution of a state in the computational basis.
    pub fn from_state(psi: &StateVector) -> Result<Self> {
        Self::from_unnormalized(
            psi.num_qubits(),
            psi.amplitudes()
                .iter()
                .enumerate()
                .map(|(i, a)| (i as u64, a.norm_sqr())),
        )
    }

    pub fn register_size(&self) -> usize {
        self.register_size
    }

    pub fn prob(&self, index: u64) -> f64 {
        self.probs.get(&index).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.probs.iter().map(|(&i, &p)| (i, p))
    }

    pub fn num_outcomes(&self) -> usize {
        self.probs.len()
    }
}

/// Euclidean distance `(Σ_i |p(i) - q(i)|^2)^{1/2}` between distributions.
pub fn reconstruction_error(p: &ProbDist, q: &ProbDist) -> Result<f64> {
    if p.register_size() != q.register_size() {
        return Err(Error::SizeMismatch {
            left: p.register_size(),
            right: q.register_size(),
        });
    }
    let mut keys: Vec<u64> = p.iter().map(|(i, _)| i).collect();
    keys.extend(q.iter().map(|(i, _)| i));
    keys.sort_unstable();
    keys.dedup();
    let sum: f64 = keys
        .iter()
        .map(|&i| {
            let d = p.prob(i) - q.prob(i);
            d * d
        })
        .sum();
    Ok(sum.sqrt())
}

/// Extend a system circuit with the ancilla copy: CNOT fan-out from each
/// system qubit onto its ancilla partner, then the basis post-rotations on
/// the system register only. Ancillas are always read in Z.
pub fn build_entangled_copy(circuit: &Circuit, basis: &MeasurementBasis) -> Result<Circuit> {
    let l = circuit.num_qubits();
    if basis.len() != l {
        return Err(Error::SizeMismatch {
            left: basis.len(),
            right: l,
        });
    }
    let mut extended = Circuit::new(2 * l);
    for gate in circuit.gates() {
        extended.push(*gate)?;
    }
    for k in 0..l {
        extended.push(Gate::Cnot {
            control: k,
            target: l + k,
        })?;
    }
    for (k, &axis) in basis.axes().iter().enumerate() {
        if axis.is_rotated() {
            extended.push(Gate::PostRotation { axis, target: k })?;
        }
    }
    Ok(extended)
}

/// Entangled-copy preparation applied directly to a state (for inputs that
/// are not circuit outputs): writes the amplitudes onto the doubled
/// register with ancilla = system, then post-rotates the system qubits.
pub fn entangled_copy_of_state(psi: &StateVector, basis: &MeasurementBasis) -> Result<StateVector> {
    let l = psi.num_qubits();
    if basis.len() != l {
        return Err(Error::SizeMismatch {
            left: basis.len(),
            right: l,
        });
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << (2 * l)];
    for (j, &a) in psi.amplitudes().iter().enumerate() {
        amps[(j << l) | j] = a;
    }
    let mut extended = StateVector::from_amplitudes(2 * l, amps)?;
    for (k, &axis) in basis.axes().iter().enumerate() {
        if let Some(m) = crate::statevector::post_rotation_matrix(axis) {
            extended.apply_single_qubit_pub(k, m);
        }
    }
    Ok(extended)
}

/// Distribution of the system register measured directly in a basis,
/// without the entangled copy: post-rotate, then read.
pub fn direct_distribution(psi: &StateVector, basis: &MeasurementBasis) -> Result<ProbDist> {
    if basis.len() != psi.num_qubits() {
        return Err(Error::SizeMismatch {
            left: basis.len(),
            right: psi.num_qubits(),
        });
    }
    let mut rotated = psi.clone();
    for (k, &axis) in basis.axes().iter().enumerate() {
        if let Some(m) = crate::statevector::post_rotation_matrix(axis) {
            rotated.apply_single_qubit_pub(k, m);
        }
    }
    ProbDist::from_state(&rotated)
}

/// Multinomial draw of `shots` outcomes from |amplitude|^2.
pub fn sample_counts_with_rng<R: Rng>(
    psi: &StateVector,
    shots: u64,
    rng: &mut R,
) -> CountsTable {
    let mut cumulative: Vec<(f64, u64)> = Vec::new();
    let mut acc = 0.0;
    for (i, a) in psi.amplitudes().iter().enumerate() {
        let p = a.norm_sqr();
        if p > 0.0 {
            acc += p;
            cumulative.push((acc, i as u64));
        }
    }
    let total = acc;
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for _ in 0..shots {
        let u = rng.gen::<f64>() * total;
        let pos = cumulative.partition_point(|&(c, _)| c < u);
        let idx = cumulative[pos.min(cumulative.len() - 1)].1;
        *counts.entry(idx).or_insert(0) += 1;
    }
    CountsTable {
        counts,
        shots,
        register_size: psi.num_qubits(),
    }
}

/// Deterministic multinomial sampling seeded from the config.
pub fn sample_counts(psi: &StateVector, cfg: &SamplingConfig) -> CountsTable {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    sample_counts_with_rng(psi, cfg.shots, &mut rng)
}

fn reweight_impl(
    register_size: usize,
    entries: impl Iterator<Item = (u64, f64)>,
    jp: &JastrowParams,
    convention: WeightConvention,
) -> Result<ProbDist> {
    let l = jp.num_qubits();
    if register_size != 2 * l {
        return Err(Error::SizeMismatch {
            left: register_size,
            right: 2 * l,
        });
    }
    let factor = convention.exponent_factor();
    let items: Vec<(u64, f64)> = entries.collect();
    // Exponents are cached per distinct ancilla string and shifted by their
    // maximum: the renormalization cancels the shift and the weights stay
    // finite.
    let mut exps: BTreeMap<u64, f64> = BTreeMap::new();
    let mut max_exp = f64::NEG_INFINITY;
    for &(index, _) in &items {
        let ancilla = index >> l;
        let e = *exps
            .entry(ancilla)
            .or_insert_with(|| factor * jp.log_weight(ancilla));
        if e > max_exp {
            max_exp = e;
        }
    }
    if !max_exp.is_finite() {
        return Err(Error::AllZeroWeight);
    }
    let weights: BTreeMap<u64, f64> = exps
        .into_iter()
        .map(|(j, e)| (j, (e - max_exp).exp()))
        .collect();
    let weighted = items
        .iter()
        .map(|&(index, value)| (index, value * weights[&(index >> l)]));
    ProbDist::from_unnormalized(register_size, weighted).map_err(|_| Error::AllZeroWeight)
}

/// Reweight raw counts over the extended register by the Jastrow factor of
/// the ancilla substring, then renormalize.
pub fn reweight(
    raw: &CountsTable,
    jp: &JastrowParams,
    convention: WeightConvention,
) -> Result<ProbDist> {
    reweight_impl(
        raw.register_size(),
        raw.iter().map(|(i, c)| (i, c as f64)),
        jp,
        convention,
    )
}

/// Reweight an already-normalized extended distribution (exact-probability
/// pipelines).
pub fn reweight_dist(
    raw: &ProbDist,
    jp: &JastrowParams,
    convention: WeightConvention,
) -> Result<ProbDist> {
    reweight_impl(raw.register_size(), raw.iter(), jp, convention)
}

/// The reconstruction matrix `Λ_b(i, j) = 2^{m/2} U_b(i, j)` where `U_b` is
/// the tensor product of the per-qubit post-rotations and `m` counts the
/// genuinely rotated axes.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaMatrix {
    entries: DMatrix<Complex64>,
    basis: MeasurementBasis,
}

impl LambdaMatrix {
    pub fn basis(&self) -> &MeasurementBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, i: u64, j: u64) -> Complex64 {
        self.entries[(i as usize, j as usize)]
    }
}

fn rotation_entry(axis: Axis, row: u64, col: u64) -> Complex64 {
    const R: f64 = std::f64::consts::FRAC_1_SQRT_2;
    match axis {
        Axis::Z | Axis::I => {
            if row == col {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        Axis::X => {
            if row == 1 && col == 1 {
                Complex64::new(-R, 0.0)
            } else {
                Complex64::new(R, 0.0)
            }
        }
        Axis::Y => match (row, col) {
            (0, 0) | (1, 0) => Complex64::new(R, 0.0),
            (0, 1) => Complex64::new(0.0, -R),
            _ => Complex64::new(0.0, R),
        },
    }
}

/// Dense `2^L x 2^L` reconstruction matrix for a measurement basis.
pub fn lambda_matrix(basis: &MeasurementBasis) -> Result<LambdaMatrix> {
    let l = basis.len();
    if l > 12 {
        return Err(Error::RegisterTooLarge { got: l, limit: 12 });
    }
    let dim = 1usize << l;
    let scale = 2f64.powf(basis.num_rotated() as f64 / 2.0);
    let mut entries = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for i in 0..dim {
        for j in 0..dim {
            let mut value = Complex64::new(scale, 0.0);
            for (k, &axis) in basis.axes().iter().enumerate() {
                let r = rotation_entry(axis, (i >> k) as u64 & 1, (j >> k) as u64 & 1);
                value *= r;
                if value == Complex64::new(0.0, 0.0) {
                    break;
                }
            }
            entries[(i, j)] = value;
        }
    }
    Ok(LambdaMatrix {
        entries,
        basis: basis.clone(),
    })
}

/// Sign weights attached to the reconstruction columns; ideal solutions sit
/// near ±1.
#[derive(Debug, Clone, PartialEq)]
pub struct SignVector(pub Vec<f64>);

impl SignVector {
    pub fn ones(dim: usize) -> Self {
        Self(vec![1.0; dim])
    }
}

fn reconstruct_amplitudes(
    pbar: &ProbDist,
    lambda: &LambdaMatrix,
    signs: Option<&[f64]>,
) -> Result<Vec<Complex64>> {
    let l = lambda.basis().len();
    if pbar.register_size() != 2 * l {
        return Err(Error::SizeMismatch {
            left: pbar.register_size(),
            right: 2 * l,
        });
    }
    let dim = 1usize << l;
    let mask = (dim - 1) as u64;
    let mut t = vec![Complex64::new(0.0, 0.0); dim];
    for (index, p) in pbar.iter() {
        let j = index >> l;
        let i = index & mask;
        let s = signs.map_or(1.0, |s| s[j as usize]);
        t[i as usize] += lambda.entry(i, j) * (s * p.sqrt());
    }
    Ok(t)
}

fn amplitudes_to_dist(t: &[Complex64], l: usize) -> Result<ProbDist> {
    let mut clipped = 0.0;
    let pairs: Vec<(u64, f64)> = t
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let p = a.norm_sqr();
            if p < 0.0 {
                clipped += -p;
                (i as u64, 0.0)
            } else {
                (i as u64, p)
            }
        })
        .collect();
    if clipped > 1e-6 {
        log::warn!("reconstruction clipped {clipped:.3e} of negative mass");
    }
    ProbDist::from_unnormalized(l, pairs.into_iter())
}

/// Recover the L-bit system distribution from the measured 2L-bit
/// distribution, assuming a positive-valued state:
/// `P(i) = |Σ_j Λ(i,j) sqrt(p̄(j 2^L + i))|^2`, renormalized. The sum runs
/// only over measured nonzero entries.
pub fn reconstruct_reduced(pbar: &ProbDist, lambda: &LambdaMatrix) -> Result<ProbDist> {
    let t = reconstruct_amplitudes(pbar, lambda, None)?;
    amplitudes_to_dist(&t, lambda.basis().len())
}

/// Sign-weighted variant used by the non-positive-state path.
pub fn reconstruct_with_signs(
    pbar: &ProbDist,
    lambda: &LambdaMatrix,
    signs: &SignVector,
) -> Result<ProbDist> {
    if signs.0.len() != lambda.dim() {
        return Err(Error::SizeMismatch {
            left: signs.0.len(),
            right: lambda.dim(),
        });
    }
    let t = reconstruct_amplitudes(pbar, lambda, Some(&signs.0))?;
    amplitudes_to_dist(&t, lambda.basis().len())
}

/// Result of the sign-recovery optimization.
#[derive(Debug, Clone)]
pub struct SignSolve {
    pub signs: SignVector,
    pub dist: ProbDist,
    /// Euclidean distance between the (unnormalized) reconstruction and the
    /// reference distribution at the returned signs.
    pub residual: f64,
    pub converged: bool,
}

/// Real roots of `a u^3 + b u^2 + c u + d = 0`.
fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 {
        return vec![];
    }
    let eps = 1e-14 * scale;
    if a.abs() < eps {
        if b.abs() < eps {
            if c.abs() < eps {
                return vec![];
            }
            return vec![-d / c];
        }
        let disc = c * c - 4.0 * b * d;
        if disc < 0.0 {
            return vec![];
        }
        let r = disc.sqrt();
        return vec![(-c + r) / (2.0 * b), (-c - r) / (2.0 * b)];
    }
    // Depressed form t^3 + p t + q with u = t - b / (3a).
    let shift = b / (3.0 * a);
    let p = c / a - shift * shift * 3.0;
    let q = 2.0 * shift.powi(3) - shift * c / a + d / a;
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p.powi(3);
    let mut roots = Vec::new();
    if disc > 0.0 {
        let sq = disc.sqrt();
        let t = (-half_q + sq).cbrt() + (-half_q - sq).cbrt();
        roots.push(t - shift);
    } else {
        // Three real roots via the trigonometric form.
        let r = (-third_p).max(0.0).sqrt();
        if r < 1e-300 {
            roots.push(-shift);
        } else {
            let cos_arg = (-half_q / r.powi(3)).clamp(-1.0, 1.0);
            let phi = cos_arg.acos() / 3.0;
            for k in 0..3 {
                let t = 2.0 * r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
                roots.push(t - shift);
            }
        }
    }
    roots
}

/// Minimize the quartic `Σ_k a_k u^k` on [-1, 1] exactly: the best of the
/// endpoints and the interior stationary points.
fn minimize_quartic(coeffs: &[f64; 5]) -> f64 {
    let eval = |u: f64| {
        coeffs[0] + u * (coeffs[1] + u * (coeffs[2] + u * (coeffs[3] + u * coeffs[4])))
    };
    let mut best_u = -1.0;
    let mut best_f = eval(-1.0);
    for candidate in std::iter::once(1.0).chain(
        cubic_roots(4.0 * coeffs[4], 3.0 * coeffs[3], 2.0 * coeffs[2], coeffs[1]).into_iter(),
    ) {
        if !(-1.0..=1.0).contains(&candidate) {
            continue;
        }
        let f = eval(candidate);
        if f < best_f {
            best_f = f;
            best_u = candidate;
        }
    }
    best_u
}

struct SignProblem {
    /// Per ancilla column j: the affected system rows and the complex
    /// contribution `Λ(i, j) sqrt(p̄(j 2^L + i))`.
    columns: Vec<Vec<(usize, Complex64)>>,
    reference: Vec<f64>,
    dim: usize,
}

impl SignProblem {
    fn new(pbar: &ProbDist, p0: &ProbDist, lambda: &LambdaMatrix) -> Result<Self> {
        let l = lambda.basis().len();
        if pbar.register_size() != 2 * l {
            return Err(Error::SizeMismatch {
                left: pbar.register_size(),
                right: 2 * l,
            });
        }
        if p0.register_size() != l {
            return Err(Error::SizeMismatch {
                left: p0.register_size(),
                right: l,
            });
        }
        let dim = 1usize << l;
        let mask = (dim - 1) as u64;
        let mut columns = vec![Vec::new(); dim];
        for (index, p) in pbar.iter() {
            let j = (index >> l) as usize;
            let i = (index & mask) as usize;
            columns[j].push((i, lambda.entry(i as u64, j as u64) * p.sqrt()));
        }
        let mut reference = vec![0.0; dim];
        for (i, p) in p0.iter() {
            reference[i as usize] = p;
        }
        Ok(Self {
            columns,
            reference,
            dim,
        })
    }

    fn apply(&self, signs: &[f64]) -> Vec<Complex64> {
        let mut t = vec![Complex64::new(0.0, 0.0); self.dim];
        for (j, column) in self.columns.iter().enumerate() {
            for &(i, c) in column {
                t[i] += c * signs[j];
            }
        }
        t
    }

    fn objective(&self, t: &[Complex64]) -> f64 {
        t.iter()
            .zip(&self.reference)
            .map(|(a, &p0)| {
                let d = a.norm_sqr() - p0;
                d * d
            })
            .sum()
    }

    /// One cyclic coordinate-descent sweep with exact per-coordinate quartic
    /// minimization; `t` is kept in sync. Returns the objective afterwards.
    fn sweep(&self, signs: &mut [f64], t: &mut [Complex64]) -> f64 {
        for (j, column) in self.columns.iter().enumerate() {
            if column.is_empty() {
                continue;
            }
            let s_old = signs[j];
            let mut coeffs = [0.0f64; 5];
            for &(i, c) in column {
                let rest = t[i] - c * s_old;
                let alpha = rest.norm_sqr() - self.reference[i];
                let beta = 2.0 * (rest.conj() * c).re;
                let gamma = c.norm_sqr();
                coeffs[0] += alpha * alpha;
                coeffs[1] += 2.0 * alpha * beta;
                coeffs[2] += beta * beta + 2.0 * alpha * gamma;
                coeffs[3] += 2.0 * beta * gamma;
                coeffs[4] += gamma * gamma;
            }
            let s_new = minimize_quartic(&coeffs);
            if s_new != s_old {
                for &(i, c) in column {
                    t[i] += c * (s_new - s_old);
                }
                signs[j] = s_new;
            }
        }
        self.objective(t)
    }

    /// Alternating pass: freeze the reconstruction phases, aim at the
    /// reference magnitudes, and descend the resulting quadratic exactly,
    /// coordinate by coordinate. Escapes the flat regions of the quartic.
    fn alternating_pass(&self, signs: &mut [f64], t: &mut [Complex64], rounds: usize) -> f64 {
        for _ in 0..rounds {
            let targets: Vec<Complex64> = t
                .iter()
                .zip(&self.reference)
                .map(|(ti, &p0)| {
                    let mag = p0.sqrt();
                    let norm = ti.norm();
                    if norm > 1e-300 {
                        ti / norm * mag
                    } else {
                        Complex64::new(mag, 0.0)
                    }
                })
                .collect();
            for _ in 0..4 {
                for (j, column) in self.columns.iter().enumerate() {
                    if column.is_empty() {
                        continue;
                    }
                    let s_old = signs[j];
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for &(i, c) in column {
                        let rest = t[i] - c * s_old;
                        num += (c.conj() * (targets[i] - rest)).re;
                        den += c.norm_sqr();
                    }
                    if den <= 0.0 {
                        continue;
                    }
                    let s_new = (num / den).clamp(-1.0, 1.0);
                    if s_new != s_old {
                        for &(i, c) in column {
                            t[i] += c * (s_new - s_old);
                        }
                        signs[j] = s_new;
                    }
                }
            }
        }
        self.objective(t)
    }

    /// Greedy pass restricted to the ±1 lattice.
    fn discrete_pass(&self, signs: &mut [f64], t: &mut [Complex64]) -> f64 {
        for (j, column) in self.columns.iter().enumerate() {
            if column.is_empty() {
                continue;
            }
            let s_old = signs[j];
            let mut best = (f64::INFINITY, s_old);
            for candidate in [-1.0, 1.0] {
                let mut f = 0.0;
                for &(i, c) in column {
                    let v = t[i] + c * (candidate - s_old);
                    let d = v.norm_sqr() - self.reference[i];
                    f += d * d;
                }
                if f < best.0 {
                    best = (f, candidate);
                }
            }
            if best.1 != s_old {
                for &(i, c) in column {
                    t[i] += c * (best.1 - s_old);
                }
                signs[j] = best.1;
            }
        }
        self.objective(t)
    }
}

const SIGN_MAX_SWEEPS: usize = 300;
const SIGN_RESTARTS: usize = 16;

/// Recover column signs for a non-positive state by minimizing the
/// Euclidean distance between the reconstructed distribution and the
/// reference `p0` measured without the entangled copy.
///
/// The search is a bounded derivative-free coordinate descent over
/// `s ∈ [-1, 1]^{2^L}` starting from all +1, escalating through discrete
/// ±1 passes and seeded ±1 restarts when the residual stays high.
/// Approximate solutions are accepted; non-convergence returns the best
/// signs found so far.
pub fn solve_signs(
    pbar: &ProbDist,
    p0: &ProbDist,
    basis: &MeasurementBasis,
) -> Result<SignSolve> {
    let lambda = lambda_matrix(basis)?;
    let problem = SignProblem::new(pbar, p0, &lambda)?;
    let dim = problem.dim;

    let run_local = |signs: &mut Vec<f64>| -> (f64, bool) {
        let mut t = problem.apply(signs);
        let mut f = problem.objective(&t);
        let mut converged = false;
        for _ in 0..SIGN_MAX_SWEEPS {
            let next = problem.sweep(signs, &mut t);
            if (f - next).abs() <= 1e-16 * f.max(1.0) || next < 1e-28 {
                f = next;
                converged = true;
                break;
            }
            f = next;
        }
        (f, converged)
    };

    let polish = |signs: &mut Vec<f64>| -> (f64, bool) {
        let mut t = problem.apply(signs);
        problem.alternating_pass(signs, &mut t, 30);
        let mut f = problem.objective(&t);
        for _ in 0..50 {
            let next = problem.discrete_pass(signs, &mut t);
            let stalled = (f - next).abs() <= 1e-16 * f.max(1.0);
            f = next;
            if stalled {
                break;
            }
        }
        let _ = f;
        run_local(signs)
    };

    let mut best_signs = vec![1.0; dim];
    let (mut best_f, mut best_converged) = run_local(&mut best_signs);

    if best_f > 1e-20 {
        let mut signs = best_signs.clone();
        let (f, conv) = polish(&mut signs);
        if f < best_f {
            best_f = f;
            best_signs = signs;
            best_converged = conv;
        }
    }

    if best_f.sqrt() > 1e-8 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7369_676e);
        for _ in 0..SIGN_RESTARTS {
            let mut signs: Vec<f64> = (0..dim)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let (f, conv) = polish(&mut signs);
            if f < best_f {
                best_f = f;
                best_signs = signs;
                best_converged = conv;
            }
            if best_f.sqrt() <= 1e-10 {
                break;
            }
        }
    }

    if !best_converged {
        log::warn!(
            "sign solve stopped at budget with residual {:.3e}; returning best so far",
            best_f.sqrt()
        );
    }
    let signs = SignVector(best_signs);
    let dist = reconstruct_with_signs(pbar, &lambda, &signs)?;
    Ok(SignSolve {
        signs,
        dist,
        residual: best_f.sqrt(),
        converged: best_converged,
    })
}

/// Precomputed evaluator for Jastrow refinement at fixed measured
/// distributions: reweighting, sign-weighted reconstruction, and the
/// diagonal expectation collapse into one pass over the measured entries.
/// The weight normalization cancels against the probability normalization,
/// so each reweighted energy needs only per-ancilla weight factors.
pub struct FixedCountsEnergy {
    bases: Vec<FixedBasis>,
    num_qubits: usize,
}

struct FixedBasis {
    /// Per ancilla string j: the affected system rows and
    /// `Λ(i, j) sqrt(p̄(j 2^L + i))` scaled by the solved sign.
    columns: Vec<Vec<(usize, Complex64)>>,
    /// Diagonal operator value per system index in the rotated frame.
    diag: Vec<f64>,
}

impl FixedCountsEnergy {
    /// Assemble from per-basis parts: the diagonal (rotated-frame) operator,
    /// the reconstruction matrix, the measured extended distribution, and
    /// the solved signs.
    pub fn new(
        num_qubits: usize,
        parts: Vec<(PauliSum, LambdaMatrix, ProbDist, SignVector)>,
    ) -> Result<Self> {
        let mut bases = Vec::with_capacity(parts.len());
        for (diagonal, lambda, pbar, signs) in parts {
            let l = lambda.basis().len();
            if pbar.register_size() != 2 * l || signs.0.len() != lambda.dim() {
                return Err(Error::SizeMismatch {
                    left: pbar.register_size(),
                    right: 2 * l,
                });
            }
            let dim = 1usize << l;
            let mask = (dim - 1) as u64;
            let mut columns = vec![Vec::new(); dim];
            for (index, p) in pbar.iter() {
                let j = (index >> l) as usize;
                let i = (index & mask) as usize;
                columns[j].push((i, lambda.entry(i as u64, j as u64) * (signs.0[j] * p.sqrt())));
            }
            let masks: Vec<(u64, f64)> = diagonal
                .terms()
                .map(|(letters, c)| {
                    let mask = letters
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p == crate::pauli::Pauli::Z)
                        .fold(0u64, |m, (k, _)| m | (1 << k));
                    (mask, c.re)
                })
                .collect();
            let diag: Vec<f64> = (0..dim as u64)
                .map(|i| {
                    masks
                        .iter()
                        .map(|&(mask, c)| {
                            if (i & mask).count_ones() & 1 == 0 {
                                c
                            } else {
                                -c
                            }
                        })
                        .sum()
                })
                .collect();
            bases.push(FixedBasis { columns, diag });
        }
        Ok(Self { bases, num_qubits })
    }

    /// Total energy after reweighting by `jp`.
    pub fn energy(&self, jp: &JastrowParams, convention: WeightConvention) -> Result<f64> {
        if jp.num_qubits() != self.num_qubits {
            return Err(Error::SizeMismatch {
                left: jp.num_qubits(),
                right: self.num_qubits,
            });
        }
        let factor = convention.exponent_factor();
        let mut total = 0.0;
        for basis in &self.bases {
            let dim = basis.diag.len();
            let mut log_weights = vec![f64::NEG_INFINITY; dim];
            let mut max_log = f64::NEG_INFINITY;
            for (j, column) in basis.columns.iter().enumerate() {
                if column.is_empty() {
                    continue;
                }
                let lw = factor * jp.log_weight(j as u64);
                log_weights[j] = lw;
                if lw > max_log {
                    max_log = lw;
                }
            }
            if !max_log.is_finite() {
                return Err(Error::AllZeroWeight);
            }
            let mut t = vec![Complex64::new(0.0, 0.0); dim];
            for (j, column) in basis.columns.iter().enumerate() {
                if column.is_empty() {
                    continue;
                }
                // sqrt of the probability weight.
                let root_w = (0.5 * (log_weights[j] - max_log)).exp();
                for &(i, c) in column {
                    t[i] += c * root_w;
                }
            }
            let norm: f64 = t.iter().map(|a| a.norm_sqr()).sum();
            if norm <= 0.0 {
                return Err(Error::AllZeroWeight);
            }
            let value: f64 = t
                .iter()
                .zip(&basis.diag)
                .map(|(a, &d)| a.norm_sqr() * d)
                .sum();
            total += value / norm;
        }
        Ok(total)
    }
}

/// Mean, standard error, and per-repetition energies of the sampled
/// estimator.
#[derive(Debug, Clone)]
pub struct SampledEnergy {
    pub mean: f64,
    pub stderr: f64,
    pub per_rep: Vec<f64>,
}

impl SampledEnergy {
    fn from_reps(per_rep: Vec<f64>) -> Self {
        let m = per_rep.len();
        let mean = per_rep.iter().sum::<f64>() / m as f64;
        let stderr = if m > 1 {
            let var = per_rep.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                / (m as f64 - 1.0);
            (var / m as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            per_rep,
        }
    }
}

/// One prepared measurement setting: the basis, its diagonal operator in the
/// rotated frame, the reconstruction matrix, and the extended state.
struct BasisSetting {
    diagonal: PauliSum,
    lambda: LambdaMatrix,
    extended: StateVector,
}

fn prepare_settings(h: &PauliSum, circuit: &Circuit, theta: &[f64]) -> Result<Vec<BasisSetting>> {
    let psi = run_circuit(circuit, theta)?;
    group_by_basis(h)
        .into_iter()
        .map(|(basis, group)| {
            let diagonal = rotate_to_diagonal(&group, &basis)?;
            let lambda = lambda_matrix(&basis)?;
            let extended_circuit = build_entangled_copy(circuit, &basis)?;
            let extended = run_circuit(&extended_circuit, theta)?;
            debug_assert_eq!(psi.num_qubits() * 2, extended.num_qubits());
            Ok(BasisSetting {
                diagonal,
                lambda,
                extended,
            })
        })
        .collect()
}

/// Energy from one counts table per measurement basis: reweight by the
/// Jastrow factor, reconstruct the reduced distribution (positive-state
/// branch), and evaluate the diagonal operators. This is the same path used
/// for simulated and externally produced counts.
pub fn energy_from_counts(
    model: &ModelSpec,
    counts: &[(MeasurementBasis, CountsTable)],
    jp: &JastrowParams,
    convention: WeightConvention,
) -> Result<f64> {
    let h = build_model(model)?;
    let groups = group_by_basis(&h);
    let mut total = 0.0;
    for (basis, group) in groups {
        let diagonal = rotate_to_diagonal(&group, &basis)?;
        let table = counts
            .iter()
            .find(|(b, _)| *b == basis)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Config(format!("no counts provided for basis {basis}")))?;
        let pbar = reweight(table, jp, convention)?;
        let reduced = reconstruct_reduced(&pbar, &lambda_matrix(&basis)?)?;
        total += diagonal_expectation(&diagonal, &reduced)?;
    }
    Ok(total)
}

/// The full sampled estimator of the projected-state energy: per basis group
/// build the entangled-copy circuit, sample, reweight, reconstruct, and
/// evaluate; repeat `m_rep` times with per-repetition RNG streams.
pub fn jqc_energy_sampled(
    model: &ModelSpec,
    circuit: &Circuit,
    theta: &[f64],
    jp: &JastrowParams,
    cfg: &SamplingConfig,
    convention: WeightConvention,
) -> Result<SampledEnergy> {
    cfg.validate()?;
    let h = build_model(model)?;
    if circuit.num_qubits() != h.num_qubits() {
        return Err(Error::SizeMismatch {
            left: circuit.num_qubits(),
            right: h.num_qubits(),
        });
    }
    let settings = prepare_settings(&h, circuit, theta)?;
    let mut per_rep = Vec::with_capacity(cfg.m_rep);
    for rep in 0..cfg.m_rep {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(rep as u64));
        let mut energy = 0.0;
        for setting in &settings {
            let counts = sample_counts_with_rng(&setting.extended, cfg.shots, &mut rng);
            let pbar = reweight(&counts, jp, convention)?;
            let reduced = reconstruct_reduced(&pbar, &setting.lambda)?;
            energy += diagonal_expectation(&setting.diagonal, &reduced)?;
        }
        per_rep.push(energy);
    }
    Ok(SampledEnergy::from_reps(per_rep))
}

fn format_bits(index: u64, width: usize) -> String {
    (0..width)
        .rev()
        .map(|k| if (index >> k) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Write a counts table in the interchange format: a header line
/// `# qubits=<N> shots=<S> basis=<axes>` followed by `bitstring count`
/// rows, most significant qubit first.
pub fn write_counts<W: Write>(
    mut w: W,
    table: &CountsTable,
    basis: &MeasurementBasis,
) -> Result<()> {
    writeln!(
        w,
        "# qubits={} shots={} basis={}",
        table.register_size(),
        table.shots(),
        basis
    )?;
    for (index, count) in table.iter() {
        writeln!(w, "{} {}", format_bits(index, table.register_size()), count)?;
    }
    Ok(())
}

/// Read a counts table written by [`write_counts`].
pub fn read_counts<R: BufRead>(reader: R) -> Result<(CountsTable, MeasurementBasis)> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty counts file".into()))??;
    let header = header.trim();
    if !header.starts_with('#') {
        return Err(Error::Parse("counts file must start with a # header".into()));
    }
    let mut qubits = None;
    let mut shots = None;
    let mut basis = None;
    for field in header.trim_start_matches('#').split_whitespace() {
        if let Some(v) = field.strip_prefix("qubits=") {
            qubits = Some(v.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?);
        } else if let Some(v) = field.strip_prefix("shots=") {
            shots = Some(v.parse::<u64>().map_err(|e| Error::Parse(e.to_string()))?);
        } else if let Some(v) = field.strip_prefix("basis=") {
            basis = Some(MeasurementBasis::from_str_axes(v)?);
        }
    }
    let qubits = qubits.ok_or_else(|| Error::Parse("header missing qubits=".into()))?;
    let declared_shots = shots.ok_or_else(|| Error::Parse("header missing shots=".into()))?;
    let basis = basis.ok_or_else(|| Error::Parse("header missing basis=".into()))?;

    let mut pairs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let bits = fields
            .next()
            .ok_or_else(|| Error::Parse(format!("counts line {}: empty", lineno + 2)))?;
        let count: u64 = fields
            .next()
            .ok_or_else(|| Error::Parse(format!("counts line {}: missing count", lineno + 2)))?
            .parse()
            .map_err(|e| Error::Parse(format!("counts line {}: {e}", lineno + 2)))?;
        if bits.len() != qubits {
            return Err(Error::Parse(format!(
                "counts line {}: bitstring width {} does not match qubits={}",
                lineno + 2,
                bits.len(),
                qubits
            )));
        }
        let mut index = 0u64;
        for c in bits.chars() {
            index <<= 1;
            match c {
                '0' => {}
                '1' => index |= 1,
                other => {
                    return Err(Error::Parse(format!(
                        "counts line {}: bad bit '{other}'",
                        lineno + 2
                    )))
                }
            }
        }
        pairs.push((index, count));
    }
    let table = CountsTable::from_pairs(qubits, &pairs)?;
    if table.shots() != declared_shots {
        return Err(Error::Parse(format!(
            "counts sum {} does not match declared shots {}",
            table.shots(),
            declared_shots
        )));
    }
    Ok((table, basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::{apply_jastrow_exact, build_ry_cnot, expectation, hadamard_wall};
    use num_complex::Complex64;

    fn l2_ising() -> ModelSpec {
        ModelSpec::Ising {
            sites: 2,
            gamma: 1.0,
            positive_field: false,
        }
    }

    fn random_real_state(n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<Complex64> = (0..1usize << n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, 0.0))
            .collect();
        StateVector::from_amplitudes(n, amps).unwrap()
    }

    fn random_positive_state(n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<Complex64> = (0..1usize << n)
            .map(|_| Complex64::new(rng.gen::<f64>(), 0.0))
            .collect();
        StateVector::from_amplitudes(n, amps).unwrap()
    }

    fn direct_distribution(psi: &StateVector, basis: &MeasurementBasis) -> ProbDist {
        super::direct_distribution(psi, basis).unwrap()
    }

    #[test]
    fn entangled_copy_of_hadamard_wall() {
        let circuit = hadamard_wall(2);
        let basis = MeasurementBasis::uniform(Axis::Z, 2);
        let extended = build_entangled_copy(&circuit, &basis).unwrap();
        let sv = run_circuit(&extended, &[]).unwrap();
        // 1/2 (|00.00> + |01.01> + |10.10> + |11.11>)
        for j in 0..4u64 {
            let idx = (j << 2) | j;
            assert!((sv.amplitude(idx) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        }
        assert!((sv.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entangled_copy_gate_count() {
        let circuit = build_ry_cnot(3, 2);
        let original = circuit.gates().len();
        let basis = MeasurementBasis::new(vec![Axis::X, Axis::Z, Axis::X]);
        let extended = build_entangled_copy(&circuit, &basis).unwrap();
        assert_eq!(extended.gates().len(), original + 3 + 2);
    }

    #[test]
    fn copy_invariant_ancilla_equals_system() {
        let circuit = build_ry_cnot(3, 1);
        let basis = MeasurementBasis::uniform(Axis::Z, 3);
        let extended = build_entangled_copy(&circuit, &basis).unwrap();
        let sv = run_circuit(&extended, &[0.7, -0.3, 1.9]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let counts = sample_counts_with_rng(&sv, 2000, &mut rng);
        for (idx, _) in counts.iter() {
            assert_eq!(idx >> 3, idx & 0b111, "outcome {idx:#08b}");
        }
    }

    #[test]
    fn sampling_deterministic_and_concentrated() {
        let sv = StateVector::basis_state(3, 0);
        let cfg = SamplingConfig {
            shots: 500,
            m_rep: 1,
            seed: 9,
        };
        let counts = sample_counts(&sv, &cfg);
        assert_eq!(counts.count(0), 500);

        let sv = run_circuit(&hadamard_wall(2), &[]).unwrap();
        let cfg = SamplingConfig {
            shots: 1_000_000,
            m_rep: 1,
            seed: 1234,
        };
        let a = sample_counts(&sv, &cfg);
        let b = sample_counts(&sv, &cfg);
        assert_eq!(a, b);
        // Each outcome within 5 sigma of p = 1/4.
        let sigma = (0.25 * 0.75 / 1e6f64).sqrt();
        for i in 0..4 {
            let freq = a.count(i) as f64 / 1e6;
            assert!((freq - 0.25).abs() < 5.0 * sigma, "outcome {i}: {freq}");
        }
    }

    #[test]
    fn reweight_identity_at_zero_lambda() {
        let jp = JastrowParams::chain(2, vec![0.0]).unwrap();
        let raw = CountsTable::from_pairs(4, &[(0b0000, 3), (0b0101, 5), (0b1111, 2)]).unwrap();
        let out = reweight(&raw, &jp, WeightConvention::AmplitudeLevel).unwrap();
        assert!((out.prob(0b0000) - 0.3).abs() < 1e-12);
        assert!((out.prob(0b0101) - 0.5).abs() < 1e-12);
        assert!((out.prob(0b1111) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn reweight_single_outcome_unchanged() {
        let jp = JastrowParams::chain(2, vec![0.7]).unwrap();
        let raw = CountsTable::from_pairs(4, &[(0b0101, 11)]).unwrap();
        let out = reweight(&raw, &jp, WeightConvention::AmplitudeLevel).unwrap();
        assert!((out.prob(0b0101) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reweight_matches_exact_projector_probabilities() {
        // Uniform counts on the copy diagonal reweighted at λ* reproduce the
        // basis-state probabilities of the exactly projected |++> state.
        let lambda = 0.5 * ((1.0 + 5.0f64.sqrt()) / 2.0).ln();
        let jp = JastrowParams::chain(2, vec![lambda]).unwrap();
        let pairs: Vec<(u64, u64)> = (0..4u64).map(|j| ((j << 2) | j, 100)).collect();
        let raw = CountsTable::from_pairs(4, &pairs).unwrap();
        let reweighted = reweight(&raw, &jp, WeightConvention::AmplitudeLevel).unwrap();

        let psi = run_circuit(&hadamard_wall(2), &[]).unwrap();
        let projected = apply_jastrow_exact(&psi, &jp).unwrap();
        for j in 0..4u64 {
            let expected = projected.probability(j);
            let got = reweighted.prob((j << 2) | j);
            assert!((got - expected).abs() < 1e-12, "ancilla {j}");
        }
    }

    #[test]
    fn reweight_preserves_support() {
        let jp = JastrowParams::chain(3, vec![0.4, -0.2]).unwrap();
        let raw =
            CountsTable::from_pairs(6, &[(0b000_101, 4), (0b011_011, 6), (0b111_000, 1)])
                .unwrap();
        let out = reweight(&raw, &jp, WeightConvention::Literal).unwrap();
        assert_eq!(out.num_outcomes(), raw.num_outcomes());
        for (idx, _) in raw.iter() {
            assert!(out.prob(idx) > 0.0);
        }
    }

    #[test]
    fn lambda_matrix_z_is_identity() {
        let basis = MeasurementBasis::uniform(Axis::Z, 2);
        let lam = lambda_matrix(&basis).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((lam.entry(i, j) - Complex64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn lambda_matrix_xx_hadamard_pattern() {
        let basis = MeasurementBasis::uniform(Axis::X, 2);
        let lam = lambda_matrix(&basis).unwrap();
        let expected = [
            [1.0, 1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0, -1.0],
            [1.0, 1.0, -1.0, -1.0],
            [1.0, -1.0, -1.0, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (lam.entry(i as u64, j as u64) - Complex64::new(expected[i][j], 0.0)).norm()
                        < 1e-12,
                    "({i}, {j})"
                );
            }
        }
    }

    #[test]
    fn lambda_matrix_mixed_axis() {
        // [X on qubit 0, I on qubit 1]: one rotated axis, so the scale is
        // sqrt(2) on the Hadamard factor and qubit 1 stays diagonal.
        let basis = MeasurementBasis::new(vec![Axis::X, Axis::I]);
        let lam = lambda_matrix(&basis).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..4u64 {
            for j in 0..4u64 {
                let (i1, i0) = (i >> 1, i & 1);
                let (j1, j0) = (j >> 1, j & 1);
                let x = if i0 == 1 && j0 == 1 { -r } else { r };
                let expected = if i1 == j1 { 2f64.sqrt() * x } else { 0.0 };
                assert!(
                    (lam.entry(i, j) - Complex64::new(expected, 0.0)).norm() < 1e-12,
                    "({i}, {j})"
                );
            }
        }
    }

    #[test]
    fn reconstruct_z_basis_is_diagonal_pick() {
        let basis = MeasurementBasis::uniform(Axis::Z, 2);
        let lam = lambda_matrix(&basis).unwrap();
        // Mass off the copy diagonal never lands in the reconstruction.
        let pbar = ProbDist::from_pairs(
            4,
            &[((0 << 2) | 0, 0.3), ((2 << 2) | 2, 0.5), ((1 << 2) | 3, 0.2)],
        )
        .unwrap();
        let reduced = reconstruct_reduced(&pbar, &lam).unwrap();
        assert!((reduced.prob(0) - 0.375).abs() < 1e-12);
        assert!((reduced.prob(2) - 0.625).abs() < 1e-12);
    }

    #[test]
    fn reconstruct_positive_state_matches_direct() {
        for l in 2..=5 {
            let psi = random_positive_state(l, 100 + l as u64);
            for axes in [
                vec![Axis::Z; l],
                vec![Axis::X; l],
                (0..l)
                    .map(|k| if k % 2 == 0 { Axis::X } else { Axis::Z })
                    .collect::<Vec<_>>(),
            ] {
                let basis = MeasurementBasis::new(axes);
                let extended = entangled_copy_of_state(&psi, &basis).unwrap();
                let pbar = ProbDist::from_state(&extended).unwrap();
                let reduced = reconstruct_reduced(&pbar, &lambda_matrix(&basis).unwrap()).unwrap();
                let direct = direct_distribution(&psi, &basis);
                for i in 0..(1u64 << l) {
                    assert!(
                        (reduced.prob(i) - direct.prob(i)).abs() < 1e-12,
                        "L={l} basis={basis} i={i}"
                    );
                }
            }
        }
    }

    #[test]
    fn sign_solve_positive_state_trivial() {
        let l = 3;
        let psi = random_positive_state(l, 42);
        let basis = MeasurementBasis::uniform(Axis::X, l);
        let extended = entangled_copy_of_state(&psi, &basis).unwrap();
        let pbar = ProbDist::from_state(&extended).unwrap();
        let p0 = direct_distribution(&psi, &basis);
        let solve = solve_signs(&pbar, &p0, &basis).unwrap();
        assert!(solve.residual < 1e-6);
        for (j, s) in solve.signs.0.iter().enumerate() {
            assert!((s - 1.0).abs() < 1e-3, "sign {j} = {s}");
        }
    }

    #[test]
    fn sign_solve_random_real_state() {
        let l = 5;
        let psi = random_real_state(l, 77);
        let basis = MeasurementBasis::uniform(Axis::X, l);
        let extended = entangled_copy_of_state(&psi, &basis).unwrap();
        let pbar = ProbDist::from_state(&extended).unwrap();
        let p0 = direct_distribution(&psi, &basis);
        let solve = solve_signs(&pbar, &p0, &basis).unwrap();
        let eps = reconstruction_error(&solve.dist, &p0).unwrap();
        assert!(eps < 0.1, "eps = {eps}");
    }

    #[test]
    fn reconstruction_error_cases() {
        let a = ProbDist::from_pairs(2, &[(0, 1.0)]).unwrap();
        assert_eq!(reconstruction_error(&a, &a).unwrap(), 0.0);
        let b = ProbDist::from_pairs(2, &[(3, 1.0)]).unwrap();
        assert!((reconstruction_error(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-12);

        let c = ProbDist::from_pairs(2, &[(0, 0.5), (3, 0.5)]).unwrap();
        let ab = reconstruction_error(&a, &b).unwrap();
        let ac = reconstruction_error(&a, &c).unwrap();
        let cb = reconstruction_error(&c, &b).unwrap();
        assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn sampled_energy_zero_lambda_matches_circuit() {
        let model = l2_ising();
        let circuit = hadamard_wall(2);
        let jp = JastrowParams::chain(2, vec![0.0]).unwrap();
        let cfg = SamplingConfig {
            shots: 8192,
            m_rep: 8,
            seed: 21,
        };
        let sampled = jqc_energy_sampled(
            &model,
            &circuit,
            &[],
            &jp,
            &cfg,
            WeightConvention::AmplitudeLevel,
        )
        .unwrap();
        // Bare |++> circuit energy is exactly -2.
        assert!(
            (sampled.mean + 2.0).abs() < 3.0 * sampled.stderr.max(1e-3),
            "mean {} stderr {}",
            sampled.mean,
            sampled.stderr
        );
        assert_eq!(sampled.per_rep.len(), 8);
    }

    #[test]
    fn counts_file_round_trip() {
        let circuit = hadamard_wall(2);
        let basis = MeasurementBasis::uniform(Axis::X, 2);
        let extended = build_entangled_copy(&circuit, &basis).unwrap();
        let sv = run_circuit(&extended, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let table = sample_counts_with_rng(&sv, 4096, &mut rng);

        let mut buf = Vec::new();
        write_counts(&mut buf, &table, &basis).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# qubits=4 shots=4096 basis=XX\n"));

        let (parsed, parsed_basis) = read_counts(&buf[..]).unwrap();
        assert_eq!(parsed, table);
        assert_eq!(parsed_basis, basis);
    }

    #[test]
    fn counts_ingestion_matches_sampling_path() {
        // Files written from the rep-0 stream reproduce the rep-0 energy.
        let model = l2_ising();
        let circuit = hadamard_wall(2);
        let lambda = 0.5 * ((1.0 + 5.0f64.sqrt()) / 2.0).ln();
        let jp = JastrowParams::chain(2, vec![lambda]).unwrap();
        let cfg = SamplingConfig {
            shots: 2048,
            m_rep: 3,
            seed: 99,
        };
        let sampled = jqc_energy_sampled(
            &model,
            &circuit,
            &[],
            &jp,
            &cfg,
            WeightConvention::AmplitudeLevel,
        )
        .unwrap();

        let h = build_model(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut tables = Vec::new();
        for (basis, _) in group_by_basis(&h) {
            let extended = build_entangled_copy(&circuit, &basis).unwrap();
            let sv = run_circuit(&extended, &[]).unwrap();
            let table = sample_counts_with_rng(&sv, cfg.shots, &mut rng);
            let mut buf = Vec::new();
            write_counts(&mut buf, &table, &basis).unwrap();
            let (read_back, read_basis) = read_counts(&buf[..]).unwrap();
            tables.push((read_basis, read_back));
        }
        let via_files =
            energy_from_counts(&model, &tables, &jp, WeightConvention::AmplitudeLevel).unwrap();
        assert!((via_files - sampled.per_rep[0]).abs() < 1e-12);
    }

    #[test]
    fn fixed_counts_energy_matches_dist_pipeline() {
        use crate::pauli::{build_model, rotate_to_diagonal, group_by_basis};
        let model = ModelSpec::Ising {
            sites: 4,
            gamma: 1.0,
            positive_field: false,
        };
        let h = build_model(&model).unwrap();
        let psi = random_real_state(4, 2024);
        let mut parts = Vec::new();
        let mut dists = Vec::new();
        for (basis, group) in group_by_basis(&h) {
            let diagonal = rotate_to_diagonal(&group, &basis).unwrap();
            let lambda = lambda_matrix(&basis).unwrap();
            let extended = entangled_copy_of_state(&psi, &basis).unwrap();
            let pbar = ProbDist::from_state(&extended).unwrap();
            let p0 = direct_distribution(&psi, &basis);
            let signs = if basis.num_rotated() == 0 {
                SignVector::ones(lambda.dim())
            } else {
                solve_signs(&pbar, &p0, &basis).unwrap().signs
            };
            dists.push((diagonal.clone(), lambda.clone(), pbar.clone(), signs.clone()));
            parts.push((diagonal, lambda, pbar, signs));
        }
        let evaluator = FixedCountsEnergy::new(4, parts).unwrap();
        let jp = JastrowParams::chain(4, vec![0.21, -0.07, 0.13]).unwrap();
        for convention in [WeightConvention::AmplitudeLevel, WeightConvention::Literal] {
            let fast = evaluator.energy(&jp, convention).unwrap();
            let mut slow = 0.0;
            for (diagonal, lambda, pbar, signs) in &dists {
                let reweighted = reweight_dist(pbar, &jp, convention).unwrap();
                let reduced = reconstruct_with_signs(&reweighted, lambda, signs).unwrap();
                slow += diagonal_expectation(diagonal, &reduced).unwrap();
            }
            assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
        }
    }

    #[test]
    fn energy_from_counts_requires_every_basis() {
        let model = l2_ising();
        let jp = JastrowParams::chain(2, vec![0.0]).unwrap();
        let basis = MeasurementBasis::uniform(Axis::Z, 2);
        let table = CountsTable::from_pairs(4, &[(0, 10)]).unwrap();
        let err = energy_from_counts(
            &model,
            &[(basis, table)],
            &jp,
            WeightConvention::AmplitudeLevel,
        );
        assert!(err.is_err());
    }
}
