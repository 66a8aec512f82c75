//! Jastrow parameterization over qubit pairs: lattice-symmetry classes,
//! classical log-weights, and the truncated-projector expansion used by the
//! transformed-Hamiltonian method.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliSum};
use crate::statevector::{expectation, StateVector};

/// Index of the unordered pair (s, t) with s < t in the flattened upper
/// triangle: pairs are enumerated as (0,1), (0,2), (1,2), (0,3), ...
pub fn pair_index(s: usize, t: usize) -> usize {
    debug_assert!(s < t);
    t * (t - 1) / 2 + s
}

/// Assignment of every qubit pair to a symmetry class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    num_qubits: usize,
    assignment: Vec<usize>,
    num_classes: usize,
}

/// Lattice topology behind the symmetry reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Chain,
    Ladder,
}

impl ClassMap {
    /// Open chain of L qubits: pairs are classed by distance |s - t|,
    /// giving L - 1 classes.
    pub fn chain(sites: usize) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidClassMap(format!(
                "chain needs at least 2 sites, got {sites}"
            )));
        }
        let n = sites;
        let mut assignment = vec![0; n * (n - 1) / 2];
        for t in 1..n {
            for s in 0..t {
                assignment[pair_index(s, t)] = t - s - 1;
            }
        }
        Ok(Self {
            num_qubits: n,
            assignment,
            num_classes: n - 1,
        })
    }

    /// Two-chain ladder of 2L qubits (qubits 0..L on one chain, L..2L on the
    /// other). Same-chain pairs are classed by (distance, chain): 2(L-1)
    /// classes; inter-chain pairs by site offset |Δsite|: L classes.
    pub fn ladder(sites: usize) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidClassMap(format!(
                "ladder needs at least 2 sites per chain, got {sites}"
            )));
        }
        let l = sites;
        let n = 2 * l;
        let mut assignment = vec![0; n * (n - 1) / 2];
        for t in 1..n {
            for s in 0..t {
                let (chain_s, site_s) = (s / l, s % l);
                let (chain_t, site_t) = (t / l, t % l);
                let class = if chain_s == chain_t {
                    let d = site_t.abs_diff(site_s);
                    chain_s * (l - 1) + (d - 1)
                } else {
                    let offset = site_t.abs_diff(site_s);
                    2 * (l - 1) + offset
                };
                assignment[pair_index(s, t)] = class;
            }
        }
        Ok(Self {
            num_qubits: n,
            assignment,
            num_classes: 3 * l - 2,
        })
    }

    pub fn for_topology(topology: Topology, sites: usize) -> Result<Self> {
        match topology {
            Topology::Chain => Self::chain(sites),
            Topology::Ladder => Self::ladder(sites),
        }
    }

    /// Every pair its own class: the unreduced N(N-1)/2-parameter form.
    pub fn all_pairs(num_qubits: usize) -> Result<Self> {
        if num_qubits < 2 {
            return Err(Error::InvalidClassMap(
                "need at least 2 qubits".to_string(),
            ));
        }
        let npairs = num_qubits * (num_qubits - 1) / 2;
        Ok(Self {
            num_qubits,
            assignment: (0..npairs).collect(),
            num_classes: npairs,
        })
    }

    /// Build from explicit (s, t, class) triples covering every pair once,
    /// with class indices contiguous from 0.
    pub fn from_triples(num_qubits: usize, triples: &[(usize, usize, usize)]) -> Result<Self> {
        let npairs = num_qubits * (num_qubits - 1) / 2;
        let mut assignment = vec![usize::MAX; npairs];
        for &(s, t, class) in triples {
            let (s, t) = if s < t { (s, t) } else { (t, s) };
            if s == t || t >= num_qubits {
                return Err(Error::InvalidClassMap(format!("bad pair ({s}, {t})")));
            }
            let idx = pair_index(s, t);
            if assignment[idx] != usize::MAX {
                return Err(Error::InvalidClassMap(format!(
                    "pair ({s}, {t}) assigned twice"
                )));
            }
            assignment[idx] = class;
        }
        if let Some(pos) = assignment.iter().position(|&c| c == usize::MAX) {
            return Err(Error::InvalidClassMap(format!(
                "pair index {pos} not assigned"
            )));
        }
        let num_classes = assignment.iter().max().map_or(0, |&m| m + 1);
        let mut seen = vec![false; num_classes];
        for &c in &assignment {
            seen[c] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidClassMap(format!(
                "class indices not contiguous: {missing} unused"
            )));
        }
        Ok(Self {
            num_qubits,
            assignment,
            num_classes,
        })
    }

    /// Read an override file with `s t class_index` lines.
    pub fn from_reader<R: BufRead>(num_qubits: usize, reader: R) -> Result<Self> {
        let mut triples = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!(
                    "class map line {}: expected `s t class`, got '{line}'",
                    lineno + 1
                )));
            }
            let parse = |f: &str| -> Result<usize> {
                f.parse()
                    .map_err(|e| Error::Parse(format!("class map line {}: {e}", lineno + 1)))
            };
            triples.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
        }
        Self::from_triples(num_qubits, &triples)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (s, t, class) in self.pairs() {
            writeln!(w, "{s} {t} {class}")?;
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_of(&self, s: usize, t: usize) -> usize {
        self.assignment[pair_index(s.min(t), s.max(t))]
    }

    /// Iterate (s, t, class) over all pairs with s < t.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (1..self.num_qubits).flat_map(move |t| {
            (0..t).map(move |s| (s, t, self.assignment[pair_index(s, t)]))
        })
    }
}

/// Jastrow coefficients: one λ per symmetry class.
#[derive(Debug, Clone, PartialEq)]
pub struct JastrowParams {
    class_map: ClassMap,
    lambda: Vec<f64>,
}

impl JastrowParams {
    pub fn new(class_map: ClassMap, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != class_map.num_classes() {
            return Err(Error::ParameterCount {
                expected: class_map.num_classes(),
                got: lambda.len(),
            });
        }
        Ok(Self { class_map, lambda })
    }

    pub fn zeros(class_map: ClassMap) -> Self {
        let lambda = vec![0.0; class_map.num_classes()];
        Self { class_map, lambda }
    }

    pub fn chain(sites: usize, lambda: Vec<f64>) -> Result<Self> {
        Self::new(ClassMap::chain(sites)?, lambda)
    }

    pub fn ladder(sites: usize, lambda: Vec<f64>) -> Result<Self> {
        Self::new(ClassMap::ladder(sites)?, lambda)
    }

    pub fn num_qubits(&self) -> usize {
        self.class_map.num_qubits()
    }

    pub fn num_classes(&self) -> usize {
        self.class_map.num_classes()
    }

    pub fn class_map(&self) -> &ClassMap {
        &self.class_map
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn with_lambda(&self, lambda: Vec<f64>) -> Result<Self> {
        Self::new(self.class_map.clone(), lambda)
    }

    /// Elementwise rescaling of the coefficient vector (λ-scan protocol).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            class_map: self.class_map.clone(),
            lambda: self.lambda.iter().map(|l| l * factor).collect(),
        }
    }

    /// `Σ_{s<t} λ_class(s,t) z_s z_t` with `z_k = (-1)^bit_k(bits)`.
    pub fn log_weight(&self, bits: u64) -> f64 {
        let mut total = 0.0;
        for (s, t, class) in self.class_map.pairs() {
            let zs = 1.0 - 2.0 * ((bits >> s) & 1) as f64;
            let zt = 1.0 - 2.0 * ((bits >> t) & 1) as f64;
            total += self.lambda[class] * zs * zt;
        }
        total
    }

    /// Same as [`log_weight`](Self::log_weight) for a textual bit string
    /// (most significant qubit first), with a length check.
    pub fn log_weight_str(&self, bits: &str) -> Result<f64> {
        if bits.len() != self.num_qubits() {
            return Err(Error::SizeMismatch {
                left: bits.len(),
                right: self.num_qubits(),
            });
        }
        let mut index = 0u64;
        for c in bits.chars() {
            index <<= 1;
            match c {
                '0' => {}
                '1' => index |= 1,
                other => return Err(Error::Parse(format!("bad bit '{other}'"))),
            }
        }
        Ok(self.log_weight(index))
    }

    /// The correlator `J = Σ_{s<t} λ_class(s,t) Z_s Z_t` as an operator.
    pub fn correlator(&self) -> PauliSum {
        let n = self.num_qubits();
        let mut j = PauliSum::new(n);
        for (s, t, class) in self.class_map.pairs() {
            if self.lambda[class] != 0.0 {
                j.add_term(&[(s, Pauli::Z), (t, Pauli::Z)], self.lambda[class])
                    .expect("pair indices validated by the class map");
            }
        }
        j
    }
}

/// Truncation order for the polynomial projector `(I + J)^s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TruncationSpec {
    pub order: usize,
}

impl TruncationSpec {
    pub const MAX_ORDER: usize = 4;

    pub fn new(order: usize) -> Result<Self> {
        if order > Self::MAX_ORDER {
            return Err(Error::Config(format!(
                "truncation order {order} exceeds cap {}",
                Self::MAX_ORDER
            )));
        }
        Ok(Self { order })
    }
}

/// Expand `(I + J)^s` into a canonical Pauli sum.
pub fn truncated_projector(jp: &JastrowParams, spec: TruncationSpec) -> PauliSum {
    let n = jp.num_qubits();
    let base = PauliSum::identity(n, 1.0)
        .add(&jp.correlator())
        .expect("sizes match by construction");
    let mut out = PauliSum::identity(n, 1.0);
    for _ in 0..spec.order {
        out = out.multiply(&base).expect("sizes match by construction");
    }
    out
}

/// Number of distinct Pauli strings in the truncated projector.
pub fn term_count(jp: &JastrowParams, spec: TruncationSpec) -> usize {
    truncated_projector(jp, spec).num_terms()
}

/// Expand the full exponential projector `e^J` into Pauli-Z strings via a
/// fast Walsh-Hadamard transform of its diagonal. The term count grows
/// exponentially with the register size; guarded at 20 qubits.
pub fn exponential_projector(jp: &JastrowParams) -> Result<PauliSum> {
    let n = jp.num_qubits();
    if n > 20 {
        return Err(Error::RegisterTooLarge { got: n, limit: 20 });
    }
    let dim = 1usize << n;
    let mut diag: Vec<f64> = (0..dim).map(|i| jp.log_weight(i as u64).exp()).collect();
    // In-place Walsh-Hadamard transform: afterwards diag[s] = Σ_i (-1)^{|s&i|} w(i).
    let mut h = 1;
    while h < dim {
        for block in (0..dim).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (diag[i], diag[i + h]);
                diag[i] = a + b;
                diag[i + h] = a - b;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / dim as f64;
    let mut out = PauliSum::new(n);
    for (mask, &value) in diag.iter().enumerate() {
        let coeff = value * scale;
        if coeff.abs() < crate::pauli::COEFF_TOL {
            continue;
        }
        let letters: Vec<Pauli> = (0..n)
            .map(|k| {
                if (mask >> k) & 1 == 1 {
                    Pauli::Z
                } else {
                    Pauli::I
                }
            })
            .collect();
        out.add_letters(letters, Complex64::new(coeff, 0.0));
    }
    Ok(out)
}

/// Energy of the truncated-projector state by applying the diagonal
/// `(1 + J)^s` weights to the amplitudes directly. Equal to
/// [`transformed_energy`] within 1e-10 (the operators are diagonal), at a
/// fraction of the cost; used inside optimization loops.
pub fn truncated_energy_direct(
    psi: &StateVector,
    h: &PauliSum,
    jp: &JastrowParams,
    spec: TruncationSpec,
) -> Result<f64> {
    if psi.num_qubits() != h.num_qubits() || psi.num_qubits() != jp.num_qubits() {
        return Err(Error::SizeMismatch {
            left: psi.num_qubits(),
            right: h.num_qubits().max(jp.num_qubits()),
        });
    }
    let mut amps = psi.amplitudes().to_vec();
    let mut norm_sq = 0.0;
    for (i, a) in amps.iter_mut().enumerate() {
        let w = (1.0 + jp.log_weight(i as u64)).powi(spec.order as i32);
        *a *= w;
        norm_sq += a.norm_sqr();
    }
    if norm_sq <= 1e-12 {
        return Err(Error::VanishingDenominator(norm_sq));
    }
    let projected = StateVector::from_amplitudes(psi.num_qubits(), amps)?;
    expectation(h, &projected)
}

/// Energy of the truncated-projector state via operator ratios on the bare
/// circuit state: `<ψ|P'HP'|ψ> / <ψ|P'P'|ψ>` with `P' = (I + J)^s`.
pub fn transformed_energy(
    psi: &StateVector,
    h: &PauliSum,
    jp: &JastrowParams,
    spec: TruncationSpec,
) -> Result<f64> {
    if psi.num_qubits() != h.num_qubits() || psi.num_qubits() != jp.num_qubits() {
        return Err(Error::SizeMismatch {
            left: psi.num_qubits(),
            right: h.num_qubits().max(jp.num_qubits()),
        });
    }
    let projector = truncated_projector(jp, spec);
    let php = projector.multiply(h)?.multiply(&projector)?;
    let pp = projector.multiply(&projector)?;
    let numerator = expectation(&php, psi)?;
    let denominator = expectation(&pp, psi)?;
    if denominator <= 1e-12 {
        return Err(Error::VanishingDenominator(denominator));
    }
    Ok(numerator / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_class_counts() {
        assert_eq!(ClassMap::chain(8).unwrap().num_classes(), 7);
        assert_eq!(ClassMap::chain(4).unwrap().num_classes(), 3);
    }

    #[test]
    fn ladder_class_count() {
        let cm = ClassMap::ladder(4).unwrap();
        assert_eq!(cm.num_qubits(), 8);
        assert_eq!(cm.num_classes(), 10);
        // 28 pairs over 10 classes, all used.
        assert_eq!(cm.pairs().count(), 28);
        let mut used = vec![false; 10];
        for (_, _, c) in cm.pairs() {
            used[c] = true;
        }
        assert!(used.iter().all(|&u| u));
        // Nearest-neighbor pairs on the two chains fall in different classes.
        assert_ne!(cm.class_of(0, 1), cm.class_of(4, 5));
        // Rung pairs share the offset-0 class.
        assert_eq!(cm.class_of(0, 4), cm.class_of(3, 7));
    }

    #[test]
    fn log_weight_examples() {
        let jp = JastrowParams::chain(2, vec![0.3]).unwrap();
        assert!((jp.log_weight_str("00").unwrap() - 0.3).abs() < 1e-15);
        assert!((jp.log_weight_str("01").unwrap() + 0.3).abs() < 1e-15);

        let jp = JastrowParams::zeros(ClassMap::chain(4).unwrap());
        assert_eq!(jp.log_weight(0b0110), 0.0);

        // Distance classes (0.1, 0.2, 0.3) on a 4-site chain, bits 0101:
        // distance-1 pairs contribute -0.3, distance-2 +0.4, distance-3 -0.3.
        let jp = JastrowParams::chain(4, vec![0.1, 0.2, 0.3]).unwrap();
        assert!((jp.log_weight_str("0101").unwrap() + 0.2).abs() < 1e-15);
    }

    #[test]
    fn log_weight_global_flip_invariance() {
        let jp = JastrowParams::chain(5, vec![0.1, -0.4, 0.25, 0.7]).unwrap();
        let mask = (1u64 << 5) - 1;
        for bits in 0..(1u64 << 5) {
            let flipped = bits ^ mask;
            assert!((jp.log_weight(bits) - jp.log_weight(flipped)).abs() < 1e-14);
        }
    }

    #[test]
    fn truncated_projector_orders() {
        let jp = JastrowParams::chain(2, vec![0.2]).unwrap();
        let p0 = truncated_projector(&jp, TruncationSpec::new(0).unwrap());
        assert_eq!(p0.num_terms(), 1);
        assert_eq!(p0.identity_coefficient().re, 1.0);

        let p1 = truncated_projector(&jp, TruncationSpec::new(1).unwrap());
        assert_eq!(p1.num_terms(), 2);
        assert!((p1.coefficient(&[Pauli::Z, Pauli::Z]).re - 0.2).abs() < 1e-15);
    }

    #[test]
    fn truncated_projector_is_hermitian_diagonal() {
        let jp = JastrowParams::chain(4, vec![0.15, -0.08, 0.3]).unwrap();
        let p = truncated_projector(&jp, TruncationSpec::new(3).unwrap());
        assert!(p.is_hermitian(0.0));
        assert!(p.is_diagonal());
    }

    #[test]
    fn term_counts_chain() {
        // All classes active at order 1: identity + every pair.
        let l = 5;
        let jp = JastrowParams::chain(l, vec![0.1; l - 1]).unwrap();
        assert_eq!(
            term_count(&jp, TruncationSpec::new(1).unwrap()),
            1 + l * (l - 1) / 2
        );
        // Nearest-neighbor only: identity + L-1 bonds.
        let mut lam = vec![0.0; l - 1];
        lam[0] = 0.1;
        let jp_nn = JastrowParams::chain(l, lam).unwrap();
        assert_eq!(term_count(&jp_nn, TruncationSpec::new(1).unwrap()), 1 + l - 1);
    }

    #[test]
    fn exponential_projector_matches_log_weights() {
        let jp = JastrowParams::chain(4, vec![0.2, -0.1, 0.05]).unwrap();
        let exp_p = exponential_projector(&jp).unwrap();
        // Diagonal entry at each basis state is exp(log_weight).
        let dense = crate::statevector::pauli_sum_to_dense(&exp_p);
        for i in 0..16u64 {
            let expected = jp.log_weight(i).exp();
            let got = dense[(i as usize, i as usize)].re;
            assert!((got - expected).abs() < 1e-10, "index {i}");
        }
        // Global-flip symmetry kills odd-weight strings: at most 2^{n-1} terms.
        assert!(exp_p.num_terms() <= 8);
    }

    #[test]
    fn truncation_order_cap() {
        assert!(TruncationSpec::new(5).is_err());
        assert!(TruncationSpec::new(4).is_ok());
    }

    #[test]
    fn class_map_file_round_trip() {
        let cm = ClassMap::ladder(3).unwrap();
        let mut buf = Vec::new();
        cm.write(&mut buf).unwrap();
        let parsed = ClassMap::from_reader(cm.num_qubits(), &buf[..]).unwrap();
        assert_eq!(parsed, cm);
    }

    #[test]
    fn transformed_energy_order_zero_is_plain_expectation() {
        use crate::pauli::{build_model, ModelSpec};
        use crate::statevector::{run_circuit, build_ry_cnot};
        let h = build_model(&ModelSpec::Ising {
            sites: 4,
            gamma: 0.8,
            positive_field: false,
        })
        .unwrap();
        let psi = run_circuit(&build_ry_cnot(4, 1), &[0.3, -0.9, 1.2, 0.4]).unwrap();
        let jp = JastrowParams::chain(4, vec![0.3, -0.1, 0.2]).unwrap();
        let t0 = transformed_energy(&psi, &h, &jp, TruncationSpec::new(0).unwrap()).unwrap();
        let direct = expectation(&h, &psi).unwrap();
        assert!((t0 - direct).abs() < 1e-12);
    }

    #[test]
    fn transformed_energy_matches_truncated_state_oracle() {
        use crate::pauli::{build_model, ModelSpec};
        use crate::statevector::{run_circuit, build_ry_cnot, StateVector};
        use num_complex::Complex64;
        let h = build_model(&ModelSpec::Heisenberg {
            sites: 4,
            coupling: 0.7,
        })
        .unwrap();
        let psi = run_circuit(&build_ry_cnot(4, 2), &[0.2, 1.1, -0.4, 0.9, -1.3, 0.6, 0.05, 2.0])
            .unwrap();
        let jp = JastrowParams::chain(4, vec![0.25, -0.15, 0.1]).unwrap();
        for order in [1, 2, 3] {
            let spec = TruncationSpec::new(order).unwrap();
            let ratio = transformed_energy(&psi, &h, &jp, spec).unwrap();
            // Oracle: (I + J)^s is diagonal with entries (1 + log_weight)^s,
            // so apply it directly to the amplitudes and renormalize.
            let amps: Vec<Complex64> = psi
                .amplitudes()
                .iter()
                .enumerate()
                .map(|(i, a)| a * (1.0 + jp.log_weight(i as u64)).powi(order as i32))
                .collect();
            let truncated = StateVector::from_amplitudes(4, amps).unwrap();
            let direct = expectation(&h, &truncated).unwrap();
            assert!(
                (ratio - direct).abs() < 1e-10,
                "order {order}: {ratio} vs {direct}"
            );
        }
    }

    #[test]
    fn direct_route_matches_operator_route() {
        use crate::pauli::{build_model, ModelSpec};
        use crate::statevector::{build_ry_cnot, run_circuit};
        let h = build_model(&ModelSpec::Heisenberg {
            sites: 4,
            coupling: 1.5,
        })
        .unwrap();
        let psi = run_circuit(&build_ry_cnot(4, 1), &[1.0, -0.2, 0.4, 2.2]).unwrap();
        let jp = JastrowParams::chain(4, vec![0.2, -0.3, 0.1]).unwrap();
        for order in [0, 1, 2, 3] {
            let spec = TruncationSpec::new(order).unwrap();
            let a = transformed_energy(&psi, &h, &jp, spec).unwrap();
            let b = truncated_energy_direct(&psi, &h, &jp, spec).unwrap();
            assert!((a - b).abs() < 1e-10, "order {order}: {a} vs {b}");
        }
    }

    #[test]
    fn log_weight_consistent_with_exact_projection() {
        use crate::statevector::{apply_jastrow_exact, StateVector};
        use num_complex::Complex64;
        let jp = JastrowParams::chain(4, vec![0.3, -0.2, 0.12]).unwrap();
        // Two-point superposition: the post-projection amplitude ratio is
        // exp(log_weight(i) - log_weight(k)).
        for (i, k) in [(0u64, 5u64), (3, 12), (7, 8)] {
            let mut amps = vec![Complex64::new(0.0, 0.0); 16];
            amps[i as usize] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            amps[k as usize] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            let psi = StateVector::from_amplitudes(4, amps).unwrap();
            let projected = apply_jastrow_exact(&psi, &jp).unwrap();
            let ratio = projected.amplitude(i).re / projected.amplitude(k).re;
            let expected = (jp.log_weight(i) - jp.log_weight(k)).exp();
            assert!((ratio - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn class_map_rejects_gaps() {
        // Classes 0 and 2 used, 1 missing.
        let triples = [(0, 1, 0), (0, 2, 2), (1, 2, 0)];
        assert!(ClassMap::from_triples(3, &triples).is_err());
        // Missing pair.
        let triples = [(0, 1, 0), (0, 2, 1)];
        assert!(ClassMap::from_triples(3, &triples).is_err());
    }
}
