//! Pauli-string algebra: weighted sums of Pauli operators, model-Hamiltonian
//! builders, measurement-basis grouping, and diagonal expectation values.
//!
//! Bit convention used across the crate: qubit `k` is bit `k` of a basis-state
//! index, so qubit 0 is the least significant bit. In the text form of an
//! operator the letter for qubit 0 is printed rightmost.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measurement::ProbDist;

/// Tolerance below which merged coefficients are pruned.
pub const COEFF_TOL: f64 = 1e-14;

/// Single-qubit Pauli letter. The `Ord` derive gives the lexicographic
/// term ordering used by [`PauliSum`] (I < X < Y < Z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Result<Self> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::Parse(format!("unknown Pauli letter '{other}'"))),
        }
    }

    /// Single-qubit product `self * other`, returned as the resulting letter
    /// and a phase exponent `k` meaning a factor of `i^k`.
    fn mul(self, other: Pauli) -> (Pauli, u8) {
        use Pauli::*;
        match (self, other) {
            (I, p) => (p, 0),
            (p, I) => (p, 0),
            (X, X) | (Y, Y) | (Z, Z) => (I, 0),
            (X, Y) => (Z, 1),
            (Y, X) => (Z, 3),
            (Y, Z) => (X, 1),
            (Z, Y) => (X, 3),
            (Z, X) => (Y, 1),
            (X, Z) => (Y, 3),
        }
    }
}

fn phase_factor(quarter_turns: u8) -> Complex64 {
    match quarter_turns % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// A tensor product of Pauli letters with an attached unit phase.
///
/// The phase is restricted to the four quarter turns `{+1, +i, -1, -i}`,
/// stored as the exponent of `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliString {
    letters: Vec<Pauli>,
    quarter_turns: u8,
}

impl PauliString {
    pub fn identity(num_qubits: usize) -> Self {
        Self {
            letters: vec![Pauli::I; num_qubits],
            quarter_turns: 0,
        }
    }

    /// Build from explicit letters with phase +1.
    pub fn new(letters: Vec<Pauli>) -> Self {
        Self {
            letters,
            quarter_turns: 0,
        }
    }

    /// Place `letter` on a single qubit of an otherwise-identity string.
    pub fn single(num_qubits: usize, qubit: usize, letter: Pauli) -> Result<Self> {
        if qubit >= num_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                num_qubits,
            });
        }
        let mut s = Self::identity(num_qubits);
        s.letters[qubit] = letter;
        Ok(s)
    }

    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn phase(&self) -> Complex64 {
        phase_factor(self.quarter_turns)
    }

    /// Letter-wise product with phase accumulation.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        if self.letters.len() != other.letters.len() {
            return Err(Error::SizeMismatch {
                left: self.letters.len(),
                right: other.letters.len(),
            });
        }
        let mut letters = Vec::with_capacity(self.letters.len());
        let mut turns = self.quarter_turns + other.quarter_turns;
        for (&a, &b) in self.letters.iter().zip(&other.letters) {
            let (p, k) = a.mul(b);
            letters.push(p);
            turns = (turns + k) % 4;
        }
        Ok(PauliString {
            letters,
            quarter_turns: turns % 4,
        })
    }

    /// Action on the computational basis state `|index>`: returns the image
    /// basis index and the accumulated amplitude factor.
    ///
    /// X flips the bit; Y flips the bit with a phase of `+i` (bit 0) or `-i`
    /// (bit 1); Z contributes `(-1)^bit`.
    pub fn apply_to_basis(&self, index: u64) -> (u64, Complex64) {
        let mut out = index;
        let mut turns = self.quarter_turns as u32;
        for (k, &p) in self.letters.iter().enumerate() {
            let bit = (index >> k) & 1;
            match p {
                Pauli::I => {}
                Pauli::X => out ^= 1 << k,
                Pauli::Y => {
                    out ^= 1 << k;
                    // i on |0> -> |1>, -i on |1> -> |0>
                    turns += if bit == 0 { 1 } else { 3 };
                }
                Pauli::Z => {
                    if bit == 1 {
                        turns += 2;
                    }
                }
            }
        }
        (out, phase_factor((turns % 4) as u8))
    }
}

impl fmt::Display for PauliString {
    /// Qubit 0 rightmost.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &p in self.letters.iter().rev() {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

fn letters_to_string(letters: &[Pauli]) -> String {
    letters.iter().rev().map(|p| p.symbol()).collect()
}

fn letters_from_string(s: &str) -> Result<Vec<Pauli>> {
    let mut letters: Vec<Pauli> = s.chars().map(Pauli::from_symbol).collect::<Result<_>>()?;
    letters.reverse();
    Ok(letters)
}

/// A weighted sum of Pauli strings over a fixed register.
///
/// Phases are folded into the complex coefficients, duplicate letter
/// sequences are merged, and terms with |coefficient| below [`COEFF_TOL`]
/// are pruned. Iteration order is deterministic (lexicographic on the
/// letter sequence, qubit 0 first).
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    terms: BTreeMap<Vec<Pauli>, Complex64>,
    num_qubits: usize,
}

impl PauliSum {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            terms: BTreeMap::new(),
            num_qubits,
        }
    }

    pub fn identity(num_qubits: usize, coeff: f64) -> Self {
        let mut s = Self::new(num_qubits);
        s.add_letters(vec![Pauli::I; num_qubits], Complex64::new(coeff, 0.0));
        s
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Add `coeff * letters`, merging and pruning.
    pub fn add_letters(&mut self, letters: Vec<Pauli>, coeff: Complex64) {
        assert_eq!(letters.len(), self.num_qubits, "letter count mismatch");
        use std::collections::btree_map::Entry;
        match self.terms.entry(letters) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if e.get().norm() < COEFF_TOL {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                if coeff.norm() >= COEFF_TOL {
                    e.insert(coeff);
                }
            }
        }
    }

    /// Add a phased string: the phase is folded into the coefficient.
    pub fn add_string(&mut self, s: &PauliString, coeff: Complex64) {
        self.add_letters(s.letters().to_vec(), coeff * s.phase());
    }

    /// Convenience for real-coefficient terms given as (qubit, letter) pairs.
    pub fn add_term(&mut self, ops: &[(usize, Pauli)], coeff: f64) -> Result<()> {
        let mut letters = vec![Pauli::I; self.num_qubits];
        for &(q, p) in ops {
            if q >= self.num_qubits {
                return Err(Error::QubitIndex {
                    index: q,
                    num_qubits: self.num_qubits,
                });
            }
            letters[q] = p;
        }
        self.add_letters(letters, Complex64::new(coeff, 0.0));
        Ok(())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[Pauli], Complex64)> {
        self.terms.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn coefficient(&self, letters: &[Pauli]) -> Complex64 {
        self.terms
            .get(letters)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Coefficient of the all-identity string.
    pub fn identity_coefficient(&self) -> Complex64 {
        self.coefficient(&vec![Pauli::I; self.num_qubits])
    }

    pub fn scale(&self, factor: Complex64) -> PauliSum {
        let mut out = PauliSum::new(self.num_qubits);
        for (letters, c) in self.terms() {
            out.add_letters(letters.to_vec(), c * factor);
        }
        out
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::SizeMismatch {
                left: self.num_qubits,
                right: other.num_qubits,
            });
        }
        let mut out = self.clone();
        for (letters, c) in other.terms() {
            out.add_letters(letters.to_vec(), c);
        }
        Ok(out)
    }

    /// Canonical operator product: every term pair is multiplied with the
    /// single-qubit Pauli rules, phases are accumulated into coefficients,
    /// and equal letter sequences are merged.
    pub fn multiply(&self, other: &PauliSum) -> Result<PauliSum> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::SizeMismatch {
                left: self.num_qubits,
                right: other.num_qubits,
            });
        }
        let mut out = PauliSum::new(self.num_qubits);
        for (la, ca) in self.terms() {
            for (lb, cb) in other.terms() {
                let mut letters = Vec::with_capacity(self.num_qubits);
                let mut turns: u8 = 0;
                for (&a, &b) in la.iter().zip(lb) {
                    let (p, k) = a.mul(b);
                    letters.push(p);
                    turns = (turns + k) % 4;
                }
                out.add_letters(letters, ca * cb * phase_factor(turns));
            }
        }
        Ok(out)
    }

    /// Largest imaginary part over all coefficients.
    pub fn max_imag(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_imag() <= tol
    }

    /// True when every term contains only Z and I letters.
    pub fn is_diagonal(&self) -> bool {
        self.terms
            .keys()
            .all(|letters| letters.iter().all(|&p| matches!(p, Pauli::I | Pauli::Z)))
    }

    /// Text form: one `<coeff_re> <coeff_im> <letters>` line per term,
    /// qubit 0 rightmost, terms in canonical order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (letters, c) in self.terms() {
            out.push_str(&format!("{} {} {}\n", c.re, c.im, letters_to_string(letters)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<PauliSum> {
        let mut parsed: Vec<(Vec<Pauli>, Complex64)> = Vec::new();
        let mut num_qubits = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected `re im letters`, got '{line}'",
                    lineno + 1
                )));
            }
            let re: f64 = fields[0]
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let im: f64 = fields[1]
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let letters = letters_from_string(fields[2])?;
            match num_qubits {
                None => num_qubits = Some(letters.len()),
                Some(n) if n != letters.len() => {
                    return Err(Error::Parse(format!(
                        "line {}: inconsistent register size",
                        lineno + 1
                    )))
                }
                _ => {}
            }
            parsed.push((letters, Complex64::new(re, im)));
        }
        let n = num_qubits.ok_or_else(|| Error::Parse("empty operator text".into()))?;
        let mut sum = PauliSum::new(n);
        for (letters, c) in parsed {
            sum.add_letters(letters, c);
        }
        Ok(sum)
    }
}

/// Lattice model described by its couplings. Hubbard registers hold 2L
/// qubits (two spin chains stacked as a ladder); the spin models use L.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Ising {
        sites: usize,
        /// Transverse field Γ.
        gamma: f64,
        /// Use the `+Γ Σ X` sign convention instead of the internal `-Γ Σ X`.
        #[serde(default)]
        positive_field: bool,
    },
    Heisenberg {
        sites: usize,
        /// XY coupling Λ.
        coupling: f64,
    },
    Hubbard {
        sites: usize,
        /// Hopping t.
        hopping: f64,
        /// On-site repulsion U.
        repulsion: f64,
    },
}

impl ModelSpec {
    pub fn sites(&self) -> usize {
        match *self {
            ModelSpec::Ising { sites, .. }
            | ModelSpec::Heisenberg { sites, .. }
            | ModelSpec::Hubbard { sites, .. } => sites,
        }
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            ModelSpec::Hubbard { sites, .. } => 2 * sites,
            _ => self.sites(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelSpec::Ising { .. } => "ising",
            ModelSpec::Heisenberg { .. } => "heisenberg",
            ModelSpec::Hubbard { .. } => "hubbard",
        }
    }

    /// The swept coupling of the model (Γ, Λ, or U/4t).
    pub fn relevant_param(&self) -> f64 {
        match *self {
            ModelSpec::Ising { gamma, .. } => gamma,
            ModelSpec::Heisenberg { coupling, .. } => coupling,
            ModelSpec::Hubbard {
                hopping, repulsion, ..
            } => repulsion / (4.0 * hopping),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites() < 2 {
            return Err(Error::InvalidModel(format!(
                "need at least 2 sites, got {}",
                self.sites()
            )));
        }
        let params: Vec<f64> = match *self {
            ModelSpec::Ising { gamma, .. } => vec![gamma],
            ModelSpec::Heisenberg { coupling, .. } => vec![coupling],
            ModelSpec::Hubbard {
                hopping, repulsion, ..
            } => vec![hopping, repulsion],
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidModel("non-finite coupling parameter".into()));
        }
        Ok(())
    }
}

/// Build the qubit Hamiltonian of a lattice model on an open chain.
///
/// Ising: `-Σ Z_k Z_{k+1} - Γ Σ X_k` (or `+Γ` with `positive_field`).
/// Heisenberg: `-Σ Z_k Z_{k+1} + Λ Σ (X_k X_{k+1} + Y_k Y_{k+1})`.
/// Hubbard on a 2L ladder: `-(t/2) Σ (XX + YY)` along each spin chain,
/// `(U/4) Σ Z_i Z_{i+L}` on the rungs, plus a `U·L/4` identity shift.
pub fn build_model(spec: &ModelSpec) -> Result<PauliSum> {
    spec.validate()?;
    let n = spec.num_qubits();
    let mut h = PauliSum::new(n);
    match *spec {
        ModelSpec::Ising {
            sites,
            gamma,
            positive_field,
        } => {
            for k in 0..sites - 1 {
                h.add_term(&[(k, Pauli::Z), (k + 1, Pauli::Z)], -1.0)?;
            }
            let sign = if positive_field { 1.0 } else { -1.0 };
            for k in 0..sites {
                h.add_term(&[(k, Pauli::X)], sign * gamma)?;
            }
        }
        ModelSpec::Heisenberg { sites, coupling } => {
            for k in 0..sites - 1 {
                h.add_term(&[(k, Pauli::Z), (k + 1, Pauli::Z)], -1.0)?;
                h.add_term(&[(k, Pauli::X), (k + 1, Pauli::X)], coupling)?;
                h.add_term(&[(k, Pauli::Y), (k + 1, Pauli::Y)], coupling)?;
            }
        }
        ModelSpec::Hubbard {
            sites,
            hopping,
            repulsion,
        } => {
            for chain in 0..2 {
                let base = chain * sites;
                for i in 0..sites - 1 {
                    h.add_term(
                        &[(base + i, Pauli::X), (base + i + 1, Pauli::X)],
                        -hopping / 2.0,
                    )?;
                    h.add_term(
                        &[(base + i, Pauli::Y), (base + i + 1, Pauli::Y)],
                        -hopping / 2.0,
                    )?;
                }
            }
            for i in 0..sites {
                h.add_term(&[(i, Pauli::Z), (i + sites, Pauli::Z)], repulsion / 4.0)?;
            }
            h.add_letters(
                vec![Pauli::I; n],
                Complex64::new(repulsion * sites as f64 / 4.0, 0.0),
            );
        }
    }
    Ok(h)
}

/// Measurement axis per qubit: the post-rotation applied before a Z-basis
/// readout. Z and I both leave the qubit unrotated; they differ only in
/// how the reconstruction matrix is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    Z,
    X,
    Y,
    I,
}

impl Axis {
    pub fn symbol(self) -> char {
        match self {
            Axis::Z => 'Z',
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::I => 'I',
        }
    }

    pub fn from_symbol(c: char) -> Result<Self> {
        match c {
            'Z' => Ok(Axis::Z),
            'X' => Ok(Axis::X),
            'Y' => Ok(Axis::Y),
            'I' => Ok(Axis::I),
            other => Err(Error::Parse(format!("unknown axis '{other}'"))),
        }
    }

    /// True when the post-rotation matrix differs from the identity.
    pub fn is_rotated(self) -> bool {
        matches!(self, Axis::X | Axis::Y)
    }
}

/// Per-qubit measurement axes for the system register.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeasurementBasis {
    axes: Vec<Axis>,
}

impl MeasurementBasis {
    pub fn new(axes: Vec<Axis>) -> Self {
        Self { axes }
    }

    pub fn uniform(axis: Axis, len: usize) -> Self {
        Self {
            axes: vec![axis; len],
        }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    /// Number of qubits whose post-rotation is a genuine rotation.
    pub fn num_rotated(&self) -> usize {
        self.axes.iter().filter(|a| a.is_rotated()).count()
    }

    pub fn from_str_axes(s: &str) -> Result<Self> {
        let mut axes: Vec<Axis> = s.chars().map(Axis::from_symbol).collect::<Result<_>>()?;
        axes.reverse();
        Ok(Self { axes })
    }
}

impl fmt::Display for MeasurementBasis {
    /// Qubit 0 rightmost, matching the operator text form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.axes.iter().rev() {
            write!(f, "{}", a.symbol())?;
        }
        Ok(())
    }
}

/// Split a Hamiltonian into groups measurable in a single basis each.
///
/// Terms built from one non-identity letter type go to the uniform basis of
/// that letter; the identity term joins the all-Z group. A term mixing
/// letter types cannot share one of the three uniform bases, so it gets a
/// dedicated per-term basis (reported via a warning). The groups partition
/// the input exactly.
pub fn group_by_basis(h: &PauliSum) -> BTreeMap<MeasurementBasis, PauliSum> {
    let n = h.num_qubits();
    let mut groups: BTreeMap<MeasurementBasis, PauliSum> = BTreeMap::new();
    let mut identity_coeff = Complex64::new(0.0, 0.0);
    let mut has_non_identity = false;

    for (letters, coeff) in h.terms() {
        let mut kinds: Vec<Pauli> = letters
            .iter()
            .copied()
            .filter(|&p| p != Pauli::I)
            .collect();
        kinds.sort();
        kinds.dedup();
        match kinds.as_slice() {
            [] => {
                identity_coeff += coeff;
                continue;
            }
            [single] => {
                has_non_identity = true;
                let axis = match single {
                    Pauli::X => Axis::X,
                    Pauli::Y => Axis::Y,
                    Pauli::Z => Axis::Z,
                    Pauli::I => unreachable!(),
                };
                let basis = MeasurementBasis::uniform(axis, n);
                groups
                    .entry(basis)
                    .or_insert_with(|| PauliSum::new(n))
                    .add_letters(letters.to_vec(), coeff);
            }
            _ => {
                has_non_identity = true;
                let axes: Vec<Axis> = letters
                    .iter()
                    .map(|&p| match p {
                        Pauli::I => Axis::I,
                        Pauli::X => Axis::X,
                        Pauli::Y => Axis::Y,
                        Pauli::Z => Axis::Z,
                    })
                    .collect();
                let basis = MeasurementBasis::new(axes);
                log::warn!(
                    "term {} not assignable to a uniform basis; using dedicated basis {}",
                    letters_to_string(letters),
                    basis
                );
                groups
                    .entry(basis)
                    .or_insert_with(|| PauliSum::new(n))
                    .add_letters(letters.to_vec(), coeff);
            }
        }
    }

    if identity_coeff.norm() >= COEFF_TOL || !has_non_identity {
        let z_basis = MeasurementBasis::uniform(Axis::Z, n);
        groups
            .entry(z_basis)
            .or_insert_with(|| PauliSum::new(n))
            .add_letters(vec![Pauli::I; n], identity_coeff);
    }

    groups
}

/// Rewrite a basis group in the post-rotated frame, where each of its terms
/// becomes a Z/I string with the same coefficient.
pub fn rotate_to_diagonal(group: &PauliSum, basis: &MeasurementBasis) -> Result<PauliSum> {
    if basis.len() != group.num_qubits() {
        return Err(Error::SizeMismatch {
            left: basis.len(),
            right: group.num_qubits(),
        });
    }
    let mut out = PauliSum::new(group.num_qubits());
    for (letters, coeff) in group.terms() {
        let mut rotated = Vec::with_capacity(letters.len());
        for (&p, &a) in letters.iter().zip(basis.axes()) {
            let r = match (p, a) {
                (Pauli::I, _) => Pauli::I,
                (Pauli::Z, Axis::Z) | (Pauli::Z, Axis::I) => Pauli::Z,
                (Pauli::X, Axis::X) => Pauli::Z,
                (Pauli::Y, Axis::Y) => Pauli::Z,
                _ => {
                    return Err(Error::NonDiagonalTerm(format!(
                        "{} in basis {}",
                        letters_to_string(letters),
                        basis
                    )))
                }
            };
            rotated.push(r);
        }
        out.add_letters(rotated, coeff);
    }
    Ok(out)
}

/// Expectation of a Z/I operator over a bit-string distribution:
/// `Σ_i p(i) Π_{k in support} (-1)^{bit_k(i)}` summed with coefficients.
pub fn diagonal_expectation(h_diag: &PauliSum, p: &ProbDist) -> Result<f64> {
    if h_diag.num_qubits() != p.register_size() {
        return Err(Error::SizeMismatch {
            left: h_diag.num_qubits(),
            right: p.register_size(),
        });
    }
    if !h_diag.is_diagonal() {
        let offender = h_diag
            .terms()
            .find(|(l, _)| l.iter().any(|&p| matches!(p, Pauli::X | Pauli::Y)))
            .map(|(l, _)| letters_to_string(l))
            .unwrap_or_default();
        return Err(Error::NonDiagonalTerm(offender));
    }
    let total = p.total();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Unnormalized(total));
    }
    let masks: Vec<(u64, Complex64)> = h_diag
        .terms()
        .map(|(letters, c)| {
            let mask = letters
                .iter()
                .enumerate()
                .filter(|(_, &p)| p == Pauli::Z)
                .fold(0u64, |m, (k, _)| m | (1 << k));
            (mask, c)
        })
        .collect();
    let mut value = 0.0;
    for (index, prob) in p.iter() {
        for &(mask, c) in &masks {
            let parity = (index & mask).count_ones() & 1;
            let sign = if parity == 0 { 1.0 } else { -1.0 };
            value += prob * sign * c.re;
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::pauli_sum_to_dense;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn single_qubit_products() {
        // X * Z = -i Y
        let x = PauliString::single(1, 0, Pauli::X).unwrap();
        let z = PauliString::single(1, 0, Pauli::Z).unwrap();
        let xz = x.multiply(&z).unwrap();
        assert_eq!(xz.letters(), &[Pauli::Y]);
        assert_eq!(xz.phase(), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn zz_squares_to_identity() {
        let mut zz = PauliSum::new(2);
        zz.add_term(&[(0, Pauli::Z), (1, Pauli::Z)], 1.0).unwrap();
        let sq = zz.multiply(&zz).unwrap();
        assert_eq!(sq.num_terms(), 1);
        assert_eq!(sq.identity_coefficient(), c(1.0));
    }

    #[test]
    fn sandwich_product_matches_dense_oracle() {
        // (I + 0.1 Z0Z1)(-Z0Z1 - X0 - X1)(I + 0.1 Z0Z1)
        let mut a = PauliSum::identity(2, 1.0);
        a.add_term(&[(0, Pauli::Z), (1, Pauli::Z)], 0.1).unwrap();
        let mut h = PauliSum::new(2);
        h.add_term(&[(0, Pauli::Z), (1, Pauli::Z)], -1.0).unwrap();
        h.add_term(&[(0, Pauli::X)], -1.0).unwrap();
        h.add_term(&[(1, Pauli::X)], -1.0).unwrap();
        let aha = a.multiply(&h).unwrap().multiply(&a).unwrap();

        assert_eq!(aha.num_terms(), 4);
        let zz = aha.coefficient(&[Pauli::Z, Pauli::Z]);
        let x0 = aha.coefficient(&[Pauli::X, Pauli::I]);
        let x1 = aha.coefficient(&[Pauli::I, Pauli::X]);
        let id = aha.identity_coefficient();
        assert!((zz - c(-1.01)).norm() < 1e-12);
        assert!((x0 - c(-0.99)).norm() < 1e-12);
        assert!((x1 - c(-0.99)).norm() < 1e-12);
        assert!((id - c(-0.2)).norm() < 1e-12);

        // Dense 4x4 oracle: multiply matrices, compare entrywise.
        let lhs = pauli_sum_to_dense(&aha);
        let rhs = pauli_sum_to_dense(&a) * pauli_sum_to_dense(&h) * pauli_sum_to_dense(&a);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn ising_term_counts() {
        let h = build_model(&ModelSpec::Ising {
            sites: 8,
            gamma: 1.0,
            positive_field: false,
        })
        .unwrap();
        assert_eq!(h.num_terms(), 15);
        let zz_terms = h
            .terms()
            .filter(|(l, _)| l.iter().filter(|&&p| p == Pauli::Z).count() == 2)
            .count();
        assert_eq!(zz_terms, 7);
        assert!(h.is_hermitian(0.0));
    }

    #[test]
    fn heisenberg_l2_terms() {
        let h = build_model(&ModelSpec::Heisenberg {
            sites: 2,
            coupling: 1.0,
        })
        .unwrap();
        assert_eq!(h.num_terms(), 3);
        assert_eq!(h.coefficient(&[Pauli::Z, Pauli::Z]), c(-1.0));
        assert_eq!(h.coefficient(&[Pauli::X, Pauli::X]), c(1.0));
        assert_eq!(h.coefficient(&[Pauli::Y, Pauli::Y]), c(1.0));
    }

    #[test]
    fn hubbard_l2_expansion() {
        let h = build_model(&ModelSpec::Hubbard {
            sites: 2,
            hopping: 1.0,
            repulsion: 4.0,
        })
        .unwrap();
        assert_eq!(h.num_terms(), 7);
        use Pauli::*;
        assert_eq!(h.coefficient(&[X, X, I, I]), c(-0.5));
        assert_eq!(h.coefficient(&[Y, Y, I, I]), c(-0.5));
        assert_eq!(h.coefficient(&[I, I, X, X]), c(-0.5));
        assert_eq!(h.coefficient(&[I, I, Y, Y]), c(-0.5));
        assert_eq!(h.coefficient(&[Z, I, Z, I]), c(1.0));
        assert_eq!(h.coefficient(&[I, Z, I, Z]), c(1.0));
        assert_eq!(h.identity_coefficient(), c(2.0));
    }

    #[test]
    fn model_rejects_bad_input() {
        assert!(build_model(&ModelSpec::Ising {
            sites: 1,
            gamma: 1.0,
            positive_field: false
        })
        .is_err());
        assert!(build_model(&ModelSpec::Heisenberg {
            sites: 4,
            coupling: f64::NAN
        })
        .is_err());
    }

    #[test]
    fn grouping_ising() {
        let h = build_model(&ModelSpec::Ising {
            sites: 2,
            gamma: 1.0,
            positive_field: false,
        })
        .unwrap();
        let groups = group_by_basis(&h);
        assert_eq!(groups.len(), 2);
        let zb = MeasurementBasis::uniform(Axis::Z, 2);
        let xb = MeasurementBasis::uniform(Axis::X, 2);
        assert_eq!(groups[&zb].num_terms(), 1);
        assert_eq!(groups[&xb].num_terms(), 2);
    }

    #[test]
    fn grouping_heisenberg_three_groups() {
        let h = build_model(&ModelSpec::Heisenberg {
            sites: 4,
            coupling: 0.7,
        })
        .unwrap();
        let groups = group_by_basis(&h);
        assert_eq!(groups.len(), 3);
    }

    #[test]
    fn grouping_partition_reassembles() {
        let h = build_model(&ModelSpec::Hubbard {
            sites: 3,
            hopping: 0.8,
            repulsion: 2.5,
        })
        .unwrap();
        let groups = group_by_basis(&h);
        let mut total = PauliSum::new(h.num_qubits());
        for g in groups.values() {
            total = total.add(g).unwrap();
        }
        assert_eq!(total, h);
    }

    #[test]
    fn grouping_constant_only() {
        let h = PauliSum::identity(3, 1.5);
        let groups = group_by_basis(&h);
        assert_eq!(groups.len(), 1);
        let (basis, g) = groups.iter().next().unwrap();
        assert_eq!(*basis, MeasurementBasis::uniform(Axis::Z, 3));
        assert_eq!(g.identity_coefficient(), c(1.5));
    }

    #[test]
    fn grouping_fallback_mixed_term() {
        let mut h = PauliSum::new(2);
        h.add_term(&[(0, Pauli::X), (1, Pauli::Z)], 0.5).unwrap();
        let groups = group_by_basis(&h);
        assert_eq!(groups.len(), 1);
        let basis = groups.keys().next().unwrap();
        assert_eq!(basis.axes(), &[Axis::X, Axis::Z]);
        let diag = rotate_to_diagonal(groups.values().next().unwrap(), basis).unwrap();
        assert!(diag.is_diagonal());
    }

    #[test]
    fn diagonal_expectation_cases() {
        let mut h = PauliSum::new(2);
        h.add_term(&[(0, Pauli::Z), (1, Pauli::Z)], -1.0).unwrap();

        let delta = ProbDist::from_pairs(2, &[(0, 1.0)]).unwrap();
        assert!((diagonal_expectation(&h, &delta).unwrap() + 1.0).abs() < 1e-12);

        let uniform = ProbDist::from_pairs(2, &[(0, 0.25), (1, 0.25), (2, 0.25), (3, 0.25)])
            .unwrap();
        assert!(diagonal_expectation(&h, &uniform).unwrap().abs() < 1e-12);

        let p = ProbDist::from_pairs(2, &[(0, 0.4), (1, 0.1), (2, 0.1), (3, 0.4)]).unwrap();
        assert!((diagonal_expectation(&h, &p).unwrap() + 0.6).abs() < 1e-12);
    }

    #[test]
    fn diagonal_expectation_rejects_bad_input() {
        let mut hx = PauliSum::new(2);
        hx.add_term(&[(0, Pauli::X)], 1.0).unwrap();
        let p = ProbDist::from_pairs(2, &[(0, 1.0)]).unwrap();
        assert!(diagonal_expectation(&hx, &p).is_err());
    }

    #[test]
    fn text_round_trip() {
        let h = build_model(&ModelSpec::Hubbard {
            sites: 2,
            hopping: 1.0,
            repulsion: 4.0,
        })
        .unwrap();
        let text = h.to_text();
        let parsed = PauliSum::from_text(&text).unwrap();
        assert_eq!(parsed, h);
        // Deterministic ordering across repeated dumps.
        assert_eq!(text, h.to_text());
    }
}
