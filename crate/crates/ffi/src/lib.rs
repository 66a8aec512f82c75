//! C ABI over the jqc library.
//!
//! Every object crosses the boundary as an opaque handle created by a
//! `jqc_*_new`-style constructor and released by the matching `jqc_*_free`.
//! Functions return [`JqcStatus`]; outputs are written through pointers
//! only on `JQC_STATUS_OK`. Strings returned by the library are released
//! with [`jqc_string_free`].

use std::ffi::CString;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use jqc::jastrow::{transformed_energy, JastrowParams, TruncationSpec};
use jqc::measurement::{jqc_energy_sampled, SamplingConfig, WeightConvention};
use jqc::pauli::{build_model, ModelSpec, PauliSum};
use jqc::statevector::{
    apply_jastrow_exact, build_ry_cnot, exact_ground_state, expectation, hadamard_wall,
    run_circuit, Circuit, StateVector,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JqcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SizeMismatch = 3,
    NonHermitian = 4,
    NumericalFailure = 5,
    IoFailure = 6,
    Panic = 7,
}

fn status_of(err: &jqc::Error) -> JqcStatus {
    use jqc::Error::*;
    match err {
        SizeMismatch { .. } | ParameterCount { .. } => JqcStatus::SizeMismatch,
        NonHermitian(_) => JqcStatus::NonHermitian,
        InvalidModel(_) | QubitIndex { .. } | InvalidClassMap(_) | Config(_) | Parse(_)
        | RegisterTooLarge { .. } => JqcStatus::InvalidArgument,
        VanishingNorm(_) | AllZeroWeight | VanishingDenominator(_) | NonConvergence(_)
        | NonFiniteObjective(_) | InconsistentEnergies(_) | ImaginaryResidue(_)
        | Unnormalized(_) | NonDiagonalTerm(_) => JqcStatus::NumericalFailure,
        Io(_) | Json(_) => JqcStatus::IoFailure,
    }
}

/// Opaque lattice-model description.
pub struct JqcModel(ModelSpec);
/// Opaque operator (weighted Pauli-string sum).
pub struct JqcOperator(PauliSum);
/// Opaque gate sequence.
pub struct JqcCircuit(Circuit);
/// Opaque normalized state vector.
pub struct JqcState(StateVector);
/// Opaque Jastrow coefficient set over a symmetry class map.
pub struct JqcJastrow(JastrowParams);

fn guard<F: FnOnce() -> JqcStatus>(body: F) -> JqcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => JqcStatus::Panic,
    }
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> JqcStatus {
    if out.is_null() {
        return JqcStatus::NullPointer;
    }
    *out = Box::into_raw(Box::new(value));
    JqcStatus::Ok
}

macro_rules! try_ref {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => return JqcStatus::NullPointer,
        }
    };
}

macro_rules! try_result {
    ($expr:expr) => {
        match $expr {
            Ok(v) => v,
            Err(e) => return status_of(&e),
        }
    };
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn jqc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Static description of a status code; do not free.
#[no_mangle]
pub extern "C" fn jqc_status_message(status: JqcStatus) -> *const c_char {
    let text: &'static str = match status {
        JqcStatus::Ok => "ok\0",
        JqcStatus::NullPointer => "null pointer argument\0",
        JqcStatus::InvalidArgument => "invalid argument\0",
        JqcStatus::SizeMismatch => "size or parameter-count mismatch\0",
        JqcStatus::NonHermitian => "operator is not Hermitian\0",
        JqcStatus::NumericalFailure => "numerical failure\0",
        JqcStatus::IoFailure => "i/o failure\0",
        JqcStatus::Panic => "internal panic\0",
    };
    text.as_ptr() as *const c_char
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must originate from a jqc-ffi call and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn jqc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// --- models ---------------------------------------------------------------

/// Transverse-field Ising chain on `sites` qubits.
#[no_mangle]
pub extern "C" fn jqc_model_ising(
    sites: usize,
    gamma: f64,
    positive_field: bool,
    out: *mut *mut JqcModel,
) -> JqcStatus {
    guard(|| {
        let spec = ModelSpec::Ising {
            sites,
            gamma,
            positive_field,
        };
        try_result!(spec.validate());
        unsafe { write_handle(out, JqcModel(spec)) }
    })
}

/// XXZ-type chain with XY coupling `coupling` on `sites` qubits.
#[no_mangle]
pub extern "C" fn jqc_model_heisenberg(
    sites: usize,
    coupling: f64,
    out: *mut *mut JqcModel,
) -> JqcStatus {
    guard(|| {
        let spec = ModelSpec::Heisenberg { sites, coupling };
        try_result!(spec.validate());
        unsafe { write_handle(out, JqcModel(spec)) }
    })
}

/// Fermionic chain mapped onto a 2L-qubit ladder.
#[no_mangle]
pub extern "C" fn jqc_model_hubbard(
    sites: usize,
    hopping: f64,
    repulsion: f64,
    out: *mut *mut JqcModel,
) -> JqcStatus {
    guard(|| {
        let spec = ModelSpec::Hubbard {
            sites,
            hopping,
            repulsion,
        };
        try_result!(spec.validate());
        unsafe { write_handle(out, JqcModel(spec)) }
    })
}

/// # Safety
/// `model` must be a live handle from a `jqc_model_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn jqc_model_free(model: *mut JqcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub extern "C" fn jqc_model_num_qubits(model: *const JqcModel, out: *mut usize) -> JqcStatus {
    guard(|| {
        let model = try_ref!(model);
        if out.is_null() {
            return JqcStatus::NullPointer;
        }
        unsafe { *out = model.0.num_qubits() };
        JqcStatus::Ok
    })
}

/// Build the model Hamiltonian.
#[no_mangle]
pub extern "C" fn jqc_model_hamiltonian(
    model: *const JqcModel,
    out: *mut *mut JqcOperator,
) -> JqcStatus {
    guard(|| {
        let model = try_ref!(model);
        let h = try_result!(build_model(&model.0));
        unsafe { write_handle(out, JqcOperator(h)) }
    })
}

// --- operators ------------------------------------------------------------

/// # Safety
/// `op` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn jqc_operator_free(op: *mut JqcOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

#[no_mangle]
pub extern "C" fn jqc_operator_num_terms(op: *const JqcOperator, out: *mut usize) -> JqcStatus {
    guard(|| {
        let op = try_ref!(op);
        if out.is_null() {
            return JqcStatus::NullPointer;
        }
        unsafe { *out = op.0.num_terms() };
        JqcStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn jqc_operator_num_qubits(op: *const JqcOperator, out: *mut usize) -> JqcStatus {
    guard(|| {
        let op = try_ref!(op);
        if out.is_null() {
            return JqcStatus::NullPointer;
        }
        unsafe { *out = op.0.num_qubits() };
        JqcStatus::Ok
    })
}

/// Text form of the operator (`re im letters` per line); release with
/// [`jqc_string_free`].
#[no_mangle]
pub extern "C" fn jqc_operator_to_text(
    op: *const JqcOperator,
    out: *mut *mut c_char,
) -> JqcStatus {
    guard(|| {
        let op = try_ref!(op);
        if out.is_null() {
            return JqcStatus::NullPointer;
        }
        match CString::new(op.0.to_text()) {
            Ok(text) => {
                unsafe { *out = text.into_raw() };
                JqcStatus::Ok
            }
            Err(_) => JqcStatus::NumericalFailure,
        }
    })
}

/// Minimal eigenvalue of a Hermitian operator (dense or iterative).
#[no_mangle]
pub extern "C" fn jqc_operator_ground_energy(
    op: *const JqcOperator,
    out: *mut f64,
) -> JqcStatus {
    guard(|| {
        let op = try_ref!(op);
        if out.is_null() {
            return JqcStatus::NullPointer;
        }
        let (energy, _) = try_result!(exact_ground_state(&op.0));
        unsafe { *out = energy };
        JqcStatus::Ok
    })
}

// --- circuits and states ----------------------------------------------------

/// The heuristic ansatz: `depth` blocks of per-qubit Ry rotations followed
/// by a CNOT cascade.
#[no_mangle]
pub extern "C" fn jqc_circuit_ry_cnot(
    num_qubits: usize,
    depth: usize,
    out: *mut *mut JqcCircuit,
) -> JqcStatus {
    guard(|| {
        if num_qubits == 0 {
            return JqcStatus::InvalidArgument;
        }
        unsafe { write_handle(out, JqcCircuit(build_ry_cnot(num_qubits, depth))) }
    })
}

/// A Hadamard on every qubit.
#[no_mangle]
pub extern "C" fn jqc_circuit_hadamard_wall(
    num_qubits: usize,
    out: *mut *mut JqcCircuit,
) -> JqcStatus {
    guard(|| {
        if num_qubits == 0 {
            return JqcStatus::InvalidArgument;
        }
        unsafe { write_handle(out, JqcCircuit(hadamard_wall(num_qubits))) }
    })
}

/// # Safety
/// `circuit` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn jqc_circuit_free(circuit: *mut JqcCircuit) {
    if !circuit.is_null() {
        drop(Box::from_raw(circuit));
    }
}

#[no_mangle]
pub extern "C" fn jqc_circuit_num_params(
    circuit: *const JqcCircuit,
    out: *mut usize,
) -> JqcStatus {
    guard(|| {
        let circuit = try_ref!(circuit);
        if out.is_null() {
            return JqcStatus::NullPointer;
        }
        unsafe { *out = circuit.0.num_params() };
        JqcStatus::Ok
    })
}

/// Run a circuit from |0...0> with `theta_len` rotation angles.
///
/// # Safety
/// `theta` must point to `theta_len` readable doubles (may be null when
/// `theta_len` is 0).
#[no_mangle]
pub unsafe extern "C" fn jqc_run_circuit(
    circuit: *const JqcCircuit,
    theta: *const f64,
    theta_len: usize,
    out: *mut *mut JqcState,
) -> JqcStatus {
    guard(|| {
        let circuit = try_ref!(circuit);
        if theta.is_null() && theta_len > 0 {
            return JqcStatus::NullPointer;
        }
        let angles = if theta_len == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(theta, theta_len)
        };
        let state = try_result!(run_circuit(&circuit.0, angles));
        write_handle(out, JqcState(state))
    })
}

/// # Safety
/// `state` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn jqc_state_free(state: *mut JqcState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

#[no_mangle]
pub extern "C" fn jqc_state_num_qubits(state: *const JqcState, out: *mut usize) -> JqcStatus {
    guard(|| {
        let state = try_ref!(state);
        if out.is_null() {
            return JqcStatus::NullPointer;
        }
        unsafe { *out = state.0.num_qubits() };
        JqcStatus::Ok
    })
}

/// Copy the amplitudes into `buffer` as interleaved re, im pairs;
/// `buffer_len` must be exactly `2 * 2^num_qubits`.
///
/// # Safety
/// `buffer` must point to `buffer_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn jqc_state_amplitudes(
    state: *const JqcState,
    buffer: *mut f64,
    buffer_len: usize,
) -> JqcStatus {
    guard(|| {
        let state = try_ref!(state);
        if buffer.is_null() {
            return JqcStatus::NullPointer;
        }
        let amps = state.0.amplitudes();
        if buffer_len != 2 * amps.len() {
            return JqcStatus::SizeMismatch;
        }
        let slice = std::slice::from_raw_parts_mut(buffer, buffer_len);
        for (i, a) in amps.iter().enumerate() {
            slice[2 * i] = a.re;
            slice[2 * i + 1] = a.im;
        }
        JqcStatus::Ok
    })
}

// --- Jastrow ----------------------------------------------------------------

/// Chain-symmetric coefficients: `lambda_len` must equal `sites - 1`
/// (one coefficient per pair distance).
///
/// # Safety
/// `lambda` must point to `lambda_len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn jqc_jastrow_chain(
    sites: usize,
    lambda: *const f64,
    lambda_len: usize,
    out: *mut *mut JqcJastrow,
) -> JqcStatus {
    guard(|| {
        if lambda.is_null() && lambda_len > 0 {
            return JqcStatus::NullPointer;
        }
        let values = std::slice::from_raw_parts(lambda, lambda_len).to_vec();
        let jp = try_result!(JastrowParams::chain(sites, values));
        write_handle(out, JqcJastrow(jp))
    })
}

/// Ladder-symmetric coefficients over 2*`sites` qubits: `lambda_len` must
/// equal `3 * sites - 2`.
///
/// # Safety
/// `lambda` must point to `lambda_len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn jqc_jastrow_ladder(
    sites: usize,
    lambda: *const f64,
    lambda_len: usize,
    out: *mut *mut JqcJastrow,
) -> JqcStatus {
    guard(|| {
        if lambda.is_null() && lambda_len > 0 {
            return JqcStatus::NullPointer;
        }
        let values = std::slice::from_raw_parts(lambda, lambda_len).to_vec();
        let jp = try_result!(JastrowParams::ladder(sites, values));
        write_handle(out, JqcJastrow(jp))
    })
}

/// # Safety
/// `jastrow` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn jqc_jastrow_free(jastrow: *mut JqcJastrow) {
    if !jastrow.is_null() {
        drop(Box::from_raw(jastrow));
    }
}

#[no_mangle]
pub extern "C" fn jqc_jastrow_num_classes(
    jastrow: *const JqcJastrow,
    out: *mut usize,
) -> JqcStatus {
    guard(|| {
        let jastrow = try_ref!(jastrow);
        if out.is_null() {
            return JqcStatus::NullPointer;
        }
        unsafe { *out = jastrow.0.num_classes() };
        JqcStatus::Ok
    })
}

/// Classical log-weight of a bit string (given as an integer index).
#[no_mangle]
pub extern "C" fn jqc_jastrow_log_weight(
    jastrow: *const JqcJastrow,
    bits: u64,
    out: *mut f64,
) -> JqcStatus {
    guard(|| {
        let jastrow = try_ref!(jastrow);
        if out.is_null() {
            return JqcStatus::NullPointer;
        }
        if bits >> jastrow.0.num_qubits() != 0 {
            return JqcStatus::InvalidArgument;
        }
        unsafe { *out = jastrow.0.log_weight(bits) };
        JqcStatus::Ok
    })
}

/// Apply the exact projector to a state, returning a new normalized state.
#[no_mangle]
pub extern "C" fn jqc_apply_jastrow(
    state: *const JqcState,
    jastrow: *const JqcJastrow,
    out: *mut *mut JqcState,
) -> JqcStatus {
    guard(|| {
        let state = try_ref!(state);
        let jastrow = try_ref!(jastrow);
        let projected = try_result!(apply_jastrow_exact(&state.0, &jastrow.0));
        unsafe { write_handle(out, JqcState(projected)) }
    })
}

// --- energies ---------------------------------------------------------------

/// `<psi|H|psi>` for a Hermitian operator.
#[no_mangle]
pub extern "C" fn jqc_expectation(
    op: *const JqcOperator,
    state: *const JqcState,
    out: *mut f64,
) -> JqcStatus {
    guard(|| {
        let op = try_ref!(op);
        let state = try_ref!(state);
        if out.is_null() {
            return JqcStatus::NullPointer;
        }
        let value = try_result!(expectation(&op.0, &state.0));
        unsafe { *out = value };
        JqcStatus::Ok
    })
}

/// Energy of the truncated-projector state via operator ratios,
/// `<P'HP'> / <P'P'>` with `P' = (I + J)^order`.
#[no_mangle]
pub extern "C" fn jqc_transformed_energy(
    state: *const JqcState,
    op: *const JqcOperator,
    jastrow: *const JqcJastrow,
    order: usize,
    out: *mut f64,
) -> JqcStatus {
    guard(|| {
        let state = try_ref!(state);
        let op = try_ref!(op);
        let jastrow = try_ref!(jastrow);
        if out.is_null() {
            return JqcStatus::NullPointer;
        }
        let spec = try_result!(TruncationSpec::new(order));
        let value = try_result!(transformed_energy(&state.0, &op.0, &jastrow.0, spec));
        unsafe { *out = value };
        JqcStatus::Ok
    })
}

/// Sampled projected-state energy over the entangled-copy pipeline:
/// `shots` per basis, `m_rep` repetitions, deterministic in `seed`.
/// Writes the mean and standard error.
///
/// # Safety
/// `theta` must point to `theta_len` readable doubles (null allowed when
/// `theta_len` is 0).
#[no_mangle]
pub unsafe extern "C" fn jqc_sampled_energy(
    model: *const JqcModel,
    circuit: *const JqcCircuit,
    theta: *const f64,
    theta_len: usize,
    jastrow: *const JqcJastrow,
    shots: u64,
    m_rep: usize,
    seed: u64,
    literal_weight: bool,
    out_mean: *mut f64,
    out_stderr: *mut f64,
) -> JqcStatus {
    guard(|| {
        let model = try_ref!(model);
        let circuit = try_ref!(circuit);
        let jastrow = try_ref!(jastrow);
        if out_mean.is_null() || out_stderr.is_null() {
            return JqcStatus::NullPointer;
        }
        if theta.is_null() && theta_len > 0 {
            return JqcStatus::NullPointer;
        }
        let angles = if theta_len == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(theta, theta_len)
        };
        let cfg = SamplingConfig {
            shots,
            m_rep,
            seed,
        };
        let convention = if literal_weight {
            WeightConvention::Literal
        } else {
            WeightConvention::AmplitudeLevel
        };
        let sampled = try_result!(jqc_energy_sampled(
            &model.0, &circuit.0, angles, &jastrow.0, &cfg, convention,
        ));
        *out_mean = sampled.mean;
        *out_stderr = sampled.stderr;
        JqcStatus::Ok
    })
}
