#ifndef JQC_H
#define JQC_H

/* Generated by cbindgen from the jqc-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  JQC_STATUS_OK = 0,
  JQC_STATUS_NULL_POINTER = 1,
  JQC_STATUS_INVALID_ARGUMENT = 2,
  JQC_STATUS_SIZE_MISMATCH = 3,
  JQC_STATUS_NON_HERMITIAN = 4,
  JQC_STATUS_NUMERICAL_FAILURE = 5,
  JQC_STATUS_IO_FAILURE = 6,
  JQC_STATUS_PANIC = 7,
} JqcStatus;

/**
 * Opaque gate sequence.
 */
typedef struct JqcCircuit JqcCircuit;

/**
 * Opaque Jastrow coefficient set over a symmetry class map.
 */
typedef struct JqcJastrow JqcJastrow;

/**
 * Opaque lattice-model description.
 */
typedef struct JqcModel JqcModel;

/**
 * Opaque operator (weighted Pauli-string sum).
 */
typedef struct JqcOperator JqcOperator;

/**
 * Opaque normalized state vector.
 */
typedef struct JqcState JqcState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *jqc_version(void);

/**
 * Static description of a status code; do not free.
 */
const char *jqc_status_message(JqcStatus status);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must originate from a jqc-ffi call and not have been freed already.
 */
void jqc_string_free(char *s);

/**
 * Transverse-field Ising chain on `sites` qubits.
 */
JqcStatus jqc_model_ising(uintptr_t sites, double gamma, bool positive_field, JqcModel **out);

/**
 * XXZ-type chain with XY coupling `coupling` on `sites` qubits.
 */
JqcStatus jqc_model_heisenberg(uintptr_t sites, double coupling, JqcModel **out);

/**
 * Fermionic chain mapped onto a 2L-qubit ladder.
 */
JqcStatus jqc_model_hubbard(uintptr_t sites, double hopping, double repulsion, JqcModel **out);

/**
 * # Safety
 * `model` must be a live handle from a `jqc_model_*` constructor.
 */
void jqc_model_free(JqcModel *model);

JqcStatus jqc_model_num_qubits(const JqcModel *model, uintptr_t *out);

/**
 * Build the model Hamiltonian.
 */
JqcStatus jqc_model_hamiltonian(const JqcModel *model, JqcOperator **out);

/**
 * # Safety
 * `op` must be a live handle from this library.
 */
void jqc_operator_free(JqcOperator *op);

JqcStatus jqc_operator_num_terms(const JqcOperator *op, uintptr_t *out);

JqcStatus jqc_operator_num_qubits(const JqcOperator *op, uintptr_t *out);

/**
 * Text form of the operator (`re im letters` per line); release with
 * [`jqc_string_free`].
 */
JqcStatus jqc_operator_to_text(const JqcOperator *op, char **out);

/**
 * Minimal eigenvalue of a Hermitian operator (dense or iterative).
 */
JqcStatus jqc_operator_ground_energy(const JqcOperator *op, double *out);

/**
 * The heuristic ansatz: `depth` blocks of per-qubit Ry rotations followed
 * by a CNOT cascade.
 */
JqcStatus jqc_circuit_ry_cnot(uintptr_t num_qubits, uintptr_t depth, JqcCircuit **out);

/**
 * A Hadamard on every qubit.
 */
JqcStatus jqc_circuit_hadamard_wall(uintptr_t num_qubits, JqcCircuit **out);

/**
 * # Safety
 * `circuit` must be a live handle from this library.
 */
void jqc_circuit_free(JqcCircuit *circuit);

JqcStatus jqc_circuit_num_params(const JqcCircuit *circuit, uintptr_t *out);

/**
 * Run a circuit from |0...0> with `theta_len` rotation angles.
 *
 * # Safety
 * `theta` must point to `theta_len` readable doubles (may be null when
 * `theta_len` is 0).
 */
JqcStatus jqc_run_circuit(const JqcCircuit *circuit,
                          const double *theta,
                          uintptr_t theta_len,
                          JqcState **out);

/**
 * # Safety
 * `state` must be a live handle from this library.
 */
void jqc_state_free(JqcState *state);

JqcStatus jqc_state_num_qubits(const JqcState *state, uintptr_t *out);

/**
 * Copy the amplitudes into `buffer` as interleaved re, im pairs;
 * `buffer_len` must be exactly `2 * 2^num_qubits`.
 *
 * # Safety
 * `buffer` must point to `buffer_len` writable doubles.
 */
JqcStatus jqc_state_amplitudes(const JqcState *state, double *buffer, uintptr_t buffer_len);

/**
 * Chain-symmetric coefficients: `lambda_len` must equal `sites - 1`
 * (one coefficient per pair distance).
 *
 * # Safety
 * `lambda` must point to `lambda_len` readable doubles.
 */
JqcStatus jqc_jastrow_chain(uintptr_t sites,
                            const double *lambda,
                            uintptr_t lambda_len,
                            JqcJastrow **out);

/**
 * Ladder-symmetric coefficients over 2*`sites` qubits: `lambda_len` must
 * equal `3 * sites - 2`.
 *
 * # Safety
 * `lambda` must point to `lambda_len` readable doubles.
 */
JqcStatus jqc_jastrow_ladder(uintptr_t sites,
                             const double *lambda,
                             uintptr_t lambda_len,
                             JqcJastrow **out);

/**
 * # Safety
 * `jastrow` must be a live handle from this library.
 */
void jqc_jastrow_free(JqcJastrow *jastrow);

JqcStatus jqc_jastrow_num_classes(const JqcJastrow *jastrow, uintptr_t *out);

/**
 * Classical log-weight of a bit string (given as an integer index).
 */
JqcStatus jqc_jastrow_log_weight(const JqcJastrow *jastrow, uint64_t bits, double *out);

/**
 * Apply the exact projector to a state, returning a new normalized state.
 */
JqcStatus jqc_apply_jastrow(const JqcState *state, const JqcJastrow *jastrow, JqcState **out);

/**
 * `<psi|H|psi>` for a Hermitian operator.
 */
JqcStatus jqc_expectation(const JqcOperator *op, const JqcState *state, double *out);

/**
 * Energy of the truncated-projector state via operator ratios,
 * `<P'HP'> / <P'P'>` with `P' = (I + J)^order`.
 */
JqcStatus jqc_transformed_energy(const JqcState *state,
                                 const JqcOperator *op,
                                 const JqcJastrow *jastrow,
                                 uintptr_t order,
                                 double *out);

/**
 * Sampled projected-state energy over the entangled-copy pipeline:
 * `shots` per basis, `m_rep` repetitions, deterministic in `seed`.
 * Writes the mean and standard error.
 *
 * # Safety
 * `theta` must point to `theta_len` readable doubles (null allowed when
 * `theta_len` is 0).
 */
JqcStatus jqc_sampled_energy(const JqcModel *model,
                             const JqcCircuit *circuit,
                             const double *theta,
                             uintptr_t theta_len,
                             const JqcJastrow *jastrow,
                             uint64_t shots,
                             uintptr_t m_rep,
                             uint64_t seed,
                             bool literal_weight,
                             double *out_mean,
                             double *out_stderr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JQC_H */
