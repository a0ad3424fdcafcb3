#ifndef LOSCHMIDT_H
#define LOSCHMIDT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_POINTER = 1,
  LS_STATUS_INVALID_ARGUMENT = 2,
  LS_STATUS_NON_UNITARY = 3,
  LS_STATUS_DIMENSION_MISMATCH = 4,
  LS_STATUS_DECOMPOSITION_FAILED = 5,
  LS_STATUS_INDEX_OUT_OF_RANGE = 6,
  LS_STATUS_INVALID_PERTURBATION = 7,
  LS_STATUS_PARSE_ERROR = 8,
  LS_STATUS_SEMANTIC_ERROR = 9,
  LS_STATUS_OUTPUT_EXISTS = 10,
  LS_STATUS_IO_ERROR = 11,
  LS_STATUS_FAILED = 12,
  LS_STATUS_PANIC = 13,
} LsStatus;

// Generator of the collective z-rotation perturbation.
typedef enum LsPerturbation {
  // Half the summed Pauli-z over log2(N) qubits; N must be a power of two.
  LS_PERTURBATION_QUBIT = 0,
  // Jz of the spin with 2j + 1 = N.
  LS_PERTURBATION_SPIN = 1,
} LsPerturbation;

// Eigenphases and eigenvectors of a unitary map.
typedef struct LsDecomposition LsDecomposition;

// Overlaps between unperturbed and perturbed eigenvectors.
typedef struct LsOverlap LsOverlap;

// A certified unitary map.
typedef struct LsUnitary LsUnitary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread; empty after a
// successful call. Valid until the next call on the same thread.
const char *ls_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ls_version(void);

// Certifies a row-major complex matrix as unitary.
//
// # Safety
// `re` and `im` must each point to `dim * dim` doubles.
enum LsStatus ls_unitary_from_row_major(uintptr_t dim,
                                        const double *re,
                                        const double *im,
                                        struct LsUnitary **out);

// Haar-random unitary of dimension `dim` drawn from `seed`.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum LsStatus ls_unitary_sample_cue(uintptr_t dim, uint64_t seed, struct LsUnitary **out);

// Orthogonal-ensemble map `U U^T` built from a map made by
// `ls_unitary_sample_cue`.
//
// # Safety
// `cue` must be a live handle and `out` a valid pointer to a handle slot.
enum LsStatus ls_unitary_make_coe(const struct LsUnitary *cue, struct LsUnitary **out);

// Kicked top with spin `twice_j / 2` and kick strength `k`. With
// `odd_subspace` set, the map restricted to the odd eigenspace of the y
// rotation by pi (needs `twice_j` divisible by 4).
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum LsStatus ls_unitary_kicked_top(uint32_t twice_j,
                                    double k,
                                    bool odd_subspace,
                                    struct LsUnitary **out);

// `exp(-i delta V) U` for the chosen generator `V`.
//
// # Safety
// `u` must be a live handle and `out` a valid pointer to a handle slot.
enum LsStatus ls_unitary_perturb(const struct LsUnitary *u,
                                 enum LsPerturbation form,
                                 double delta,
                                 struct LsUnitary **out);

// Writes the dimension of `u` to `dim`.
//
// # Safety
// `u` must be a live handle and `dim` a valid pointer.
enum LsStatus ls_unitary_dim(const struct LsUnitary *u, uintptr_t *dim);

// Copies the row-major entries of `u` into `re` and `im`, each of length
// at least `dim * dim`.
//
// # Safety
// `u` must be a live handle; `re` and `im` must hold `len` doubles.
enum LsStatus ls_unitary_entries(const struct LsUnitary *u, double *re, double *im, uintptr_t len);

// Releases a unitary handle. Null is ignored.
//
// # Safety
// `u` must be null or a handle not yet freed.
void ls_unitary_free(struct LsUnitary *u);

// Eigendecomposition with phases sorted ascending in (-pi, pi].
//
// # Safety
// `u` must be a live handle and `out` a valid pointer to a handle slot.
enum LsStatus ls_decompose(const struct LsUnitary *u, struct LsDecomposition **out);

// Copies the eigenphases into `phases`.
//
// # Safety
// `d` must be a live handle; `phases` must hold `len` doubles.
enum LsStatus ls_decomposition_phases(const struct LsDecomposition *d,
                                      double *phases,
                                      uintptr_t len);

// Releases a decomposition handle. Null is ignored.
//
// # Safety
// `d` must be null or a handle not yet freed.
void ls_decomposition_free(struct LsDecomposition *d);

// Overlaps `<v'_l|v_m>` between two decompositions of equal dimension.
//
// # Safety
// Both decompositions must be live handles and `out` a valid pointer.
enum LsStatus ls_overlap_new(const struct LsDecomposition *unperturbed,
                             const struct LsDecomposition *perturbed,
                             struct LsOverlap **out);

// Releases an overlap handle. Null is ignored.
//
// # Safety
// `o` must be null or a handle not yet freed.
void ls_overlap_free(struct LsOverlap *o);

// Fidelity of unperturbed eigenstate `m` for `n = 0..=n_max`, written to
// `values` (length at least `n_max + 1`).
//
// # Safety
// `o` must be a live handle; `values` must hold `len` doubles.
enum LsStatus ls_fidelity_spectral(const struct LsOverlap *o,
                                   uintptr_t m,
                                   uintptr_t n_max,
                                   double *values,
                                   uintptr_t len);

// Fidelity of the normalized state `(psi_re, psi_im)` by repeated
// application of `u` and `perturbed`.
//
// # Safety
// Handles must be live; `psi_re` and `psi_im` must hold the map dimension
// in doubles; `values` must hold `len` doubles.
enum LsStatus ls_fidelity_direct(const struct LsUnitary *u,
                                 const struct LsUnitary *perturbed,
                                 const double *psi_re,
                                 const double *psi_im,
                                 uintptr_t n_max,
                                 double *values,
                                 uintptr_t len);

// Long-time fidelity level of eigenstate `m` from its overlap weights.
//
// # Safety
// `o` must be a live handle and `value` a valid pointer.
enum LsStatus ls_saturation_ipr(const struct LsOverlap *o, uintptr_t m, double *value);

// Mean fidelity of eigenstate `m` over `count` steps from `start`, with
// its standard error.
//
// # Safety
// `o` must be a live handle; `value` and `stderr` valid pointers.
enum LsStatus ls_saturation_time_average(const struct LsOverlap *o,
                                         uintptr_t m,
                                         uintptr_t start,
                                         uintptr_t count,
                                         double *value,
                                         double *stderr);

// Runs the experiment described by `config` (config file text). A
// non-null `output_dir` overrides the configured directory and a
// non-zero `workers` the worker count. The number of result rows is
// written to `rows` when it is non-null.
//
// # Safety
// `config` must be a NUL-terminated string; `output_dir` null or one.
enum LsStatus ls_run_experiment(const char *config,
                                const char *output_dir,
                                bool resume,
                                uintptr_t workers,
                                uintptr_t *rows);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOSCHMIDT_H */
