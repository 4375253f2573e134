#ifndef TRIQSVM_H
#define TRIQSVM_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TriqsvmDataMap {
  TRIQSVM_DATA_MAP_ZZ_OFFSET = 0,
  TRIQSVM_DATA_MAP_ZZ_SCALED = 1,
} TriqsvmDataMap;

typedef enum TriqsvmStatus {
  TRIQSVM_STATUS_OK = 0,
  TRIQSVM_STATUS_NULL_POINTER = 1,
  TRIQSVM_STATUS_INVALID_ARGUMENT = 2,
  TRIQSVM_STATUS_IO = 3,
  TRIQSVM_STATUS_PARSE = 4,
  TRIQSVM_STATUS_NUMERICAL = 5,
  TRIQSVM_STATUS_TOO_LARGE = 6,
  TRIQSVM_STATUS_PANIC = 7,
} TriqsvmStatus;

/**
 * Parametrised feature map for kernel evaluation.
 */
typedef struct TriqsvmFeatureMap TriqsvmFeatureMap;

/**
 * Trained classifier loaded from model JSON.
 */
typedef struct TriqsvmModel TriqsvmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *triqsvm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *triqsvm_version(void);

/**
 * Loads a model file written by `triqsvm train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and the out-pointer valid for writes.
 */
enum TriqsvmStatus triqsvm_model_load(const char *path, struct TriqsvmModel **out_model);

/**
 * Parses model JSON held in memory.
 *
 * # Safety
 * `json` must be a NUL-terminated string and the out-pointer valid for writes.
 */
enum TriqsvmStatus triqsvm_model_from_json(const char *json, struct TriqsvmModel **out_model);

/**
 * # Safety
 * `model` must be NULL or a handle from this library that has not been freed.
 */
void triqsvm_model_free(struct TriqsvmModel *model);

/**
 * # Safety
 * `model` must be a live handle and the out-pointer valid for writes.
 */
enum TriqsvmStatus triqsvm_model_n_features(const struct TriqsvmModel *model, size_t *out_n);

/**
 * Decision value at `x`, given in the units of the training data.
 *
 * # Safety
 * `model` must be a live handle, `x` must point to `len` doubles and the out-pointer be valid for writes.
 */
enum TriqsvmStatus triqsvm_model_decision_value(const struct TriqsvmModel *model,
                                                const double *x,
                                                size_t len,
                                                double *out_value);

/**
 * Predicted label at `x`: `1` or `-1`, with a zero decision value mapped to `1`.
 *
 * # Safety
 * Same contract as [`triqsvm_model_decision_value`].
 */
enum TriqsvmStatus triqsvm_model_classify(const struct TriqsvmModel *model,
                                          const double *x,
                                          size_t len,
                                          int8_t *out_label);

/**
 * Creates a feature map on `n_qubits` qubits with parameters `theta` (`n_qubits` values in [−2π, 2π]).
 *
 * # Safety
 * `theta` must point to `theta_len` doubles and the out-pointer be valid for writes.
 */
enum TriqsvmStatus triqsvm_feature_map_new(size_t n_qubits,
                                           const double *theta,
                                           size_t theta_len,
                                           enum TriqsvmDataMap data_map,
                                           struct TriqsvmFeatureMap **out_map);

/**
 * # Safety
 * `map` must be NULL or a handle from this library that has not been freed.
 */
void triqsvm_feature_map_free(struct TriqsvmFeatureMap *map);

/**
 * Fidelity kernel `|⟨Φ(x)|Φ(z)⟩|²` for two points of length `len`.
 *
 * # Safety
 * `map` must be a live handle, `x` and `z` must point to `len` doubles and the out-pointer be valid for writes.
 */
enum TriqsvmStatus triqsvm_kernel_entry(const struct TriqsvmFeatureMap *map,
                                        const double *x,
                                        const double *z,
                                        size_t len,
                                        double *out_value);

/**
 * Simulated annealing on the `n × n` row-major QUBO `q`.
 *
 * # Safety
 * `q` must point to `n * n` doubles, `out_alpha` to `n` writable bytes and `out_energy` be valid for writes.
 */
enum TriqsvmStatus triqsvm_anneal(const double *q,
                                  size_t n,
                                  size_t num_reads,
                                  size_t sweeps,
                                  double beta_start,
                                  double beta_end,
                                  uint64_t seed,
                                  uint8_t *out_alpha,
                                  double *out_energy);

/**
 * Exhaustive minimum of the `n × n` row-major QUBO `q`, for `n ≤ 20`.
 *
 * # Safety
 * Same contract as [`triqsvm_anneal`].
 */
enum TriqsvmStatus triqsvm_brute_force(const double *q,
                                       size_t n,
                                       uint8_t *out_alpha,
                                       double *out_energy);

/**
 * Energy `αᵀ Q α` of a binary assignment.
 *
 * # Safety
 * `q` must point to `n * n` doubles, `alpha` to `n` bytes and `out_energy` be valid for writes.
 */
enum TriqsvmStatus triqsvm_qubo_energy(const double *q,
                                       size_t n,
                                       const uint8_t *alpha,
                                       double *out_energy);

/**
 * Offset `β` of the classifier for weights `alpha` over the Gram matrix `gram` (`n × n`, row-major)
 * and labels `labels` (each `1` or `-1`).
 *
 * # Safety
 * `alpha` and `labels` must point to `n` elements, `gram` to `n * n` doubles and `out_beta` be valid for writes.
 */
enum TriqsvmStatus triqsvm_compute_beta(const uint8_t *alpha,
                                        const int8_t *labels,
                                        const double *gram,
                                        size_t n,
                                        double *out_beta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRIQSVM_H */
