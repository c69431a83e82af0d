#ifndef JLOLAB_H
#define JLOLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum JlolabStatus {
  JLOLAB_STATUS_OK = 0,
  JLOLAB_STATUS_NULL_POINTER = 1,
  JLOLAB_STATUS_INVALID_UTF8 = 2,
  JLOLAB_STATUS_PARSE = 3,
  JLOLAB_STATUS_INVALID_INPUT = 4,
  JLOLAB_STATUS_DIMENSION_MISMATCH = 5,
  JLOLAB_STATUS_NOT_CONVERGED = 6,
  JLOLAB_STATUS_NON_INTEGER_INDEX = 7,
  JLOLAB_STATUS_SPECTRAL_GAP = 8,
  JLOLAB_STATUS_DEGREE_TOO_LARGE = 9,
  JLOLAB_STATUS_PANIC = 10,
} JlolabStatus;

/**
 * Opaque finite chain.
 */
typedef struct JlolabChain JlolabChain;

/**
 * Opaque idempotent over an ampliated algebra.
 */
typedef struct JlolabIdempotent JlolabIdempotent;

/**
 * Opaque finite-dimensional spectral triple.
 */
typedef struct JlolabTriple JlolabTriple;

/**
 * A complex number as two doubles.
 */
typedef struct JlolabComplex {
  double re;
  double im;
} JlolabComplex;

/**
 * Result of [`jlolab_index_pairing`].
 */
typedef struct JlolabPairing {
  struct JlolabComplex value;
  /**
   * Fredholm index of the compressed operator.
   */
  int64_t fredholm_index;
  /**
   * Highest degree kept in the series.
   */
  size_t truncation_degree;
  /**
   * 1 if the pairing lies within 0.01 of `fredholm_index`.
   */
  int32_t agrees;
} JlolabPairing;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * call into this library on the same thread.
 */
const char *jlolab_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *jlolab_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` is null or was returned by a `*_to_json` call and not yet freed.
 */
void jlolab_string_free(char *s);

/**
 * Parses and validates a triple `{"dim_even", "dim_odd", "D", "generators"}`.
 *
 * # Safety
 * `json` is a nul-terminated string; `out` is valid for writes.
 */
enum JlolabStatus jlolab_triple_from_json(const char *json, struct JlolabTriple **out);

/**
 * Serializes a triple; release the string with [`jlolab_string_free`].
 *
 * # Safety
 * `triple` is a live handle; `out` is valid for writes.
 */
enum JlolabStatus jlolab_triple_to_json(const struct JlolabTriple *triple, char **out);

/**
 * # Safety
 * `triple` is null or a live handle, not used afterwards.
 */
void jlolab_triple_free(struct JlolabTriple *triple);

/**
 * Even and odd dimensions of the Hilbert space.
 *
 * # Safety
 * `triple` is a live handle; the outputs are valid for writes.
 */
enum JlolabStatus jlolab_triple_dims(const struct JlolabTriple *triple,
                                     size_t *dim_even,
                                     size_t *dim_odd);

/**
 * The graded product `a × b` as a new handle.
 *
 * # Safety
 * `a` and `b` are live handles; `out` is valid for writes.
 */
enum JlolabStatus jlolab_triple_product(const struct JlolabTriple *a,
                                        const struct JlolabTriple *b,
                                        struct JlolabTriple **out);

/**
 * Fredholm index `dim ker D⁺ − dim ker D⁻`.
 *
 * # Safety
 * `triple` is a live handle; `out` is valid for writes.
 */
enum JlolabStatus jlolab_triple_index(const struct JlolabTriple *triple, int64_t *out);

/**
 * Parses a chain `{"algebra_dim", "terms": [{"coeff", "factors"}]}`.
 *
 * # Safety
 * `json` is a nul-terminated string; `out` is valid for writes.
 */
enum JlolabStatus jlolab_chain_from_json(const char *json, struct JlolabChain **out);

/**
 * # Safety
 * `chain` is null or a live handle, not used afterwards.
 */
void jlolab_chain_free(struct JlolabChain *chain);

/**
 * Parses an idempotent `{"k", "e"}`.
 *
 * # Safety
 * `json` is a nul-terminated string; `out` is valid for writes.
 */
enum JlolabStatus jlolab_idempotent_from_json(const char *json, struct JlolabIdempotent **out);

/**
 * # Safety
 * `e` is null or a live handle, not used afterwards.
 */
void jlolab_idempotent_free(struct JlolabIdempotent *e);

/**
 * Exact JLO cochain `Ch_D(α)`.
 *
 * # Safety
 * `triple` and `chain` are live handles; `out` is valid for writes.
 */
enum JlolabStatus jlolab_jlo_cochain(const struct JlolabTriple *triple,
                                     const struct JlolabChain *chain,
                                     struct JlolabComplex *out);

/**
 * `BCh_D(α)`, the cochain with `a⁰` replaced by `[D, a⁰]`.
 *
 * # Safety
 * `triple` and `chain` are live handles; `out` is valid for writes.
 */
enum JlolabStatus jlolab_bch_cochain(const struct JlolabTriple *triple,
                                     const struct JlolabChain *chain,
                                     struct JlolabComplex *out);

/**
 * `Ch^pert_D(α) = Ch_D(α) + BCh_D(α)/√2`.
 *
 * # Safety
 * `triple` and `chain` are live handles; `out` is valid for writes.
 */
enum JlolabStatus jlolab_perturbed_cochain(const struct JlolabTriple *triple,
                                           const struct JlolabChain *chain,
                                           struct JlolabComplex *out);

/**
 * Pairing of the cochain with the Chern character of `e`, and the Fredholm
 * index of `e` compressed onto the triple.
 *
 * # Safety
 * `triple` and `e` are live handles; `out` is valid for writes.
 */
enum JlolabStatus jlolab_index_pairing(const struct JlolabTriple *triple,
                                       const struct JlolabIdempotent *e,
                                       struct JlolabPairing *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JLOLAB_H */
