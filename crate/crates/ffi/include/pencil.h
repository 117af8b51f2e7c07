#ifndef PENCIL_H
#define PENCIL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PENCIL_KL_FORWARD 0

#define PENCIL_KL_INVERSE 1

#define PENCIL_BINARY_INVERSE 2

typedef enum PencilStatus {
  PENCIL_STATUS_OK = 0,
  PENCIL_STATUS_NULL_POINTER = 1,
  PENCIL_STATUS_INVALID_INPUT = 2,
  PENCIL_STATUS_FORMAT = 3,
  PENCIL_STATUS_IO = 4,
  PENCIL_STATUS_DIVERGENCE = 5,
  PENCIL_STATUS_VERIFICATION = 6,
  PENCIL_STATUS_PANIC = 7,
} PencilStatus;

/**
 * Per-example label distributions.
 */
typedef struct PencilLabelBank PencilLabelBank;

/**
 * A trained network loaded from a model checkpoint.
 */
typedef struct PencilModel PencilModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *pencil_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pencil_version(void);

/**
 * Numerically stable softmax of `c` logits into `out`.
 */
enum PencilStatus pencil_softmax(const double *z, size_t c, double *out);

/**
 * Gradient of `(1/c) L_c + alpha L_o` with respect to one example's label
 * logits, given network probabilities `f` and label distribution `yd`.
 */
enum PencilStatus pencil_grad_label_logits(const double *f,
                                           const double *yd,
                                           size_t c,
                                           uint32_t noisy_label,
                                           int32_t variant,
                                           double alpha,
                                           double *out);

/**
 * Gradient of `(1/c) L_c + (beta/c) L_e` with respect to one example's
 * network logits.
 */
enum PencilStatus pencil_grad_net_logits(const double *f,
                                         const double *yd,
                                         size_t c,
                                         int32_t variant,
                                         double beta,
                                         double *out);

/**
 * Symmetric label noise: each label is redrawn uniformly with probability `rate`.
 */
enum PencilStatus pencil_inject_symmetric(const uint32_t *truth,
                                          size_t n,
                                          size_t c,
                                          double rate,
                                          uint64_t seed,
                                          uint32_t *out);

/**
 * Circular label noise: each label moves to the next class with probability `rate`.
 */
enum PencilStatus pencil_inject_asym_circular(const uint32_t *truth,
                                              size_t n,
                                              size_t c,
                                              double rate,
                                              uint64_t seed,
                                              uint32_t *out);

/**
 * Creates a label bank with logits `k * onehot(label)` per example.
 */
enum PencilStatus pencil_label_bank_new(const uint32_t *labels,
                                        size_t n,
                                        size_t c,
                                        double k,
                                        struct PencilLabelBank **out);

/**
 * Loads a label bank checkpoint.
 */
enum PencilStatus pencil_label_bank_load(const char *path, struct PencilLabelBank **out);

enum PencilStatus pencil_label_bank_save(const struct PencilLabelBank *bank, const char *path);

/**
 * Releases a bank; null is ignored.
 */
void pencil_label_bank_free(struct PencilLabelBank *bank);

/**
 * Number of examples and classes.
 */
enum PencilStatus pencil_label_bank_shape(const struct PencilLabelBank *bank, size_t *n, size_t *c);

/**
 * Writes the label distribution of example `i` into `out` (length `c`).
 */
enum PencilStatus pencil_label_bank_distribution(const struct PencilLabelBank *bank,
                                                 size_t i,
                                                 double *out,
                                                 size_t c);

/**
 * Applies `logits[batch[k]] -= lambda * grads[k]`, with `grads` row-major
 * `b x c`.
 */
enum PencilStatus pencil_label_bank_apply_update(struct PencilLabelBank *bank,
                                                 const size_t *batch,
                                                 size_t b,
                                                 const double *grads,
                                                 double lambda);

/**
 * Argmax class of every example into `out` (length `n`).
 */
enum PencilStatus pencil_label_bank_hard_labels(const struct PencilLabelBank *bank,
                                                uint32_t *out,
                                                size_t n);

/**
 * Restores the logits initialized from the original noisy labels.
 */
enum PencilStatus pencil_label_bank_reset(struct PencilLabelBank *bank);

/**
 * Loads a model checkpoint.
 */
enum PencilStatus pencil_model_load(const char *path, struct PencilModel **out);

/**
 * Releases a model; null is ignored.
 */
void pencil_model_free(struct PencilModel *model);

/**
 * Input dimension and number of classes.
 */
enum PencilStatus pencil_model_shape(const struct PencilModel *model, size_t *dim, size_t *c);

/**
 * Class probabilities for `rows` inputs of width `dim` (row-major), written
 * to `out` as `rows x c`.
 */
enum PencilStatus pencil_model_predict(const struct PencilModel *model,
                                       const double *x,
                                       size_t rows,
                                       size_t dim,
                                       double *out);

/**
 * Runs the full pipeline like `pencil train` and writes the run directory.
 * `config_path` may be null for the defaults; `baseline` non-zero selects
 * cross-entropy-only training.
 */
enum PencilStatus pencil_train(const char *data_path,
                               const char *config_path,
                               const char *out_dir,
                               int32_t baseline);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PENCIL_H */
