#ifndef PBCORESET_H
#define PBCORESET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PbcStatus {
  PBC_STATUS_OK = 0,
  PBC_STATUS_NULL_POINTER = 1,
  PBC_STATUS_CONFIG = 2,
  PBC_STATUS_DATA = 3,
  PBC_STATUS_INPUT = 4,
  PBC_STATUS_RUNTIME = 5,
  PBC_STATUS_BUFFER_TOO_SMALL = 6,
  PBC_STATUS_PANIC = 7,
} PbcStatus;

typedef enum PbcLearner {
  PBC_LEARNER_LOGISTIC = 0,
  PBC_LEARNER_MLP = 1,
  PBC_LEARNER_RIDGE = 2,
} PbcLearner;

typedef struct PbcDataset PbcDataset;

typedef struct PbcSelection PbcSelection;

// Plain-value selection settings; start from
// [`pbc_selection_config_default`].
typedef struct PbcSelectionConfig {
  size_t budget;
  size_t outer_iters;
  double outer_step;
  // Outer mini-batch size; 0 uses every outer example.
  size_t outer_batch;
  uint64_t seed;
  enum PbcLearner learner;
  size_t inner_epochs;
  double inner_step;
  double momentum;
  double l2;
  size_t hidden_width;
  size_t hidden_layers;
  bool adaptive;
  bool cosine;
  bool control_variate;
  // Extract by sampling one mask instead of taking the top K.
  bool sample_extraction;
} PbcSelectionConfig;

// Message of the last failing call on this thread, or null. The pointer is
// valid until the next failing call on this thread.
const char *pbc_last_error(void);

// Projects `z[0..n]` onto `{s : 0 <= s <= 1, sum s <= budget}`, writing
// `n` values to `out`.
//
// # Safety
// `z` and `out` must point to `n` readable and writable doubles.
enum PbcStatus pbc_project(const double *z, size_t n, size_t budget, double *out);

// Builds a dataset from row-major `features` (`n x dim`) and `labels` in
// `[0, num_classes)`.
//
// # Safety
// `features` must hold `n * dim` doubles and `labels` `n` values; `out`
// must be writable.
enum PbcStatus pbc_dataset_new(const double *features,
                               const uint32_t *labels,
                               size_t n,
                               size_t dim,
                               size_t num_classes,
                               struct PbcDataset **out);

// Number of examples, or 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
size_t pbc_dataset_len(const struct PbcDataset *dataset);

// # Safety
// `dataset` must be null or a handle not yet freed.
void pbc_dataset_free(struct PbcDataset *dataset);

struct PbcSelectionConfig pbc_selection_config_default(void);

// Selects a coreset of `train`, measuring the outer loss on `outer` (or on
// `train` itself when `outer` is null).
//
// # Safety
// `train` must be a live handle, `outer` null or a live handle, `config`
// readable and `out` writable.
enum PbcStatus pbc_run_selection(const struct PbcDataset *train,
                                 const struct PbcDataset *outer,
                                 const struct PbcSelectionConfig *config,
                                 struct PbcSelection **out);

// Coreset size, or 0 for a null handle.
//
// # Safety
// `selection` must be null or a live handle.
size_t pbc_selection_coreset_len(const struct PbcSelection *selection);

// Copies the sorted coreset indices into `out`.
//
// # Safety
// `selection` must be a live handle and `out` writable for `capacity`
// values.
enum PbcStatus pbc_selection_coreset(const struct PbcSelection *selection,
                                     size_t *out,
                                     size_t capacity);

// Length of the probability vector (the training set size).
//
// # Safety
// `selection` must be null or a live handle.
size_t pbc_selection_len(const struct PbcSelection *selection);

// Copies the final inclusion probabilities into `out`.
//
// # Safety
// `selection` must be a live handle and `out` writable for `capacity`
// values.
enum PbcStatus pbc_selection_probabilities(const struct PbcSelection *selection,
                                           double *out,
                                           size_t capacity);

// Number of completed outer iterations.
//
// # Safety
// `selection` must be null or a live handle.
size_t pbc_selection_iterations(const struct PbcSelection *selection);

// Copies the per-iteration outer losses into `out`.
//
// # Safety
// `selection` must be a live handle and `out` writable for `capacity`
// values.
enum PbcStatus pbc_selection_outer_losses(const struct PbcSelection *selection,
                                          double *out,
                                          size_t capacity);

// # Safety
// `selection` must be null or a handle not yet freed.
void pbc_selection_free(struct PbcSelection *selection);

#endif  /* PBCORESET_H */
