#ifndef JOINTVEC_H
#define JOINTVEC_H

/* Generated by cbindgen from src/lib.rs. */

#include <stddef.h>

typedef enum JvStatus {
  JV_STATUS_OK = 0,
  JV_STATUS_NULL_ARGUMENT = 1,
  JV_STATUS_INVALID_UTF8 = 2,
  JV_STATUS_IO = 3,
  JV_STATUS_PARSE = 4,
  JV_STATUS_NOT_FOUND = 5,
  JV_STATUS_DIMENSION_MISMATCH = 6,
  JV_STATUS_ZERO_VECTOR = 7,
  JV_STATUS_BUFFER_TOO_SMALL = 8,
  /**
   * The value is not defined for these inputs, e.g. a word without synsets.
   */
  JV_STATUS_UNDEFINED = 9,
  JV_STATUS_PANIC = 10,
  JV_STATUS_OTHER = 11,
} JvStatus;

/**
 * Vectors loaded from a text vector file.
 */
typedef struct JvVectors JvVectors;

/**
 * A WordNet graph with its word-to-synset map.
 */
typedef struct JvWordNet JvWordNet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * successful one. Valid until the next call on the same thread.
 */
const char *jv_last_error(void);

/**
 * Loads a vector file (`count dim` header, then `word v1 .. vdim` lines).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum JvStatus jv_vectors_load(const char *path, struct JvVectors **out);

/**
 * # Safety
 * `handle` must come from [`jv_vectors_load`] and not be used afterwards.
 * Null is ignored.
 */
void jv_vectors_free(struct JvVectors *handle);

/**
 * # Safety
 * `handle` must be a live handle and `out` a valid pointer.
 */
enum JvStatus jv_vectors_dim(const struct JvVectors *handle, size_t *out);

/**
 * Number of words, including the rare-word entry.
 *
 * # Safety
 * `handle` must be a live handle and `out` a valid pointer.
 */
enum JvStatus jv_vectors_len(const struct JvVectors *handle, size_t *out);

/**
 * Copies the vector for `word` into `buf`, which must hold at least `dim`
 * values.
 *
 * # Safety
 * `buf` must point to `buf_len` writable doubles.
 */
enum JvStatus jv_vectors_lookup(const struct JvVectors *handle,
                                const char *word,
                                double *buf,
                                size_t buf_len);

/**
 * Cosine similarity between the vectors of two words.
 *
 * # Safety
 * Strings must be NUL-terminated and `out` a valid pointer.
 */
enum JvStatus jv_vectors_cosine(const struct JvVectors *handle,
                                const char *a,
                                const char *b,
                                double *out);

/**
 * Loads hypernym edges (`child<TAB>parent`) and synset membership
 * (`synset<TAB>word`). `max_vocab` caps the word list; 0 keeps every word.
 *
 * # Safety
 * Paths must be NUL-terminated and `out` a valid pointer.
 */
enum JvStatus jv_wordnet_load(const char *hypernyms,
                              const char *members,
                              size_t max_vocab,
                              struct JvWordNet **out);

/**
 * # Safety
 * `handle` must come from [`jv_wordnet_load`] and not be used afterwards.
 * Null is ignored.
 */
void jv_wordnet_free(struct JvWordNet *handle);

/**
 * Graph similarity of two words: the best synset similarity over their
 * synsets. `Undefined` when a word has no synset.
 *
 * # Safety
 * Strings must be NUL-terminated and `out` a valid pointer.
 */
enum JvStatus jv_wordnet_similarity(const struct JvWordNet *handle,
                                    const char *a,
                                    const char *b,
                                    double *out);

/**
 * Spearman rank correlation of two arrays of length `n`, ties given their
 * average rank. `Undefined` for n < 2 or a constant input.
 *
 * # Safety
 * `x` and `y` must point to `n` readable doubles.
 */
enum JvStatus jv_spearman(const double *x, const double *y, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JOINTVEC_H */
