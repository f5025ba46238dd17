#ifndef REPOCOMPLETE_H
#define REPOCOMPLETE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum RcStatus {
  RC_OK = 0,
  RC_NULL_POINTER = 1,
  RC_INVALID_ARGUMENT = 2,
  RC_IO = 3,
  RC_PARSE = 4,
  RC_INTEGRITY = 5,
  RC_TOKENIZER_MISMATCH = 6,
  RC_FORMAT_VERSION = 7,
  RC_BUFFER_TOO_SMALL = 8,
  RC_MODEL = 9,
  RC_PANIC = 10,
} RcStatus;

/**
 * A chunk retrieval database.
 */
typedef struct RcDatabase RcDatabase;

/**
 * A loaded BPE vocabulary.
 */
typedef struct RcTokenizer RcTokenizer;

/**
 * One retrieval hit.
 */
typedef struct RcHit {
  /**
   * Position of the record in the database.
   */
  uintptr_t record_index;
  uint32_t chunk_index;
  /**
   * 1-based.
   */
  uintptr_t rank;
  double score;
} RcHit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `cap`. Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be null when `cap` is 0.
 */
uintptr_t rc_last_error_message(char *buf, uintptr_t cap);

/**
 * Static, NUL-terminated library version.
 */
const char *rc_version(void);

/**
 * Loads `vocab.json` and `merges.txt` from a directory (or a vocab file
 * with its sibling merges file).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RcStatus rc_tokenizer_load(const char *path, struct RcTokenizer **out);

/**
 * The 256-token byte-level tokenizer (no merges).
 *
 * # Safety
 * `out` must be writable.
 */
enum RcStatus rc_tokenizer_byte_level(struct RcTokenizer **out);

/**
 * # Safety
 * `tok` must come from a tokenizer constructor and not be used afterwards.
 */
void rc_tokenizer_free(struct RcTokenizer *tok);

/**
 * Vocabulary size, or 0 for a null handle.
 *
 * # Safety
 * `tok` must be a live handle or null.
 */
uintptr_t rc_tokenizer_vocab_size(const struct RcTokenizer *tok);

/**
 * # Safety
 * `tok` live; `text` has `len` readable bytes; `out_ids` has `cap` slots.
 */
enum RcStatus rc_tokenizer_encode(const struct RcTokenizer *tok,
                                  const uint8_t *text,
                                  uintptr_t len,
                                  uint32_t *out_ids,
                                  uintptr_t cap,
                                  uintptr_t *out_len);

/**
 * # Safety
 * `tok` live; `ids` has `n` entries; `out` has `cap` writable bytes.
 */
enum RcStatus rc_tokenizer_decode(const struct RcTokenizer *tok,
                                  const uint32_t *ids,
                                  uintptr_t n,
                                  uint8_t *out,
                                  uintptr_t cap,
                                  uintptr_t *out_len);

/**
 * Token healing: the input splits into `text[..trimmed_len]` and the
 * pending suffix `text[trimmed_len..]`.
 *
 * # Safety
 * `tok` live; `text` has `len` readable bytes; outputs writable.
 */
enum RcStatus rc_tokenizer_heal(const struct RcTokenizer *tok,
                                const uint8_t *text,
                                uintptr_t len,
                                uintptr_t *out_trimmed_len,
                                uintptr_t *out_rolled_back);

/**
 * Indexes every `.py` file under `root` in chunks of `chunk_size` tokens.
 *
 * # Safety
 * `root` NUL-terminated; `tok` live; `out` writable.
 */
enum RcStatus rc_database_build(const char *root,
                                const struct RcTokenizer *tok,
                                uintptr_t chunk_size,
                                struct RcDatabase **out);

/**
 * # Safety
 * `path` NUL-terminated; `out` writable.
 */
enum RcStatus rc_database_load(const char *path, struct RcDatabase **out);

/**
 * # Safety
 * `db` live; `path` NUL-terminated.
 */
enum RcStatus rc_database_save(const struct RcDatabase *db, const char *path);

/**
 * # Safety
 * `db` must come from a database constructor and not be used afterwards.
 */
void rc_database_free(struct RcDatabase *db);

/**
 * Record count, or 0 for a null handle.
 *
 * # Safety
 * `db` must be a live handle or null.
 */
uintptr_t rc_database_len(const struct RcDatabase *db);

/**
 * Fails with `RC_TOKENIZER_MISMATCH` unless `db` was built with `tok`.
 *
 * # Safety
 * Both handles live.
 */
enum RcStatus rc_database_check_tokenizer(const struct RcDatabase *db,
                                          const struct RcTokenizer *tok);

/**
 * Top-`k` records by Jaccard similarity. `exclude_file` may be null.
 * `out_len` receives the hit count (at most `k`).
 *
 * # Safety
 * `db` live; `query` has `n` entries; `out_hits` has `cap` slots.
 */
enum RcStatus rc_database_retrieve_jaccard(const struct RcDatabase *db,
                                           const uint32_t *query,
                                           uintptr_t n,
                                           uintptr_t k,
                                           const char *exclude_file,
                                           struct RcHit *out_hits,
                                           uintptr_t cap,
                                           uintptr_t *out_len);

/**
 * File path of a record, without a terminating NUL.
 *
 * # Safety
 * `db` live; `out` has `cap` writable bytes.
 */
enum RcStatus rc_database_record_path(const struct RcDatabase *db,
                                      uintptr_t record_index,
                                      uint8_t *out,
                                      uintptr_t cap,
                                      uintptr_t *out_len);

/**
 * Key and continuation tokens of a record, concatenated; the key length
 * goes to `out_key_len`.
 *
 * # Safety
 * `db` live; `out` has `cap` slots; outputs writable.
 */
enum RcStatus rc_database_record_tokens(const struct RcDatabase *db,
                                        uintptr_t record_index,
                                        uint32_t *out,
                                        uintptr_t cap,
                                        uintptr_t *out_len,
                                        uintptr_t *out_key_len);

/**
 * Edit similarity of two UTF-8 strings, as given (no trimming).
 *
 * # Safety
 * Both arguments NUL-terminated.
 */
enum RcStatus rc_edit_similarity(const char *s, const char *t, double *out);

/**
 * Exact match (1 or 0) and common-prefix length in characters after
 * trimming both strings.
 *
 * # Safety
 * Both strings NUL-terminated; outputs writable.
 */
enum RcStatus rc_match_scores(const char *predicted,
                              const char *target,
                              double *out_exact,
                              uintptr_t *out_prefix_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REPOCOMPLETE_H */
