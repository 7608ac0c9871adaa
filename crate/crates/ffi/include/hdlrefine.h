/* SPDX-License-Identifier: Apache-2.0 */

#ifndef HDLREFINE_H
#define HDLREFINE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HdlrStatus {
  HDLR_STATUS_OK = 0,
  HDLR_STATUS_NULL_POINTER = 1,
  HDLR_STATUS_INVALID_UTF8 = 2,
  HDLR_STATUS_INVALID_ARGUMENT = 3,
  HDLR_STATUS_NOT_FOUND = 4,
  HDLR_STATUS_CONFIG = 5,
  HDLR_STATUS_IO = 6,
  HDLR_STATUS_LLM = 7,
  HDLR_STATUS_TOOL = 8,
  HDLR_STATUS_INVARIANT = 9,
  HDLR_STATUS_PANIC = 10,
} HdlrStatus;

typedef enum HdlrArtifactKind {
  HDLR_ARTIFACT_KIND_RTL = 0,
  HDLR_ARTIFACT_KIND_TESTBENCH = 1,
} HdlrArtifactKind;

typedef enum HdlrLanguage {
  HDLR_LANGUAGE_VERILOG = 0,
  HDLR_LANGUAGE_VHDL = 1,
} HdlrLanguage;

/**
 * Revision history of one artifact, with error-count bookkeeping.
 */
typedef struct HdlrHistory HdlrHistory;

/**
 * Diagnostic parse rules for one tool.
 */
typedef struct HdlrRuleSet HdlrRuleSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread, or NULL. The
 * pointer stays valid until the next library call on the same thread.
 */
const char *hdlr_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library, freed once.
 */
void hdlr_string_free(char *s);

/**
 * Unbiased pass@k for `c` correct samples out of `n`.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum HdlrStatus hdlr_pass_at_k(uint64_t n, uint64_t c, uint64_t k, double *out);

/**
 * Relative improvement of `ours_pct` over `baseline_pct`, in percent.
 * `*out_applicable` is false when the baseline is zero.
 *
 * # Safety
 * Both out pointers must be valid.
 */
enum HdlrStatus hdlr_delta_f(double ours_pct,
                             double baseline_pct,
                             double *out_value,
                             bool *out_applicable);

/**
 * Loads a builtin rule set by tool name (e.g. "verilator", "ghdl").
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` a valid pointer.
 */
enum HdlrStatus hdlr_rule_set_builtin(const char *name, struct HdlrRuleSet **out);

/**
 * Loads a rule set from a TOML file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum HdlrStatus hdlr_rule_set_load(const char *path, struct HdlrRuleSet **out);

/**
 * # Safety
 * `rules` must be NULL or a handle from `hdlr_rule_set_*`, freed once.
 */
void hdlr_rule_set_free(struct HdlrRuleSet *rules);

/**
 * Parses compiler output into a JSON compile report.
 *
 * # Safety
 * `rules` must be a live handle; strings NUL-terminated; `out_json` valid.
 */
enum HdlrStatus hdlr_parse_compile_log(const struct HdlrRuleSet *rules,
                                       const char *stdout,
                                       const char *stderr,
                                       int32_t exit_code,
                                       char **out_json);

/**
 * Parses simulator output into a JSON simulation report.
 *
 * # Safety
 * `rules` must be a live handle; strings NUL-terminated; `out_json` valid.
 */
enum HdlrStatus hdlr_parse_sim_log(const struct HdlrRuleSet *rules,
                                   const char *stdout,
                                   const char *stderr,
                                   int32_t exit_code,
                                   bool timed_out,
                                   char **out_json);

/**
 * Creates an empty history. Never returns NULL.
 */
struct HdlrHistory *hdlr_history_new(enum HdlrArtifactKind kind, enum HdlrLanguage language);

/**
 * # Safety
 * `history` must be NULL or a handle from `hdlr_history_new`, freed once.
 */
void hdlr_history_free(struct HdlrHistory *history);

/**
 * Appends `text` as a new revision and writes its id.
 *
 * # Safety
 * `history` must be a live handle; `text` NUL-terminated; `out_revision` valid.
 */
enum HdlrStatus hdlr_history_append(struct HdlrHistory *history,
                                    const char *text,
                                    uint32_t *out_revision);

/**
 * Records the error count of a revision; `*out_is_best` tells whether it
 * became the best revision. `out_is_best` may be NULL.
 *
 * # Safety
 * `history` must be a live handle; `out_is_best` NULL or valid.
 */
enum HdlrStatus hdlr_history_record_error_count(struct HdlrHistory *history,
                                                uint32_t revision,
                                                size_t error_count,
                                                bool *out_is_best);

/**
 * Copies `revision` forward as a new revision and writes the new id.
 *
 * # Safety
 * `history` must be a live handle; `out_revision` valid.
 */
enum HdlrStatus hdlr_history_rollback_to(struct HdlrHistory *history,
                                         uint32_t revision,
                                         uint32_t *out_revision);

/**
 * Writes the id of the revision with the fewest recorded errors.
 * Returns `NOT_FOUND` when no error count has been recorded yet.
 *
 * # Safety
 * `history` must be a live handle; `out_revision` valid.
 */
enum HdlrStatus hdlr_history_best(const struct HdlrHistory *history, uint32_t *out_revision);

/**
 * Copies the text of `revision` into a new string.
 *
 * # Safety
 * `history` must be a live handle; `out_text` valid.
 */
enum HdlrStatus hdlr_history_text(const struct HdlrHistory *history,
                                  uint32_t revision,
                                  char **out_text);

/**
 * Pulls the HDL source out of an LLM reply.
 *
 * # Safety
 * `completion` must be NUL-terminated; `out_code` valid.
 */
enum HdlrStatus hdlr_extract_code_block(const char *completion,
                                        enum HdlrLanguage language,
                                        char **out_code);

/**
 * Runs the full pipeline for `prompt` with the settings in `config_path`
 * and writes the run result as JSON. `workdir` may be NULL to use a fresh
 * directory under the configured workdir root. A run that ends without
 * success (exhausted budget, tool or LLM failure) still returns `OK`; the
 * outcome is in the JSON `status` field.
 *
 * # Safety
 * Strings must be NUL-terminated (`workdir` may be NULL); `out_json` valid.
 */
enum HdlrStatus hdlr_generate(const char *config_path,
                              const char *prompt,
                              const char *workdir,
                              char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HDLREFINE_H */
