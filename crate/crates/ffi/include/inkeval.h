#ifndef INKEVAL_H
#define INKEVAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum InkevalStatus {
  INKEVAL_STATUS_OK = 0,
  INKEVAL_STATUS_NULL_POINTER = 1,
  INKEVAL_STATUS_INVALID_UTF8 = 2,
  INKEVAL_STATUS_INVALID_ARGUMENT = 3,
  /**
   * The input was understood but the computation rejected it (e.g. a group
   * of one sample, or rankings that are not permutations).
   */
  INKEVAL_STATUS_REJECTED = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  INKEVAL_STATUS_INTERNAL = 5,
} InkevalStatus;

/**
 * Opaque reward scorer: a similarity backend plus reward weights.
 */
typedef struct InkevalScorer InkevalScorer;

/**
 * Reward terms for one response.
 */
typedef struct InkevalReward {
  double r_acc;
  double r_bert;
  double r_miou;
  double r_format;
  double total;
} InkevalReward;

/**
 * Rank agreement between two orderings.
 */
typedef struct InkevalRankReport {
  size_t n;
  double kendall_tau;
  double spearman_rho;
  double top1_accuracy;
  double pairwise_accuracy;
  /**
   * 0 for tau-a (tie-free input), 1 for tau-b.
   */
  int32_t tau_variant;
} InkevalRankReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. The pointer is
 * owned by the library and valid until the next failing call on this thread.
 */
const char *inkeval_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *inkeval_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 */
void inkeval_string_free(char *s);

/**
 * Creates a scorer with the built-in token-F1 similarity and default weights.
 */
enum InkevalStatus inkeval_scorer_new(struct InkevalScorer **out_scorer);

/**
 * Creates a scorer that asks the similarity service at `base_url`, falling
 * back to the built-in measure when it is unreachable.
 */
enum InkevalStatus inkeval_scorer_new_remote(const char *base_url,
                                             uint64_t timeout_ms,
                                             struct InkevalScorer **out_scorer);

/**
 * Replaces the reward weights. Weights must be finite, non-negative and not all zero.
 */
enum InkevalStatus inkeval_scorer_set_weights(struct InkevalScorer *scorer,
                                              double w_acc,
                                              double w_bert,
                                              double w_miou,
                                              double w_format);

/**
 * Destroys a scorer. Null is ignored.
 */
void inkeval_scorer_free(struct InkevalScorer *scorer);

/**
 * Scores `response` against the reference response text `reference`, both
 * parsed for an image of `width` x `height` pixels. The reference must
 * contain a final score.
 */
enum InkevalStatus inkeval_final_reward(const struct InkevalScorer *scorer,
                                        const char *response,
                                        const char *reference,
                                        uint32_t width,
                                        uint32_t height,
                                        struct InkevalReward *out_reward);

/**
 * Score-accuracy term for scores in 0..=5; `predicted` may be -1.
 */
enum InkevalStatus inkeval_accuracy_reward(int32_t predicted, int32_t reference, double *out_value);

/**
 * IoU of two normalized boxes given as `[x_min, y_min, x_max, y_max]`.
 */
enum InkevalStatus inkeval_iou(const double *a, const double *b, double *out_value);

/**
 * Group-normalized advantages. `out_advantages` must hold `len` values.
 */
enum InkevalStatus inkeval_group_advantages(const double *rewards,
                                            size_t len,
                                            double std_floor,
                                            double *out_advantages);

/**
 * Mean clipped surrogate objective over `len` samples.
 */
enum InkevalStatus inkeval_clipped_surrogate(const double *advantages,
                                             const double *ratios,
                                             size_t len,
                                             double clip_epsilon,
                                             double *out_value);

/**
 * Parses an expert response into a JSON parse report written to
 * `out_json` (free with [`inkeval_string_free`]). Incomplete responses are
 * not an error; check the report's `complete` field.
 */
enum InkevalStatus inkeval_parse_response(const char *response,
                                          uint32_t width,
                                          uint32_t height,
                                          char **out_json);

/**
 * Correlations between two 1-based tie-free rankings of `len` items.
 */
enum InkevalStatus inkeval_rank_correlations(const size_t *rank_a,
                                             const size_t *rank_b,
                                             size_t len,
                                             struct InkevalRankReport *out_report);

/**
 * Correlations between two score vectors that may contain ties (higher is better).
 */
enum InkevalStatus inkeval_rank_correlations_tied(const double *scores_a,
                                                  const double *scores_b,
                                                  size_t len,
                                                  struct InkevalRankReport *out_report);

/**
 * Maps auction valuations to 3/4/5 score tiers, in input order.
 * `out_scores` must hold `len` bytes.
 */
enum InkevalStatus inkeval_scale_auction_labels(const double *valuations,
                                                size_t len,
                                                uint8_t *out_scores);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INKEVAL_H */
