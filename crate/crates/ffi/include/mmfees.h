#ifndef MMFEES_H
#define MMFEES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for every fallible call.
 */
typedef enum MmfStatus {
  MMF_STATUS_OK = 0,
  MMF_STATUS_NULL_POINTER = 1,
  MMF_STATUS_INVALID_UTF8 = 2,
  MMF_STATUS_CONFIG_ERROR = 3,
  MMF_STATUS_INVALID_ARGUMENT = 4,
  MMF_STATUS_TOO_LARGE = 5,
  MMF_STATUS_IO_ERROR = 6,
  MMF_STATUS_PANIC = 7,
} MmfStatus;

/**
 * Opaque experiment configuration.
 */
typedef struct MmfConfig MmfConfig;

/**
 * Opaque result of a multi-instance experiment.
 */
typedef struct MmfExperiment MmfExperiment;

/**
 * Opaque exact reward matrix together with its equilibrium classification.
 */
typedef struct MmfRewardMatrix MmfRewardMatrix;

/**
 * Plain-value summary of an experiment. Statistics whose `has_*` flag is 0
 * are undefined and set to NaN.
 */
typedef struct MmfSummary {
  size_t n_instances;
  size_t n_converged;
  uint8_t has_net_fee;
  double net_fee_mean;
  double net_fee_std;
  double orders_mean;
  double orders_std;
  double convergence_rate;
  double modal_fraction;
} MmfSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Short static description of a status code.
 */
const char *mmf_status_message(enum MmfStatus status);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length without the NUL, or 0
 * when there is no error.
 */
size_t mmf_last_error(char *buf, size_t cap);

/**
 * Baseline configuration.
 */
struct MmfConfig *mmf_config_new(void);

/**
 * Parses `key = value` text into a new configuration.
 */
enum MmfStatus mmf_config_parse(const char *text, struct MmfConfig **out);

/**
 * Loads a configuration file.
 */
enum MmfStatus mmf_config_load(const char *path, struct MmfConfig **out);

/**
 * Sets one configuration key, with the same keys and value syntax as the
 * config file. Setting `beta` keeps the current `eta`.
 */
enum MmfStatus mmf_config_set(struct MmfConfig *cfg, const char *key, const char *value);

/**
 * Reads a numeric configuration value. Count keys are returned as doubles.
 */
enum MmfStatus mmf_config_get(const struct MmfConfig *cfg, const char *key, double *out);

void mmf_config_free(struct MmfConfig *cfg);

/**
 * Exact expected one-period reward of each agent under the profile given by
 * `n_agents` 1-based joint action ids. Writes `n_agents` values to `out`.
 */
enum MmfStatus mmf_expected_reward(const struct MmfConfig *cfg,
                                   const uint32_t *action_ids,
                                   size_t n_agents,
                                   double *out);

/**
 * Builds the full reward matrix and classifies its equilibria.
 */
enum MmfStatus mmf_reward_matrix_build(const struct MmfConfig *cfg, struct MmfRewardMatrix **out);

size_t mmf_reward_matrix_num_agents(const struct MmfRewardMatrix *m);

size_t mmf_reward_matrix_num_actions(const struct MmfRewardMatrix *m);

/**
 * Expected reward of `agent` (0-based) under a profile of 1-based action ids.
 */
enum MmfStatus mmf_reward_matrix_get(const struct MmfRewardMatrix *m,
                                     const uint32_t *action_ids,
                                     size_t n_agents,
                                     size_t agent,
                                     double *out);

/**
 * Sets `*out` to 1 when the profile is a pure Nash equilibrium, else 0.
 */
enum MmfStatus mmf_reward_matrix_is_nash(const struct MmfRewardMatrix *m,
                                         const uint32_t *action_ids,
                                         size_t n_agents,
                                         uint8_t *out);

/**
 * Sets `*out` to 1 when the profile maximises joint profit, else 0.
 */
enum MmfStatus mmf_reward_matrix_is_cooperative(const struct MmfRewardMatrix *m,
                                                const uint32_t *action_ids,
                                                size_t n_agents,
                                                uint8_t *out);

void mmf_reward_matrix_free(struct MmfRewardMatrix *m);

/**
 * Runs every configured instance with seeds `seed + k`.
 */
enum MmfStatus mmf_experiment_run(const struct MmfConfig *cfg,
                                  uint64_t seed,
                                  struct MmfExperiment **out);

enum MmfStatus mmf_experiment_summary(const struct MmfExperiment *exp, struct MmfSummary *out);

/**
 * Writes the most common settled profile (1-based ids) into `buf`. `*len`
 * receives the number of agents even when `cap` is too small, in which case
 * nothing is written and `MMF_STATUS_INVALID_ARGUMENT` is returned.
 */
enum MmfStatus mmf_experiment_modal_profile(const struct MmfExperiment *exp,
                                            uint32_t *buf,
                                            size_t cap,
                                            size_t *len);

/**
 * Share of instances that settled on the profile of 1-based ids.
 */
enum MmfStatus mmf_experiment_profile_share(const struct MmfExperiment *exp,
                                            const uint32_t *action_ids,
                                            size_t n_agents,
                                            double *out);

void mmf_experiment_free(struct MmfExperiment *exp);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMFEES_H */
