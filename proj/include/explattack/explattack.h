/* C interface to the explattack library. All strings are UTF-8. Strings
 * returned through char** out-parameters are heap-allocated and must be
 * released with ea_string_free. On failure a function returns a non-zero
 * ea_status and ea_last_error() describes it (per thread). */
#ifndef EXPLATTACK_EXPLATTACK_H_
#define EXPLATTACK_EXPLATTACK_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  EA_OK = 0,
  EA_ERR_USAGE = 1,       /* bad argument, config value or missing input file */
  EA_ERR_IO = 2,
  EA_ERR_PARSE = 3,
  EA_ERR_VALIDATION = 4,
  EA_ERR_VICTIM = 5,
  EA_ERR_ID_MISMATCH = 6,
  EA_ERR_RUNTIME = 7
} ea_status;

typedef struct ea_config ea_config;
typedef struct ea_summary ea_summary;

typedef void (*ea_log_fn)(const char* line, void* user_data);

const char* ea_last_error(void);
const char* ea_status_name(ea_status status);
void ea_string_free(char* s);

/* Config: defaults, then EXPLATTACK_SEED, then a file, then explicit sets. */
ea_status ea_config_create(ea_config** out);
void ea_config_destroy(ea_config* config);
ea_status ea_config_set(ea_config* config, const char* key, const char* value);
ea_status ea_config_load_file(ea_config* config, const char* path);
ea_status ea_config_get(const ea_config* config, const char* key, char** out);

/* Registry of known keys. Index range is [0, ea_config_key_count()). The
 * returned pointers stay valid for the life of the process. */
size_t ea_config_key_count(void);
const char* ea_config_key_name(size_t index);
const char* ea_config_key_default(size_t index);
const char* ea_config_key_help(size_t index);
/* 1 if subcommand `command` reads the key. */
int ea_config_key_used_by(size_t index, const char* command);

typedef struct {
  uint64_t total;
  uint64_t attempted;
  uint64_t skipped;
  uint64_t errored;
  uint64_t successes;
  double original_accuracy;
  double after_attack_accuracy;
  double attack_success_rate;
  double avg_queries_all;
  double avg_queries_attempted;
} ea_summary_values;

/* Runs the attack campaign described by `config`; writes records.jsonl and
 * summary.json into output-dir. `log` may be NULL. */
ea_status ea_run_attack(const ea_config* config, ea_log_fn log, void* user_data,
                        ea_summary** out);
void ea_summary_destroy(ea_summary* summary);
ea_status ea_summary_get(const ea_summary* summary, ea_summary_values* out);
ea_status ea_summary_to_json(const ea_summary* summary, char** out);
ea_status ea_summary_records_path(const ea_summary* summary, char** out);

/* Each returns a JSON (train, score) or markdown (report) description. */
ea_status ea_train(const ea_config* config, char** out_json);
ea_status ea_score_explanations(const ea_config* config, char** out_json);
ea_status ea_render_report(const ea_config* config, char** out_markdown);

ea_status ea_pct_decrease(double baseline_asr, double variant_asr, double* out);

#ifdef __cplusplus
}
#endif

#endif /* EXPLATTACK_EXPLATTACK_H_ */
