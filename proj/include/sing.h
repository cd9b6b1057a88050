/*
 * C interface to the SING structure-guided music generator.
 *
 * Objects are opaque handles created by *_read / *_create / *_from_* calls
 * and released with the matching *_destroy. Every fallible call returns a
 * sing_status; on failure sing_last_error() holds a one-line description
 * for the calling thread until its next failing call.
 */
#ifndef SING_H_
#define SING_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SING_BUILDING_LIBRARY)
#    define SING_API __declspec(dllexport)
#  else
#    define SING_API __declspec(dllimport)
#  endif
#else
#  define SING_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sing_status {
  SING_OK = 0,
  SING_ERR_INVALID_ARGUMENT = 1,
  SING_ERR_SHAPE = 2,
  SING_ERR_PARSE = 3,
  SING_ERR_FORMAT = 4,
  SING_ERR_IO = 5,
  SING_ERR_NUMERIC = 6,
  SING_ERR_INTERNAL = 7
} sing_status;

typedef struct sing_config sing_config;
typedef struct sing_roll sing_roll;
typedef struct sing_ssm sing_ssm;
typedef struct sing_model sing_model;

SING_API const char* sing_version(void);
SING_API const char* sing_last_error(void);
SING_API const char* sing_status_name(sing_status status);

/* Configuration: every pipeline tunable as `key = value`. */
SING_API sing_config* sing_config_create(void);
SING_API void sing_config_destroy(sing_config* config);
SING_API sing_status sing_config_load_file(sing_config* config, const char* path);
SING_API sing_status sing_config_set(sing_config* config, const char* key, const char* value);
/* Copies the value and its terminator into buf when it fits; *needed (if
 * non-null) receives the required size including the terminator. */
SING_API sing_status sing_config_get(const sing_config* config, const char* key, char* buf,
                                     size_t capacity, size_t* needed);
SING_API size_t sing_config_key_count(void);
SING_API const char* sing_config_key_name(size_t index);

/* Piano rolls (PRoll files, MIDI import/export). */
SING_API sing_status sing_roll_read(const char* path, sing_roll** out);
SING_API sing_status sing_roll_write(const sing_roll* roll, const char* path);
SING_API sing_status sing_roll_from_midi_file(const char* path, sing_roll** out);
SING_API sing_status sing_roll_write_midi(const sing_roll* roll, const char* path);
SING_API size_t sing_roll_samples(const sing_roll* roll);
SING_API double sing_roll_tempo(const sing_roll* roll);
/* 1 if the pitch is active at the sample, 0 otherwise or when out of range. */
SING_API int sing_roll_get(const sing_roll* roll, size_t pitch, size_t sample);
SING_API void sing_roll_destroy(sing_roll* roll);

/* Self-similarity matrices (SINGSSM files, synthetic specs, PGM images). */
SING_API sing_status sing_ssm_from_roll(const sing_roll* roll, sing_ssm** out);
SING_API sing_status sing_ssm_read(const char* path, sing_ssm** out);
SING_API sing_status sing_ssm_write(const sing_ssm* ssm, const char* path);
SING_API sing_status sing_ssm_synth_file(const char* spec_path, sing_ssm** out);
SING_API sing_status sing_ssm_write_pgm(const sing_ssm* ssm, const char* path);
SING_API size_t sing_ssm_size(const sing_ssm* ssm);
SING_API double sing_ssm_get(const sing_ssm* ssm, size_t row, size_t col);
SING_API sing_status sing_ssm_standardized_mse(const sing_ssm* reference, const sing_ssm* generated,
                                               double* out);
SING_API void sing_ssm_destroy(sing_ssm* ssm);

/* Pipeline stages. Counts may be null. */
SING_API sing_status sing_preprocess(const char* midi_dir, const char* out_dir, size_t jobs,
                                     size_t* written, size_t* failed);
SING_API sing_status sing_batch_plan(const sing_config* config, const char* corpus_dir,
                                     uint64_t seed, const char* plan_path, size_t* assigned,
                                     size_t* excluded, size_t* batches);

typedef void (*sing_epoch_callback)(void* user, size_t epoch, double train_loss,
                                    double val_loss, double seconds);

/* Trains from a plan over corpus_dir and writes epoch_<k>.ckpt, best.ckpt
 * and report.csv into out_dir. val_plan_path and callback may be null.
 * ablated != 0 removes the attention path. */
SING_API sing_status sing_train(const sing_config* config, const char* corpus_dir,
                                const char* plan_path, const char* val_plan_path,
                                const char* out_dir, uint64_t seed, int ablated,
                                sing_epoch_callback callback, void* user, size_t* best_epoch);

/* Models (SINGCKPT files). */
SING_API sing_status sing_model_read(const char* path, sing_model** out);
SING_API sing_status sing_model_write(const sing_model* model, const char* path);
SING_API int sing_model_has_attention(const sing_model* model);
SING_API size_t sing_model_seed_len(const sing_model* model);
/* Generates tmpl-size samples continuing the first seed_len samples of seed. */
SING_API sing_status sing_model_generate(const sing_model* model, const sing_roll* seed,
                                         const sing_ssm* tmpl, uint64_t rng_seed, sing_roll** out);
SING_API void sing_model_destroy(sing_model* model);

/* Structural evaluation over every *.proll (+ .ssm) in corpus_dir. A null
 * model selects the uniform random baseline, which takes its pitch range
 * and note count from config. Writes piece_id,generation_index,std_mse
 * rows and a summary line to csv_path. */
SING_API sing_status sing_evaluate(const sing_model* model, const sing_config* config,
                                   const char* corpus_dir, uint64_t seed, size_t generations,
                                   size_t jobs, const char* csv_path, double* mean_std_mse,
                                   size_t* pieces, size_t* skipped);

#ifdef __cplusplus
}
#endif

#endif /* SING_H_ */
