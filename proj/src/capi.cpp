#include "sing.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <string>

#include "sing/config.hpp"
#include "sing/error.hpp"
#include "sing/evaluation.hpp"
#include "sing/formats.hpp"
#include "sing/pipeline.hpp"

struct sing_config {
  sing::Settings settings;
};
struct sing_roll {
  sing::PianoRoll roll;
};
struct sing_ssm {
  sing::SelfSimilarityMatrix ssm;
};
struct sing_model {
  sing::Model model;
};

namespace {

thread_local std::string g_last_error;

sing_status fail(sing_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

sing_status from_kind(sing::ErrorKind kind) {
  switch (kind) {
    case sing::ErrorKind::kInvalidArgument: return SING_ERR_INVALID_ARGUMENT;
    case sing::ErrorKind::kShape: return SING_ERR_SHAPE;
    case sing::ErrorKind::kParse: return SING_ERR_PARSE;
    case sing::ErrorKind::kFormat: return SING_ERR_FORMAT;
    case sing::ErrorKind::kIo: return SING_ERR_IO;
    case sing::ErrorKind::kNumeric: return SING_ERR_NUMERIC;
  }
  return SING_ERR_INTERNAL;
}

template <typename F>
sing_status guarded(F&& body) {
  try {
    body();
    return SING_OK;
  } catch (const sing::Error& e) {
    return fail(from_kind(e.kind()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(SING_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SING_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SING_ERR_INTERNAL, e.what());
  }
}

#define SING_REQUIRE(cond, what) \
  if (!(cond)) return fail(SING_ERR_INVALID_ARGUMENT, what)

}  // namespace

extern "C" {

const char* sing_version(void) { return "0.1.0"; }

const char* sing_last_error(void) { return g_last_error.c_str(); }

const char* sing_status_name(sing_status status) {
  switch (status) {
    case SING_OK: return "ok";
    case SING_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SING_ERR_SHAPE: return "shape mismatch";
    case SING_ERR_PARSE: return "parse error";
    case SING_ERR_FORMAT: return "format error";
    case SING_ERR_IO: return "i/o error";
    case SING_ERR_NUMERIC: return "numeric error";
    case SING_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

sing_config* sing_config_create(void) { return new (std::nothrow) sing_config{}; }

void sing_config_destroy(sing_config* config) { delete config; }

sing_status sing_config_load_file(sing_config* config, const char* path) {
  SING_REQUIRE(config && path, "null argument");
  return guarded([&] { config->settings.load(sing::read_text(path)); });
}

sing_status sing_config_set(sing_config* config, const char* key, const char* value) {
  SING_REQUIRE(config && key && value, "null argument");
  return guarded([&] { config->settings.set(key, value); });
}

sing_status sing_config_get(const sing_config* config, const char* key, char* buf,
                            size_t capacity, size_t* needed) {
  SING_REQUIRE(config && key, "null argument");
  return guarded([&] {
    const std::string v = config->settings.get(key);
    if (needed) *needed = v.size() + 1;
    if (buf == nullptr) return;
    if (capacity < v.size() + 1) {
      throw sing::Error(sing::ErrorKind::kInvalidArgument, "buffer too small for " + std::string(key));
    }
    std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

size_t sing_config_key_count(void) { return sing::Settings::keys().size(); }

const char* sing_config_key_name(size_t index) {
  const auto& keys = sing::Settings::keys();
  return index < keys.size() ? keys[index].c_str() : nullptr;
}

sing_status sing_roll_read(const char* path, sing_roll** out) {
  SING_REQUIRE(path && out, "null argument");
  return guarded([&] {
    auto roll = sing::decode_roll(sing::read_file(path));
    roll.set_source_id(std::filesystem::path(path).stem().string());
    *out = new sing_roll{std::move(roll)};
  });
}

sing_status sing_roll_write(const sing_roll* roll, const char* path) {
  SING_REQUIRE(roll && path, "null argument");
  return guarded([&] { sing::write_file(path, sing::encode_roll(roll->roll)); });
}

sing_status sing_roll_from_midi_file(const char* path, sing_roll** out) {
  SING_REQUIRE(path && out, "null argument");
  return guarded([&] {
    auto roll = sing::pipeline::roll_from_midi(sing::read_file(path),
                                               std::filesystem::path(path).stem().string());
    *out = new sing_roll{std::move(roll)};
  });
}

sing_status sing_roll_write_midi(const sing_roll* roll, const char* path) {
  SING_REQUIRE(roll && path, "null argument");
  return guarded([&] { sing::write_file(path, sing::to_midi(roll->roll, roll->roll.tempo())); });
}

size_t sing_roll_samples(const sing_roll* roll) { return roll ? roll->roll.samples() : 0; }

double sing_roll_tempo(const sing_roll* roll) { return roll ? roll->roll.tempo() : 0.0; }

int sing_roll_get(const sing_roll* roll, size_t pitch, size_t sample) {
  if (!roll || pitch >= sing::kPitches || sample >= roll->roll.samples()) return 0;
  return roll->roll.active(pitch, sample) ? 1 : 0;
}

void sing_roll_destroy(sing_roll* roll) { delete roll; }

sing_status sing_ssm_from_roll(const sing_roll* roll, sing_ssm** out) {
  SING_REQUIRE(roll && out, "null argument");
  return guarded([&] { *out = new sing_ssm{sing::ssm_of(roll->roll)}; });
}

sing_status sing_ssm_read(const char* path, sing_ssm** out) {
  SING_REQUIRE(path && out, "null argument");
  return guarded([&] { *out = new sing_ssm{sing::decode_ssm(sing::read_file(path))}; });
}

sing_status sing_ssm_write(const sing_ssm* ssm, const char* path) {
  SING_REQUIRE(ssm && path, "null argument");
  return guarded([&] { sing::write_file(path, sing::encode_ssm(ssm->ssm)); });
}

sing_status sing_ssm_synth_file(const char* spec_path, sing_ssm** out) {
  SING_REQUIRE(spec_path && out, "null argument");
  return guarded([&] {
    *out = new sing_ssm{sing::synth_ssm(sing::parse_synth_spec(sing::read_text(spec_path)))};
  });
}

sing_status sing_ssm_write_pgm(const sing_ssm* ssm, const char* path) {
  SING_REQUIRE(ssm && path, "null argument");
  return guarded([&] { sing::write_file(path, sing::render_pgm(ssm->ssm.values)); });
}

size_t sing_ssm_size(const sing_ssm* ssm) { return ssm ? ssm->ssm.size() : 0; }

double sing_ssm_get(const sing_ssm* ssm, size_t row, size_t col) {
  if (!ssm || row >= ssm->ssm.size() || col >= ssm->ssm.size()) return 0.0;
  return ssm->ssm.values(row, col);
}

sing_status sing_ssm_standardized_mse(const sing_ssm* reference, const sing_ssm* generated,
                                      double* out) {
  SING_REQUIRE(reference && generated && out, "null argument");
  return guarded([&] { *out = sing::standardized_mse(reference->ssm, generated->ssm); });
}

void sing_ssm_destroy(sing_ssm* ssm) { delete ssm; }

sing_status sing_preprocess(const char* midi_dir, const char* out_dir, size_t jobs,
                            size_t* written, size_t* failed) {
  SING_REQUIRE(midi_dir && out_dir, "null argument");
  return guarded([&] {
    const auto summary = sing::pipeline::preprocess(midi_dir, out_dir, jobs);
    if (written) *written = summary.written;
    if (failed) *failed = summary.failed.size();
  });
}

sing_status sing_batch_plan(const sing_config* config, const char* corpus_dir, uint64_t seed,
                            const char* plan_path, size_t* assigned, size_t* excluded,
                            size_t* batches) {
  SING_REQUIRE(config && corpus_dir && plan_path, "null argument");
  return guarded([&] {
    const auto plan = sing::pipeline::plan_corpus(corpus_dir, config->settings.batching, seed);
    sing::write_text(plan_path, sing::format_plan(plan));
    if (assigned) *assigned = plan.assignments.size();
    if (excluded) *excluded = plan.excluded.size();
    if (batches) *batches = plan.batches.size();
  });
}

sing_status sing_train(const sing_config* config, const char* corpus_dir, const char* plan_path,
                       const char* val_plan_path, const char* out_dir, uint64_t seed, int ablated,
                       sing_epoch_callback callback, void* user, size_t* best_epoch) {
  SING_REQUIRE(config && corpus_dir && plan_path && out_dir, "null argument");
  return guarded([&] {
    sing::pipeline::TrainRequest request;
    request.settings = config->settings;
    request.settings.train.seed = seed;
    if (ablated) request.settings.model.attention = false;
    request.corpus_dir = corpus_dir;
    request.plan = plan_path;
    if (val_plan_path) request.val_plan = std::filesystem::path(val_plan_path);
    request.out_dir = out_dir;
    const auto result = sing::pipeline::train_from_files(request, [&](const sing::EpochReport& r) {
      if (callback) callback(user, r.epoch, r.train_loss, r.val_loss, r.seconds);
    });
    if (best_epoch) *best_epoch = result.reports[result.best_index].epoch;
  });
}

sing_status sing_model_read(const char* path, sing_model** out) {
  SING_REQUIRE(path && out, "null argument");
  return guarded([&] { *out = new sing_model{sing::decode_checkpoint(sing::read_file(path))}; });
}

sing_status sing_model_write(const sing_model* model, const char* path) {
  SING_REQUIRE(model && path, "null argument");
  return guarded([&] { sing::write_file(path, sing::encode_checkpoint(model->model)); });
}

int sing_model_has_attention(const sing_model* model) {
  return model && model->model.config().attention ? 1 : 0;
}

size_t sing_model_seed_len(const sing_model* model) {
  return model ? model->model.config().seed_len : 0;
}

sing_status sing_model_generate(const sing_model* model, const sing_roll* seed,
                                const sing_ssm* tmpl, uint64_t rng_seed, sing_roll** out) {
  SING_REQUIRE(model && seed && tmpl && out, "null argument");
  return guarded([&] {
    sing::Rng rng(rng_seed);
    *out = new sing_roll{sing::generate(model->model, seed->roll, tmpl->ssm, rng)};
  });
}

void sing_model_destroy(sing_model* model) { delete model; }

sing_status sing_evaluate(const sing_model* model, const sing_config* config,
                          const char* corpus_dir, uint64_t seed, size_t generations, size_t jobs,
                          const char* csv_path, double* mean_std_mse, size_t* pieces,
                          size_t* skipped) {
  SING_REQUIRE(config && corpus_dir, "null argument");
  SING_REQUIRE(generations > 0, "generations must be positive");
  return guarded([&] {
    const auto corpus = sing::pipeline::load_eval_pieces(corpus_dir);
    sing::EvalRun run;
    if (model) {
      const char* name = model->model.config().attention ? "sing" : "ablated";
      run = sing::evaluate(name, sing::model_generator(model->model), corpus, seed, generations, jobs);
    } else {
      run = sing::evaluate("random", sing::random_generator(config->settings.model), corpus, seed,
                           generations, jobs);
    }
    if (csv_path) sing::write_text(csv_path, sing::format_eval_csv(run));
    if (mean_std_mse) *mean_std_mse = run.mean();
    if (pieces) *pieces = run.pieces;
    if (skipped) *skipped = run.skipped.size();
  });
}

}  // extern "C"
