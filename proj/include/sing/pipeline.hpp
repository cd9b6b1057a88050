#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sing/batching.hpp"
#include "sing/config.hpp"
#include "sing/evaluation.hpp"
#include "sing/midi.hpp"
#include "sing/model.hpp"
#include "sing/training.hpp"

namespace sing::pipeline {

namespace fs = std::filesystem;

// Regular files in dir with the given extension, sorted by name.
std::vector<fs::path> list_files(const fs::path& dir, std::string_view extension);

// MIDI file -> estimated-tempo binary piano roll.
PianoRoll roll_from_midi(std::span<const std::uint8_t> bytes, std::string source_id);

struct PreprocessSummary {
  std::size_t written = 0;
  std::vector<std::string> failed;  // "file: reason"
};

// Each *.mid / *.midi under in_dir becomes <stem>.proll and <stem>.ssm.
PreprocessSummary preprocess(const fs::path& in_dir, const fs::path& out_dir, std::size_t jobs);

// Slices, grids, assigns and batches every *.proll in corpus_dir.
BatchPlan plan_corpus(const fs::path& corpus_dir, const BatchingOptions& options,
                      std::uint64_t seed, LengthGrid* grid = nullptr);

// Materializes the edited segments named by a plan, in assignment order.
std::vector<TrainingPiece> load_plan_pieces(const fs::path& corpus_dir, const BatchPlan& plan,
                                            std::size_t max_len);

struct TrainRequest {
  Settings settings;
  fs::path corpus_dir;
  fs::path plan;
  std::optional<fs::path> val_plan;
  fs::path out_dir;
};

// Model initialization draws from a stream derived from the training seed.
TrainResult train_from_files(const TrainRequest& request, const EpochCallback& on_epoch = {});

// Seed roll + template SSM -> generated roll written as <out>.proll and
// <out>.mid.
PianoRoll generate_files(const Model& model, const fs::path& seed_roll, const fs::path& tmpl,
                         std::uint64_t seed, const fs::path& out_prefix);

// Every *.proll in dir paired with <stem>.ssm (computed when absent).
std::vector<EvalPiece> load_eval_pieces(const fs::path& dir);

}  // namespace sing::pipeline
