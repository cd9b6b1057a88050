#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sing/model.hpp"
#include "sing/piano_roll.hpp"
#include "sing/rng.hpp"
#include "sing/structure.hpp"

namespace sing {

struct EvalPiece {
  std::string id;
  PianoRoll roll;
  SelfSimilarityMatrix tmpl;
};

struct EvalRecord {
  std::string piece_id;
  std::size_t generation = 0;
  double std_mse = 0.0;
};

struct EvalRun {
  std::string generator;
  std::vector<EvalRecord> records;
  std::size_t pieces = 0;
  std::vector<std::string> skipped;

  double mean() const;
};

// Produces a roll of tmpl.size() samples for one piece.
using Generator = std::function<PianoRoll(const EvalPiece&, Rng&)>;

// Every sample activates exactly max_notes distinct pitches drawn
// uniformly from [pitch_lo, pitch_hi].
PianoRoll random_baseline(std::size_t n, const ModelConfig& config, Rng& rng);

Generator model_generator(const Model& model);
Generator random_generator(const ModelConfig& config);
Generator replay_generator();

// For each piece, `generations` rolls are produced and scored by
// standardized MSE of their SSM against the template. Piece i draws from
// its own stream derived from (seed, i), so results do not depend on jobs.
EvalRun evaluate(std::string name, const Generator& generator, std::span<const EvalPiece> pieces,
                 std::uint64_t seed, std::size_t generations = 3, std::size_t jobs = 1);

std::string format_eval_csv(const EvalRun& run);

}  // namespace sing
