#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sing/batching.hpp"
#include "sing/formats.hpp"
#include "sing/model.hpp"
#include "sing/nn.hpp"
#include "sing/piano_roll.hpp"
#include "sing/structure.hpp"

namespace sing {

struct TrainConfig {
  double p_feedback = 0.8;
  double lr = 0.001;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty: keep checkpoints in memory only
  nn::AdamOptions adam{};

  void validate() const;
};

// A training example after slicing and length editing, with the SSM of the
// edited roll.
struct TrainingPiece {
  std::string id;
  PianoRoll roll;
  SelfSimilarityMatrix ssm;
};

TrainingPiece make_training_piece(std::string id, PianoRoll roll);

struct EpochReport {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
  std::size_t batches = 0;
  std::size_t pieces = 0;
  bool train_loss_defined = true;
  bool val_loss_defined = true;
};

struct PieceLoss {
  double total = 0.0;
  double bce = 0.0;
  double structural = 0.0;
  std::vector<nn::Vec> d_logits;  // one per trace step
};

// Chroma columns for the relaxed generated SSM: seed positions use the
// target's chroma, generated positions the per-pitch probabilities folded
// to pitch classes.
Tensor2 relaxed_chroma(const ForwardTrace& trace, const PianoRoll& target);

// Sum of BCE over generated positions plus MSE(G, S), where G is the SSM of
// relaxed_chroma. d_logits is filled when with_gradient is set.
PieceLoss piece_loss(const ForwardTrace& trace, const PianoRoll& target, const Tensor2& ssm,
                     bool with_gradient = true);

// MSE between the cosine SSM of the chroma columns and S, with gradient
// with respect to the chroma columns listed in free_columns.
double structural_loss(const Tensor2& chroma, const Tensor2& ssm, std::size_t first_free,
                       Tensor2* d_chroma);

// One scheduled-sampling pass plus backward for a single piece. Gradients
// accumulate into the model.
PieceLoss train_piece(Model& model, const TrainingPiece& piece, double p_feedback, Rng& rng);

// Loss only, no gradients.
double evaluate_piece_loss(const Model& model, const TrainingPiece& piece, double p_feedback,
                           Rng& rng);

// One Adam step per batch with the summed gradients of its pieces.
// plan indices refer to `pieces`.
EpochReport train_epoch(Model& model, std::span<const std::vector<std::size_t>> batches,
                        std::span<const TrainingPiece> pieces, const TrainConfig& config,
                        Rng& rng);

double validation_loss(const Model& model, std::span<const TrainingPiece> pieces,
                       const TrainConfig& config, std::uint64_t seed, bool* defined = nullptr);

// Index of the minimum validation loss, earliest on ties.
std::size_t select_best(std::span<const EpochReport> reports);

struct TrainResult {
  std::vector<EpochReport> reports;
  std::size_t best_index = 0;
  std::vector<Bytes> checkpoints;  // encoded model after each epoch
};

using EpochCallback = std::function<void(const EpochReport&)>;

// Runs config.epochs epochs, writes epoch_<k>.ckpt, best.ckpt and
// report.csv into checkpoint_dir when set, and leaves `model` at the best
// epoch's parameters.
TrainResult train(Model& model, std::span<const std::vector<std::size_t>> batches,
                  std::span<const TrainingPiece> train_pieces,
                  std::span<const TrainingPiece> val_pieces, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

std::string format_report_csv(std::span<const EpochReport> reports);

}  // namespace sing
