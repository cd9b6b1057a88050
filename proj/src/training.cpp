#include "sing/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "sing/error.hpp"
#include "sing/log.hpp"

namespace sing {

void TrainConfig::validate() const {
  if (p_feedback < 0.0 || p_feedback > 1.0) {
    throw Error(ErrorKind::kInvalidArgument, "p_feedback must lie in [0, 1]");
  }
  if (!(lr > 0.0)) throw Error(ErrorKind::kInvalidArgument, "lr must be positive");
}

TrainingPiece make_training_piece(std::string id, PianoRoll roll) {
  auto s = ssm_of(roll);
  return {std::move(id), std::move(roll), std::move(s)};
}

Tensor2 relaxed_chroma(const ForwardTrace& trace, const PianoRoll& target) {
  const std::size_t n = trace.seed_len + trace.steps.size();
  Tensor2 out(kPitchClasses, n);
  for (std::size_t t = 0; t < trace.seed_len; ++t) {
    const auto sample = target.sample(t);
    for (std::size_t p = 0; p < kPitches; ++p) {
      if (sample[p]) out(p % kPitchClasses, t) += 1.0;
    }
  }
  for (const auto& rec : trace.steps) {
    for (std::size_t p = 0; p < kPitches; ++p) out(p % kPitchClasses, rec.position) += rec.prob[p];
  }
  return out;
}

double structural_loss(const Tensor2& chroma, const Tensor2& ssm, std::size_t first_free,
                       Tensor2* d_chroma) {
  const std::size_t n = chroma.cols;
  const std::size_t k = chroma.rows;
  if (ssm.rows != n || ssm.cols != n) {
    throw Error(ErrorKind::kShape, "structural loss: SSM size " + std::to_string(ssm.rows) +
                                       " does not match sequence length " + std::to_string(n));
  }
  // Unit columns (zero for silent columns) and the cosine matrix.
  Tensor2 unit(n, k);
  std::vector<double> norm(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    double sq = 0.0;
    for (std::size_t c = 0; c < k; ++c) sq += chroma(c, s) * chroma(c, s);
    norm[s] = std::sqrt(sq);
    if (norm[s] > 0.0) {
      for (std::size_t c = 0; c < k; ++c) unit(s, c) = chroma(c, s) / norm[s];
    }
  }
  Tensor2 g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (norm[i] == 0.0) continue;
    g(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (norm[j] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < k; ++c) dot += unit(i, c) * unit(j, c);
      g(i, j) = dot;
      g(j, i) = dot;
    }
  }
  const double loss = mse(g, ssm);
  if (d_chroma == nullptr) return loss;

  *d_chroma = Tensor2(k, n);
  const double scale = 2.0 / static_cast<double>(n * n);
  std::vector<double> du(k);
  for (std::size_t col = first_free; col < n; ++col) {
    if (norm[col] == 0.0) continue;
    std::fill(du.begin(), du.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == col || norm[j] == 0.0) continue;
      const double coeff = scale * ((g(col, j) - ssm(col, j)) + (g(j, col) - ssm(j, col)));
      for (std::size_t c = 0; c < k; ++c) du[c] += coeff * unit(j, c);
    }
    double along = 0.0;
    for (std::size_t c = 0; c < k; ++c) along += du[c] * unit(col, c);
    for (std::size_t c = 0; c < k; ++c) {
      (*d_chroma)(c, col) = (du[c] - along * unit(col, c)) / norm[col];
    }
  }
  return loss;
}

PieceLoss piece_loss(const ForwardTrace& trace, const PianoRoll& target, const Tensor2& ssm,
                     bool with_gradient) {
  const std::size_t n = trace.seed_len + trace.steps.size();
  if (target.samples() != n) {
    throw Error(ErrorKind::kShape, "piece loss: target has " + std::to_string(target.samples()) +
                                       " samples, trace covers " + std::to_string(n));
  }
  PieceLoss out;
  if (with_gradient) out.d_logits.assign(trace.steps.size(), nn::Vec(kPitches, 0.0));
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const auto& rec = trace.steps[s];
    const nn::Vec y = sample_vector(target, rec.position);
    out.bce += nn::bce_with_logits(rec.logits, y,
                                   with_gradient ? std::span<double>(out.d_logits[s])
                                                 : std::span<double>());
  }

  const Tensor2 chroma = relaxed_chroma(trace, target);
  Tensor2 d_chroma;
  out.structural = structural_loss(chroma, ssm, trace.seed_len, with_gradient ? &d_chroma : nullptr);
  out.total = out.bce + out.structural;

  if (with_gradient) {
    for (std::size_t s = 0; s < trace.steps.size(); ++s) {
      const auto& rec = trace.steps[s];
      auto& d = out.d_logits[s];
      for (std::size_t p = 0; p < kPitches; ++p) {
        const double q = rec.prob[p];
        d[p] += d_chroma(p % kPitchClasses, rec.position) * q * (1.0 - q);
      }
    }
  }
  return out;
}

PieceLoss train_piece(Model& model, const TrainingPiece& piece, double p_feedback, Rng& rng) {
  const ForwardTrace trace = run_sequence(model, piece.roll, &piece.ssm.values,
                                          piece.roll.samples(), Feedback::kScheduled, p_feedback, rng);
  PieceLoss loss = piece_loss(trace, piece.roll, piece.ssm.values, true);
  if (!std::isfinite(loss.total)) {
    throw Error(ErrorKind::kNumeric, "non-finite loss on piece " + piece.id);
  }
  backpropagate(model, trace, loss.d_logits);
  return loss;
}

double evaluate_piece_loss(const Model& model, const TrainingPiece& piece, double p_feedback,
                           Rng& rng) {
  const ForwardTrace trace = run_sequence(model, piece.roll, &piece.ssm.values,
                                          piece.roll.samples(), Feedback::kScheduled, p_feedback, rng);
  return piece_loss(trace, piece.roll, piece.ssm.values, false).total;
}

EpochReport train_epoch(Model& model, std::span<const std::vector<std::size_t>> batches,
                        std::span<const TrainingPiece> pieces, const TrainConfig& config,
                        Rng& rng) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  EpochReport report;
  nn::AdamOptions adam = config.adam;
  adam.lr = config.lr;
  double sum = 0.0;
  model.params().zero_grad();
  for (const auto& batch : batches) {
    if (batch.empty()) continue;
    const std::size_t length = pieces[batch.front()].roll.samples();
    for (auto idx : batch) {
      if (idx >= pieces.size()) throw Error(ErrorKind::kInvalidArgument, "batch index out of range");
      const auto& piece = pieces[idx];
      if (piece.roll.samples() != length) {
        throw Error(ErrorKind::kInvalidArgument, "batch mixes lengths (piece " + piece.id + ")");
      }
      sum += train_piece(model, piece, config.p_feedback, rng).total;
      ++report.pieces;
    }
    nn::adam_step(model.params(), adam);
    ++report.batches;
  }
  report.train_loss_defined = report.pieces > 0;
  report.train_loss = report.pieces ? sum / static_cast<double>(report.pieces)
                                    : std::numeric_limits<double>::quiet_NaN();
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

double validation_loss(const Model& model, std::span<const TrainingPiece> pieces,
                       const TrainConfig& config, std::uint64_t seed, bool* defined) {
  if (defined != nullptr) *defined = !pieces.empty();
  if (pieces.empty()) return std::numeric_limits<double>::quiet_NaN();
  Rng rng(seed);
  double sum = 0.0;
  for (const auto& piece : pieces) {
    const double loss = evaluate_piece_loss(model, piece, config.p_feedback, rng);
    if (!std::isfinite(loss)) throw Error(ErrorKind::kNumeric, "non-finite validation loss on piece " + piece.id);
    sum += loss;
  }
  return sum / static_cast<double>(pieces.size());
}

std::size_t select_best(std::span<const EpochReport> reports) {
  if (reports.empty()) throw Error(ErrorKind::kInvalidArgument, "no epoch reports to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].val_loss < reports[best].val_loss) best = i;
  }
  return best;
}

TrainResult train(Model& model, std::span<const std::vector<std::size_t>> batches,
                  std::span<const TrainingPiece> train_pieces,
                  std::span<const TrainingPiece> val_pieces, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (config.epochs == 0) throw Error(ErrorKind::kInvalidArgument, "epochs must be at least 1");
  Rng rng(config.seed);
  const std::uint64_t val_seed = Rng::mix(config.seed ^ 0x5eedULL);
  const bool write = !config.checkpoint_dir.empty();
  if (write) std::filesystem::create_directories(config.checkpoint_dir);

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochReport report = train_epoch(model, batches, train_pieces, config, rng);
    report.epoch = epoch;
    const auto t0 = std::chrono::steady_clock::now();
    // Without a validation set, selection falls back to the training pieces.
    const auto& selection = val_pieces.empty() ? train_pieces : val_pieces;
    report.val_loss = validation_loss(model, selection, config, val_seed, &report.val_loss_defined);
    report.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.checkpoints.push_back(encode_checkpoint(model));
    if (write) {
      write_file(config.checkpoint_dir / ("epoch_" + std::to_string(epoch) + ".ckpt"),
                 result.checkpoints.back());
    }
    log::info("epoch " + std::to_string(epoch) + " train " + std::to_string(report.train_loss) +
              " val " + std::to_string(report.val_loss));
    result.reports.push_back(report);
    if (on_epoch) on_epoch(report);
  }
  result.best_index = select_best(result.reports);
  model = decode_checkpoint(result.checkpoints[result.best_index]);
  if (write) {
    write_file(config.checkpoint_dir / "best.ckpt", result.checkpoints[result.best_index]);
    write_text(config.checkpoint_dir / "report.csv", format_report_csv(result.reports));
  }
  return result;
}

std::string format_report_csv(std::span<const EpochReport> reports) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,seconds\n";
  char buf[128];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.3f\n", r.epoch, r.train_loss, r.val_loss,
                  r.seconds);
    out << buf;
  }
  return out.str();
}

}  // namespace sing
