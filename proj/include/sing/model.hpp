#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sing/nn.hpp"
#include "sing/piano_roll.hpp"
#include "sing/rng.hpp"
#include "sing/structure.hpp"

namespace sing {

enum class CombinerMode { kDense, kPerPitch };

struct ModelConfig {
  std::size_t hidden_size = 128;
  CombinerMode combiner = CombinerMode::kDense;
  std::size_t seed_len = 10;
  std::size_t top_k = 50;
  std::size_t max_notes = 3;
  std::size_t pitch_lo = 20;
  std::size_t pitch_hi = 107;
  bool attention = true;
  // Optional sparsemax on the LSTM head output; off unless requested.
  bool sparsemax_lstm_output = false;

  void validate() const;
};

struct AttentionResult {
  nn::Vec weights;  // t entries on the simplex
  nn::Vec vector;   // 128 entries
};

// Weights are sparsemax(S[t, 0..t)); the vector is the weighted sum of the
// history samples.
AttentionResult attention_step(const Tensor2& ssm, std::size_t t,
                               std::span<const nn::Vec> history);

class Model {
 public:
  // Parameters drawn uniformly in +-1/sqrt(fan_in), biases zero, forget
  // gate bias one.
  Model(const ModelConfig& config, std::uint64_t init_seed);
  static Model zeros(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  nn::LstmWeights lstm_weights() const;
  nn::LstmGrads lstm_grads();

  // z = W_out h + b_out (128 entries); through sparsemax when configured.
  nn::Vec head(std::span<const double> h, nn::Vec* pre = nullptr) const;
  void head_backward(std::span<const double> h, std::span<const double> pre,
                     std::span<const double> z, std::span<const double> dz,
                     std::span<double> dh);

  // dense: d = W_c [a; z] + b_c.  per_pitch: d_j = w_a a_j + w_z z_j + b.
  nn::Vec combine(std::span<const double> a, std::span<const double> z) const;
  void combine_backward(std::span<const double> a, std::span<const double> z,
                        std::span<const double> dd, std::span<double> da,
                        std::span<double> dz);

  std::size_t hidden() const { return config_.hidden_size; }

 private:
  explicit Model(const ModelConfig& config);

  ModelConfig config_;
  nn::ParamSet params_;
  std::size_t w_ih_ = 0, w_hh_ = 0, lstm_b_ = 0;
  std::size_t head_w_ = 0, head_b_ = 0;
  std::size_t comb_w_ = 0, comb_b_ = 0;
};

struct RecurrentState {
  nn::Vec h;
  nn::Vec c;
};

// One generated position: z from the LSTM fed y_{t-1}, a from attention
// over the history, d the combined logits for position t.
struct StepRecord {
  std::size_t position = 0;
  nn::Vec head_pre;
  nn::Vec z;
  nn::Vec attention_weights;
  nn::Vec attention;
  nn::Vec logits;
  nn::Vec prob;
  nn::Vec sampled;
  bool fed_back = false;
};

struct StepOutput {
  nn::LstmStep lstm;
  StepRecord record;
};

// Produces the logits for position t (t >= 1) from input = y_{t-1}.
// history holds y_0..y_{t-1}; ssm may be null when attention is off.
StepOutput forward_step(const Model& model, std::span<const double> input, const Tensor2* ssm,
                        std::size_t t, std::span<const nn::Vec> history,
                        const RecurrentState& state);

// Constrained top-k sampling: pitches outside [pitch_lo, pitch_hi] are
// masked, the top_k remaining by probability (ties to the lower pitch) are
// renormalized, and max_notes draws with replacement pick 1..max_notes
// distinct pitches.
nn::Vec sample_notes(std::span<const double> logits, const ModelConfig& config, Rng& rng);

// Full pass over one sequence. inputs[t] is the sample fed at position t;
// lstm[t-1] is the cell step that consumed inputs[t-1]; steps cover
// positions seed_len..n-1.
struct ForwardTrace {
  std::size_t seed_len = 0;
  std::vector<nn::Vec> inputs;
  std::vector<nn::LstmStep> lstm;
  std::vector<StepRecord> steps;
};

enum class Feedback { kAlways, kScheduled };

// kAlways: every generated position is fed back (generation).
// kScheduled: after sampling, a Bernoulli(p_feedback) draw decides between
// the sample and reference[t].
ForwardTrace run_sequence(const Model& model, const PianoRoll& reference, const Tensor2* ssm,
                          std::size_t n, Feedback feedback, double p_feedback, Rng& rng);

// Chooses the next input: the sampled output with probability p_feedback,
// otherwise the reference sample.
const nn::Vec& scheduled_input(const nn::Vec& sampled, const nn::Vec& reference,
                               double p_feedback, Rng& rng, bool* fed_back);

// Backpropagates dL/dd for every record in trace.steps (same order) into
// the model's gradient accumulators. Inputs are constants.
void backpropagate(Model& model, const ForwardTrace& trace, std::span<const nn::Vec> d_logits);

// Copies the seed, then samples positions seed_len..n-1 with n = template
// size.
PianoRoll generate(const Model& model, const PianoRoll& seed, const SelfSimilarityMatrix& tmpl,
                   Rng& rng);

nn::Vec sample_vector(const PianoRoll& roll, std::size_t s);

}  // namespace sing
