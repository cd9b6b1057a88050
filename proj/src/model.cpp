#include "sing/model.hpp"

#include <algorithm>
#include <numeric>

#include "sing/error.hpp"

namespace sing {

void ModelConfig::validate() const {
  if (hidden_size == 0) throw Error(ErrorKind::kInvalidArgument, "hidden_size must be positive");
  if (pitch_lo > pitch_hi || pitch_hi >= kPitches) {
    throw Error(ErrorKind::kInvalidArgument, "need 0 <= pitch_lo <= pitch_hi <= 127");
  }
  if (max_notes < 1 || max_notes > top_k) {
    throw Error(ErrorKind::kInvalidArgument, "need 1 <= max_notes <= top_k");
  }
  if (seed_len < 1) throw Error(ErrorKind::kInvalidArgument, "seed_len must be at least 1");
}

AttentionResult attention_step(const Tensor2& ssm, std::size_t t,
                               std::span<const nn::Vec> history) {
  if (t == 0) throw Error(ErrorKind::kInvalidArgument, "attention needs at least one previous sample");
  if (t >= ssm.rows || ssm.cols < t) {
    throw Error(ErrorKind::kShape, "SSM of size " + std::to_string(ssm.rows) +
                                       " has no row " + std::to_string(t));
  }
  if (history.size() < t) throw Error(ErrorKind::kShape, "attention history shorter than t");
  AttentionResult out;
  out.weights = nn::sparsemax(ssm.row(t).first(t));
  out.vector.assign(kPitches, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    const double w = out.weights[i];
    if (w == 0.0) continue;
    const auto& y = history[i];
    for (std::size_t p = 0; p < kPitches; ++p) out.vector[p] += w * y[p];
  }
  return out;
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t h = config_.hidden_size;
  w_ih_ = params_.add("lstm.w_ih", 4 * h, kPitches);
  w_hh_ = params_.add("lstm.w_hh", 4 * h, h);
  lstm_b_ = params_.add("lstm.bias", 4 * h, 1);
  head_w_ = params_.add("head.weight", kPitches, h);
  head_b_ = params_.add("head.bias", kPitches, 1);
  if (config_.attention) {
    if (config_.combiner == CombinerMode::kDense) {
      comb_w_ = params_.add("combiner.weight", kPitches, 2 * kPitches);
      comb_b_ = params_.add("combiner.bias", kPitches, 1);
    } else {
      comb_w_ = params_.add("combiner.weight", 1, 2);
      comb_b_ = params_.add("combiner.bias", 1, 1);
    }
  }
}

Model Model::zeros(const ModelConfig& config) { return Model(config); }

Model::Model(const ModelConfig& config, std::uint64_t init_seed) : Model(config) {
  Rng rng(init_seed);
  nn::init_uniform_fan_in(params_.value(w_ih_), rng);
  nn::init_uniform_fan_in(params_.value(w_hh_), rng);
  nn::init_uniform_fan_in(params_.value(head_w_), rng);
  if (config_.attention) nn::init_uniform_fan_in(params_.value(comb_w_), rng);
  auto& bias = params_.value(lstm_b_);
  for (std::size_t k = 0; k < config_.hidden_size; ++k) bias.data[config_.hidden_size + k] = 1.0;
}

nn::LstmWeights Model::lstm_weights() const {
  return {params_.value(w_ih_), params_.value(w_hh_), params_.value(lstm_b_)};
}

nn::LstmGrads Model::lstm_grads() {
  return {params_.grad(w_ih_), params_.grad(w_hh_), params_.grad(lstm_b_)};
}

nn::Vec Model::head(std::span<const double> h, nn::Vec* pre) const {
  nn::Vec out(kPitches);
  nn::dense_forward(params_.value(head_w_), params_.value(head_b_).data, h, out);
  if (!config_.sparsemax_lstm_output) return out;
  if (pre != nullptr) *pre = out;
  return nn::sparsemax(out);
}

void Model::head_backward(std::span<const double> h, std::span<const double> /*pre*/,
                          std::span<const double> z, std::span<const double> dz,
                          std::span<double> dh) {
  nn::Vec through;
  std::span<const double> upstream = dz;
  if (config_.sparsemax_lstm_output) {
    through = nn::sparsemax_backward(z, dz);
    upstream = through;
  }
  nn::dense_backward(params_.value(head_w_), h, upstream, params_.grad(head_w_),
                     params_.grad(head_b_).data, dh);
}

nn::Vec Model::combine(std::span<const double> a, std::span<const double> z) const {
  if (!config_.attention) throw Error(ErrorKind::kInvalidArgument, "model has no combiner");
  if (a.size() != kPitches || z.size() != kPitches) {
    throw Error(ErrorKind::kShape, "combiner inputs must have 128 entries");
  }
  nn::Vec d(kPitches);
  const auto& w = params_.value(comb_w_);
  const auto& b = params_.value(comb_b_);
  if (config_.combiner == CombinerMode::kDense) {
    nn::Vec joined(2 * kPitches);
    std::copy(a.begin(), a.end(), joined.begin());
    std::copy(z.begin(), z.end(), joined.begin() + kPitches);
    nn::dense_forward(w, b.data, joined, d);
  } else {
    for (std::size_t j = 0; j < kPitches; ++j) d[j] = w.data[0] * a[j] + w.data[1] * z[j] + b.data[0];
  }
  return d;
}

void Model::combine_backward(std::span<const double> a, std::span<const double> z,
                             std::span<const double> dd, std::span<double> da,
                             std::span<double> dz) {
  const auto& w = params_.value(comb_w_);
  auto& gw = params_.grad(comb_w_);
  auto& gb = params_.grad(comb_b_);
  if (config_.combiner == CombinerMode::kDense) {
    nn::Vec joined(2 * kPitches);
    std::copy(a.begin(), a.end(), joined.begin());
    std::copy(z.begin(), z.end(), joined.begin() + kPitches);
    nn::Vec djoined(2 * kPitches);
    nn::dense_backward(w, joined, dd, gw, gb.data, djoined);
    if (!da.empty()) std::copy_n(djoined.begin(), kPitches, da.begin());
    if (!dz.empty()) std::copy_n(djoined.begin() + kPitches, kPitches, dz.begin());
  } else {
    for (std::size_t j = 0; j < kPitches; ++j) {
      gw.data[0] += dd[j] * a[j];
      gw.data[1] += dd[j] * z[j];
      gb.data[0] += dd[j];
      if (!da.empty()) da[j] = dd[j] * w.data[0];
      if (!dz.empty()) dz[j] = dd[j] * w.data[1];
    }
  }
}

StepOutput forward_step(const Model& model, std::span<const double> input, const Tensor2* ssm,
                        std::size_t t, std::span<const nn::Vec> history,
                        const RecurrentState& state) {
  StepOutput out;
  out.lstm = nn::lstm_cell(model.lstm_weights(), input, state.h, state.c);
  auto& rec = out.record;
  rec.position = t;
  rec.z = model.head(out.lstm.h, &rec.head_pre);
  if (model.config().attention && t >= 1) {
    if (ssm == nullptr) throw Error(ErrorKind::kInvalidArgument, "attention model needs an SSM");
    auto att = attention_step(*ssm, t, history);
    rec.attention_weights = std::move(att.weights);
    rec.attention = std::move(att.vector);
    rec.logits = model.combine(rec.attention, rec.z);
  } else {
    rec.logits = rec.z;
  }
  rec.prob.resize(kPitches);
  for (std::size_t j = 0; j < kPitches; ++j) rec.prob[j] = nn::sigmoid(rec.logits[j]);
  return out;
}

nn::Vec sample_notes(std::span<const double> logits, const ModelConfig& config, Rng& rng) {
  if (logits.size() != kPitches) throw Error(ErrorKind::kShape, "sampler needs 128 logits");
  std::vector<std::size_t> allowed(config.pitch_hi - config.pitch_lo + 1);
  std::iota(allowed.begin(), allowed.end(), config.pitch_lo);
  const std::size_t k = std::min(config.top_k, allowed.size());
  std::partial_sort(allowed.begin(), allowed.begin() + static_cast<std::ptrdiff_t>(k), allowed.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (logits[a] != logits[b]) return logits[a] > logits[b];
                      return a < b;
                    });
  allowed.resize(k);

  std::vector<double> mass(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mass[i] = nn::sigmoid(logits[allowed[i]]);
    total += mass[i];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(mass.begin(), mass.end(), 1.0);
    total = static_cast<double>(k);
  }

  nn::Vec out(kPitches, 0.0);
  for (std::size_t draw = 0; draw < config.max_notes; ++draw) {
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = k - 1;
    for (std::size_t i = 0; i < k; ++i) {
      acc += mass[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out[allowed[pick]] = 1.0;
  }
  return out;
}

nn::Vec sample_vector(const PianoRoll& roll, std::size_t s) {
  const auto row = roll.sample(s);
  return nn::Vec(row.begin(), row.end());
}

const nn::Vec& scheduled_input(const nn::Vec& sampled, const nn::Vec& reference,
                               double p_feedback, Rng& rng, bool* fed_back) {
  const bool use_sampled = rng.bernoulli(p_feedback);
  if (fed_back != nullptr) *fed_back = use_sampled;
  return use_sampled ? sampled : reference;
}

ForwardTrace run_sequence(const Model& model, const PianoRoll& reference, const Tensor2* ssm,
                          std::size_t n, Feedback feedback, double p_feedback, Rng& rng) {
  const auto& cfg = model.config();
  if (n <= cfg.seed_len) {
    throw Error(ErrorKind::kInvalidArgument, "sequence length " + std::to_string(n) +
                                                 " must exceed seed length " +
                                                 std::to_string(cfg.seed_len));
  }
  const std::size_t known = feedback == Feedback::kAlways ? cfg.seed_len : n;
  if (reference.samples() < known) {
    throw Error(ErrorKind::kShape, "reference roll has " + std::to_string(reference.samples()) +
                                       " samples, need " + std::to_string(known));
  }
  if (cfg.attention) {
    if (ssm == nullptr) throw Error(ErrorKind::kInvalidArgument, "attention model needs an SSM");
    if (ssm->rows < n || ssm->cols < n) {
      throw Error(ErrorKind::kShape, "SSM of size " + std::to_string(ssm->rows) +
                                         " is smaller than sequence length " + std::to_string(n));
    }
  }

  ForwardTrace trace;
  trace.seed_len = cfg.seed_len;
  trace.inputs.reserve(n);
  trace.lstm.reserve(n - 1);
  trace.steps.reserve(n - cfg.seed_len);
  for (std::size_t t = 0; t < cfg.seed_len; ++t) trace.inputs.push_back(sample_vector(reference, t));

  RecurrentState state{nn::Vec(cfg.hidden_size, 0.0), nn::Vec(cfg.hidden_size, 0.0)};
  const auto weights = model.lstm_weights();
  for (std::size_t t = 1; t < cfg.seed_len; ++t) {
    trace.lstm.push_back(nn::lstm_cell(weights, trace.inputs[t - 1], state.h, state.c));
    state = {trace.lstm.back().h, trace.lstm.back().c};
  }
  for (std::size_t t = cfg.seed_len; t < n; ++t) {
    StepOutput out = forward_step(model, trace.inputs[t - 1], ssm, t, trace.inputs, state);
    state = {out.lstm.h, out.lstm.c};
    trace.lstm.push_back(std::move(out.lstm));
    auto& rec = out.record;
    rec.sampled = sample_notes(rec.logits, cfg, rng);
    if (feedback == Feedback::kAlways) {
      rec.fed_back = true;
      trace.inputs.push_back(rec.sampled);
    } else {
      const nn::Vec target = sample_vector(reference, t);
      trace.inputs.push_back(scheduled_input(rec.sampled, target, p_feedback, rng, &rec.fed_back));
    }
    trace.steps.push_back(std::move(rec));
  }
  return trace;
}

void backpropagate(Model& model, const ForwardTrace& trace, std::span<const nn::Vec> d_logits) {
  if (d_logits.size() != trace.steps.size()) {
    throw Error(ErrorKind::kShape, "one logit gradient per generated step required");
  }
  const std::size_t hidden = model.hidden();
  const std::size_t n_cells = trace.lstm.size();
  // dh contributed by the head at each cell index.
  std::vector<nn::Vec> dh_head(n_cells);
  nn::Vec dz(kPitches);
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const auto& rec = trace.steps[s];
    const std::size_t cell = rec.position - 1;
    if (model.config().attention && rec.position >= 1) {
      model.combine_backward(rec.attention, rec.z, d_logits[s], {}, dz);
    } else {
      std::copy(d_logits[s].begin(), d_logits[s].end(), dz.begin());
    }
    dh_head[cell].assign(hidden, 0.0);
    model.head_backward(trace.lstm[cell].h, rec.head_pre, rec.z, dz, dh_head[cell]);
  }

  const auto weights = model.lstm_weights();
  const auto grads = model.lstm_grads();
  nn::Vec dh(hidden, 0.0), dc(hidden, 0.0), dh_prev(hidden), dc_prev(hidden);
  for (std::size_t cell = n_cells; cell-- > 0;) {
    if (!dh_head[cell].empty()) {
      for (std::size_t k = 0; k < hidden; ++k) dh[k] += dh_head[cell][k];
    }
    nn::lstm_cell_backward(weights, trace.lstm[cell], dh, dc, grads, dh_prev, dc_prev, {});
    std::swap(dh, dh_prev);
    std::swap(dc, dc_prev);
  }
}

PianoRoll generate(const Model& model, const PianoRoll& seed, const SelfSimilarityMatrix& tmpl,
                   Rng& rng) {
  const auto& cfg = model.config();
  const std::size_t n = tmpl.size();
  if (n <= cfg.seed_len) {
    throw Error(ErrorKind::kInvalidArgument, "template length " + std::to_string(n) +
                                                 " must exceed seed length " +
                                                 std::to_string(cfg.seed_len));
  }
  const ForwardTrace trace =
      run_sequence(model, seed, &tmpl.values, n, Feedback::kAlways, 1.0, rng);
  PianoRoll out(n, seed.tempo(), seed.source_id());
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t p = 0; p < kPitches; ++p) out.set(p, t, trace.inputs[t][p] != 0.0);
  }
  return out;
}

}  // namespace sing
