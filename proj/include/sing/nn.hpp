#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sing/rng.hpp"
#include "sing/tensor.hpp"

namespace sing::nn {

using Vec = std::vector<double>;

inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// y = W x + b
void dense_forward(const Tensor2& w, std::span<const double> b, std::span<const double> x,
                   std::span<double> y);

// Accumulates dW += dy x^T and db += dy. Writes dx = W^T dy when dx is
// non-empty.
void dense_backward(const Tensor2& w, std::span<const double> x, std::span<const double> dy,
                    Tensor2& dw, std::span<double> db, std::span<double> dx);

// Gate rows are stacked [input; forget; candidate; output], 4H in total.
struct LstmWeights {
  const Tensor2& w_ih;  // 4H x I
  const Tensor2& w_hh;  // 4H x H
  const Tensor2& bias;  // 4H x 1
};

struct LstmGrads {
  Tensor2& w_ih;
  Tensor2& w_hh;
  Tensor2& bias;
};

// Everything one step needs for backpropagation.
struct LstmStep {
  Vec x, h_prev, c_prev;
  Vec i, f, g, o;
  Vec c, tanh_c, h;
};

LstmStep lstm_cell(const LstmWeights& w, std::span<const double> x,
                   std::span<const double> h_prev, std::span<const double> c_prev);

// Given dL/dh and dL/dc at the step output, accumulates parameter
// gradients and writes dL/dh_prev, dL/dc_prev (and dL/dx if non-empty).
void lstm_cell_backward(const LstmWeights& w, const LstmStep& step, std::span<const double> dh,
                        std::span<const double> dc, const LstmGrads& grads,
                        std::span<double> dh_prev, std::span<double> dc_prev,
                        std::span<double> dx);

// Euclidean projection onto the probability simplex (sort and threshold).
Vec sparsemax(std::span<const double> q);

// Vector-Jacobian product at output p: dq_i = [p_i > 0](dp_i - mean over
// the support of dp).
Vec sparsemax_backward(std::span<const double> p, std::span<const double> dp);

// Positive multi-label binary cross-entropy summed over entries, computed
// from logits. grad (if non-empty) receives sigmoid(x) - y.
double bce_with_logits(std::span<const double> x, std::span<const double> y,
                       std::span<double> grad = {});

// Named trainable tensors with their gradient accumulators and Adam moments.
class ParamSet {
 public:
  struct Param {
    std::string name;
    Tensor2 value;
    Tensor2 grad;
    Tensor2 m;
    Tensor2 v;
  };

  std::size_t add(std::string name, std::size_t rows, std::size_t cols);
  std::size_t index(std::string_view name) const;
  bool contains(std::string_view name) const;

  Param& at(std::size_t i) { return params_[i]; }
  const Param& at(std::size_t i) const { return params_[i]; }
  Tensor2& value(std::size_t i) { return params_[i].value; }
  const Tensor2& value(std::size_t i) const { return params_[i].value; }
  Tensor2& grad(std::size_t i) { return params_[i].grad; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  void zero_grad();
  // Elementwise dst.grad += src.grad for identically laid out sets.
  void accumulate_grad(const ParamSet& other);

  std::vector<Param>::iterator begin() { return params_.begin(); }
  std::vector<Param>::iterator end() { return params_.end(); }
  std::vector<Param>::const_iterator begin() const { return params_.begin(); }
  std::vector<Param>::const_iterator end() const { return params_.end(); }

 private:
  std::vector<Param> params_;
  std::uint64_t step_ = 0;
};

// Uniform in [-1/sqrt(cols), 1/sqrt(cols)].
void init_uniform_fan_in(Tensor2& w, Rng& rng);

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update; clears the gradients afterwards.
void adam_step(ParamSet& params, const AdamOptions& options);

}  // namespace sing::nn
