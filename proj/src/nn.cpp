#include "sing/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sing/error.hpp"

namespace sing::nn {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::kShape, what);
}

}  // namespace

void dense_forward(const Tensor2& w, std::span<const double> b, std::span<const double> x,
                   std::span<double> y) {
  require(w.cols == x.size(), "dense: input size does not match weight columns");
  require(w.rows == y.size() && b.size() == y.size(), "dense: output size mismatch");
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = w.data.data() + r * w.cols;
    double acc = b[r];
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void dense_backward(const Tensor2& w, std::span<const double> x, std::span<const double> dy,
                    Tensor2& dw, std::span<double> db, std::span<double> dx) {
  require(w.cols == x.size() && w.rows == dy.size(), "dense backward: shape mismatch");
  require(dw.same_shape(w) && db.size() == w.rows, "dense backward: gradient shape mismatch");
  require(dx.empty() || dx.size() == w.cols, "dense backward: dx size mismatch");
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    db[r] += g;
    double* grow = dw.data.data() + r * w.cols;
    for (std::size_t c = 0; c < w.cols; ++c) grow[c] += g * x[c];
    if (!dx.empty()) {
      const double* row = w.data.data() + r * w.cols;
      for (std::size_t c = 0; c < w.cols; ++c) dx[c] += row[c] * g;
    }
  }
}

LstmStep lstm_cell(const LstmWeights& w, std::span<const double> x,
                   std::span<const double> h_prev, std::span<const double> c_prev) {
  const std::size_t hidden = w.w_hh.cols;
  require(w.w_ih.rows == 4 * hidden && w.w_hh.rows == 4 * hidden && w.bias.rows == 4 * hidden,
          "lstm: gate rows must be 4 * hidden");
  require(w.w_ih.cols == x.size(), "lstm: input size mismatch");
  require(h_prev.size() == hidden && c_prev.size() == hidden, "lstm: state size mismatch");

  Vec pre(4 * hidden);
  for (std::size_t r = 0; r < 4 * hidden; ++r) {
    double acc = w.bias.data[r];
    const double* wi = w.w_ih.data.data() + r * x.size();
    for (std::size_t c = 0; c < x.size(); ++c) {
      if (x[c] != 0.0) acc += wi[c] * x[c];
    }
    const double* wh = w.w_hh.data.data() + r * hidden;
    for (std::size_t c = 0; c < hidden; ++c) acc += wh[c] * h_prev[c];
    pre[r] = acc;
  }

  LstmStep s;
  s.x.assign(x.begin(), x.end());
  s.h_prev.assign(h_prev.begin(), h_prev.end());
  s.c_prev.assign(c_prev.begin(), c_prev.end());
  s.i.resize(hidden);
  s.f.resize(hidden);
  s.g.resize(hidden);
  s.o.resize(hidden);
  s.c.resize(hidden);
  s.tanh_c.resize(hidden);
  s.h.resize(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    s.i[k] = sigmoid(pre[k]);
    s.f[k] = sigmoid(pre[hidden + k]);
    s.g[k] = std::tanh(pre[2 * hidden + k]);
    s.o[k] = sigmoid(pre[3 * hidden + k]);
    s.c[k] = s.f[k] * c_prev[k] + s.i[k] * s.g[k];
    s.tanh_c[k] = std::tanh(s.c[k]);
    s.h[k] = s.o[k] * s.tanh_c[k];
  }
  return s;
}

void lstm_cell_backward(const LstmWeights& w, const LstmStep& s, std::span<const double> dh,
                        std::span<const double> dc, const LstmGrads& grads,
                        std::span<double> dh_prev, std::span<double> dc_prev,
                        std::span<double> dx) {
  const std::size_t hidden = s.h.size();
  const std::size_t in = s.x.size();
  require(dh.size() == hidden && dc.size() == hidden, "lstm backward: upstream size mismatch");
  require(dh_prev.size() == hidden && dc_prev.size() == hidden,
          "lstm backward: state gradient size mismatch");

  Vec dpre(4 * hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    const double dcell = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
    const double d_o = dh[k] * s.tanh_c[k];
    const double d_i = dcell * s.g[k];
    const double d_f = dcell * s.c_prev[k];
    const double d_g = dcell * s.i[k];
    dpre[k] = d_i * s.i[k] * (1.0 - s.i[k]);
    dpre[hidden + k] = d_f * s.f[k] * (1.0 - s.f[k]);
    dpre[2 * hidden + k] = d_g * (1.0 - s.g[k] * s.g[k]);
    dpre[3 * hidden + k] = d_o * s.o[k] * (1.0 - s.o[k]);
    dc_prev[k] = dcell * s.f[k];
  }

  std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
  if (!dx.empty()) {
    require(dx.size() == in, "lstm backward: dx size mismatch");
    std::fill(dx.begin(), dx.end(), 0.0);
  }
  for (std::size_t r = 0; r < 4 * hidden; ++r) {
    const double g = dpre[r];
    if (g == 0.0) continue;
    grads.bias.data[r] += g;
    double* gi = grads.w_ih.data.data() + r * in;
    for (std::size_t c = 0; c < in; ++c) {
      if (s.x[c] != 0.0) gi[c] += g * s.x[c];
    }
    double* gh = grads.w_hh.data.data() + r * hidden;
    const double* wh = w.w_hh.data.data() + r * hidden;
    for (std::size_t c = 0; c < hidden; ++c) {
      gh[c] += g * s.h_prev[c];
      dh_prev[c] += wh[c] * g;
    }
    if (!dx.empty()) {
      const double* wi = w.w_ih.data.data() + r * in;
      for (std::size_t c = 0; c < in; ++c) dx[c] += wi[c] * g;
    }
  }
}

Vec sparsemax(std::span<const double> q) {
  if (q.empty()) throw Error(ErrorKind::kInvalidArgument, "sparsemax of an empty vector");
  Vec sorted(q.begin(), q.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double support_sum = 0.0;
  std::size_t support = 0;
  for (std::size_t k = 1; k <= sorted.size(); ++k) {
    cumulative += sorted[k - 1];
    if (1.0 + static_cast<double>(k) * sorted[k - 1] > cumulative) {
      support = k;
      support_sum = cumulative;
    }
  }
  const double tau = (support_sum - 1.0) / static_cast<double>(support);
  Vec p(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) p[i] = std::max(q[i] - tau, 0.0);
  return p;
}

Vec sparsemax_backward(std::span<const double> p, std::span<const double> dp) {
  require(p.size() == dp.size(), "sparsemax backward: size mismatch");
  double sum = 0.0;
  std::size_t support = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      sum += dp[i];
      ++support;
    }
  }
  const double mean = support ? sum / static_cast<double>(support) : 0.0;
  Vec dq(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) dq[i] = dp[i] - mean;
  }
  return dq;
}

double bce_with_logits(std::span<const double> x, std::span<const double> y,
                       std::span<double> grad) {
  require(x.size() == y.size(), "bce: size mismatch");
  require(grad.empty() || grad.size() == x.size(), "bce: gradient size mismatch");
  double loss = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    // -(y log s(x) + (1-y) log(1-s(x))) = max(x,0) - x y + log(1 + e^-|x|)
    loss += std::max(x[j], 0.0) - x[j] * y[j] + std::log1p(std::exp(-std::abs(x[j])));
    if (!grad.empty()) grad[j] = sigmoid(x[j]) - y[j];
  }
  return loss;
}

std::size_t ParamSet::add(std::string name, std::size_t rows, std::size_t cols) {
  if (contains(name)) throw Error(ErrorKind::kInvalidArgument, "duplicate parameter " + name);
  params_.push_back({std::move(name), Tensor2(rows, cols), Tensor2(rows, cols),
                     Tensor2(rows, cols), Tensor2(rows, cols)});
  return params_.size() - 1;
}

std::size_t ParamSet::index(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw Error(ErrorKind::kInvalidArgument, "no parameter named " + std::string(name));
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Param& p) { return p.name == name; });
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

void ParamSet::accumulate_grad(const ParamSet& other) {
  require(other.params_.size() == params_.size(), "accumulate_grad: layout mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& dst = params_[i].grad.data;
    const auto& src = other.params_[i].grad.data;
    require(dst.size() == src.size(), "accumulate_grad: shape mismatch");
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

void init_uniform_fan_in(Tensor2& w, Rng& rng) {
  const double bound = w.cols ? 1.0 / std::sqrt(static_cast<double>(w.cols)) : 0.0;
  for (auto& v : w.data) v = (2.0 * rng.uniform() - 1.0) * bound;
}

void adam_step(ParamSet& params, const AdamOptions& options) {
  params.set_step(params.step() + 1);
  const double t = static_cast<double>(params.step());
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (auto& p : params) {
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad.data[k];
      double& m = p.m.data[k];
      double& v = p.v.data[k];
      m = options.beta1 * m + (1.0 - options.beta1) * g;
      v = options.beta2 * v + (1.0 - options.beta2) * g * g;
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      p.value.data[k] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
  params.zero_grad();
}

}  // namespace sing::nn
