#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sing/error.hpp"
#include "sing/nn.hpp"

using namespace sing;
using namespace sing::nn;

namespace {

Vec random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  Vec v(n);
  for (double& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

void fill(Tensor2& t, Rng& rng, double scale = 0.5) {
  for (double& x : t.data) x = scale * (2.0 * rng.uniform() - 1.0);
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

TEST_CASE("dense layer forward identities") {
  Tensor2 eye(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
  Vec x = {0.5, -2.0, 3.0}, zero(3, 0.0), y(3);
  dense_forward(eye, zero, x, y);
  CHECK(y == x);

  Tensor2 w0(2, 3);
  Vec c = {1.5, -0.25}, y2(2);
  dense_forward(w0, c, x, y2);
  CHECK(y2 == c);

  Vec bad(2);
  CHECK_THROWS_AS(dense_forward(eye, zero, bad, y), Error);
}

TEST_CASE("dense layer gradients match finite differences") {
  Rng rng(1);
  Tensor2 w(4, 5);
  fill(w, rng);
  Vec b = random_vec(rng, 4), x = random_vec(rng, 5), r = random_vec(rng, 4);
  auto loss = [&] {
    Vec y(4);
    dense_forward(w, b, x, y);
    return dot(y, r);
  };
  Tensor2 dw(4, 5);
  Vec db(4, 0.0), dx(5, 0.0);
  dense_backward(w, x, r, dw, db, dx);
  CHECK(oracle::max_gradient_error(w.data, dw.data, loss) < 1e-4);
  CHECK(oracle::max_gradient_error(b, db, loss) < 1e-4);
  CHECK(oracle::max_gradient_error(x, dx, loss) < 1e-4);
}

TEST_CASE("LSTM cell with zero parameters and state stays at zero") {
  Tensor2 w_ih(8, 3), w_hh(8, 2), bias(8, 1);
  LstmWeights w{w_ih, w_hh, bias};
  Vec x(3, 0.0), h(2, 0.0), c(2, 0.0);
  const LstmStep s = lstm_cell(w, x, h, c);
  for (double v : s.h) CHECK(v == 0.0);
  for (double v : s.c) CHECK(v == 0.0);
  Vec wrong(4, 0.0);
  CHECK_THROWS_AS(lstm_cell(w, x, wrong, c), Error);
}

TEST_CASE("LSTM gradients over several steps match finite differences") {
  Rng rng(2);
  const std::size_t in = 6, hid = 4, steps = 4;
  Tensor2 w_ih(4 * hid, in), w_hh(4 * hid, hid), bias(4 * hid, 1);
  fill(w_ih, rng);
  fill(w_hh, rng);
  fill(bias, rng, 0.2);
  std::vector<Vec> xs;
  for (std::size_t t = 0; t < steps; ++t) xs.push_back(random_vec(rng, in));
  Vec h0 = random_vec(rng, hid, 0.3), c0 = random_vec(rng, hid, 0.3);
  const Vec rh = random_vec(rng, hid), rc = random_vec(rng, hid);

  auto run = [&](std::vector<LstmStep>* cache) {
    LstmWeights w{w_ih, w_hh, bias};
    Vec h = h0, c = c0;
    double loss = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      LstmStep s = lstm_cell(w, xs[t], h, c);
      h = s.h;
      c = s.c;
      loss += dot(h, rh);
      if (cache) cache->push_back(std::move(s));
    }
    return loss + dot(c, rc);
  };
  auto loss = [&] { return run(nullptr); };

  std::vector<LstmStep> cache;
  run(&cache);
  Tensor2 g_ih(4 * hid, in), g_hh(4 * hid, hid), g_b(4 * hid, 1);
  LstmGrads grads{g_ih, g_hh, g_b};
  LstmWeights w{w_ih, w_hh, bias};
  Vec dh = rh, dc = rc;
  std::vector<Vec> dxs(steps, Vec(in, 0.0));
  Vec dh_prev(hid), dc_prev(hid);
  for (std::size_t t = steps; t-- > 0;) {
    lstm_cell_backward(w, cache[t], dh, dc, grads, dh_prev, dc_prev, dxs[t]);
    dh = dh_prev;
    dc = dc_prev;
    for (std::size_t j = 0; j < hid; ++j) dh[j] += t > 0 ? rh[j] : 0.0;
  }
  CHECK(oracle::max_gradient_error(w_ih.data, g_ih.data, loss) < 1e-4);
  CHECK(oracle::max_gradient_error(w_hh.data, g_hh.data, loss) < 1e-4);
  CHECK(oracle::max_gradient_error(bias.data, g_b.data, loss) < 1e-4);
  CHECK(oracle::max_gradient_error(h0, dh_prev, loss) < 1e-4);
  CHECK(oracle::max_gradient_error(c0, dc_prev, loss) < 1e-4);
  for (std::size_t t = 0; t < steps; ++t)
    CHECK(oracle::max_gradient_error(xs[t], dxs[t], loss) < 1e-4);
}

TEST_CASE("sparsemax examples") {
  auto close = [](const Vec& a, const Vec& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  };
  close(sparsemax(Vec{1.0, 0.0}), {1.0, 0.0});
  close(sparsemax(Vec{0.3, 0.3, 0.3}), {1.0 / 3, 1.0 / 3, 1.0 / 3});
  close(sparsemax(Vec{0.9, 0.1}), {0.9, 0.1});
  close(sparsemax(Vec{2.0, 0.0}), {1.0, 0.0});
  close(sparsemax(Vec{5.0}), {1.0});
  CHECK_THROWS_AS(sparsemax(Vec{}), Error);
}

TEST_CASE("sparsemax equals the exhaustive simplex projection") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 1 + rng.index(12);
    const Vec q = random_vec(rng, k, 0.5 + 3.0 * rng.uniform());
    const Vec p = sparsemax(q);
    const Vec ref = oracle::simplex_projection(q);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(p[i] >= 0.0);
      CHECK(std::abs(p[i] - ref[i]) <= 1e-9);
      sum += p[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);

    const double shift = 10.0 * (2.0 * rng.uniform() - 1.0);
    Vec shifted = q;
    for (double& v : shifted) v += shift;
    const Vec ps = sparsemax(shifted);
    for (std::size_t i = 0; i < k; ++i) CHECK(std::abs(ps[i] - p[i]) <= 1e-9);
  }
}

TEST_CASE("sparsemax backward matches finite differences away from support changes") {
  Rng rng(4);
  int checked = 0;
  while (checked < 50) {
    const std::size_t k = 2 + rng.index(10);
    Vec q = random_vec(rng, k, 2.0);
    const Vec p = sparsemax(q);
    // Skip inputs within reach of a kink: a coordinate almost entering or leaving the support.
    double tau = 0.0;
    std::size_t support = 0;
    for (std::size_t i = 0; i < k; ++i)
      if (p[i] > 0) {
        tau += q[i] - p[i];
        ++support;
      }
    tau /= static_cast<double>(support);
    bool near_kink = false;
    for (double v : q) near_kink |= std::abs(v - tau) < 1e-3;
    if (near_kink) continue;
    const Vec r = random_vec(rng, k);
    auto loss = [&] { return dot(sparsemax(q), r); };
    const Vec dq = sparsemax_backward(p, r);
    CHECK(oracle::max_gradient_error(q, dq, loss) < 1e-4);
    ++checked;
  }
}

TEST_CASE("binary cross-entropy with logits") {
  Vec zeros(128, 0.0), y(128, 0.0);
  for (std::size_t i = 0; i < 128; i += 3) y[i] = 1.0;
  CHECK(bce_with_logits(zeros, y) == doctest::Approx(128.0 * std::log(2.0)));
  CHECK(bce_with_logits(zeros, y) == doctest::Approx(88.7228).epsilon(1e-6));

  Vec big(128, 40.0), ones(128, 1.0);
  CHECK(bce_with_logits(big, ones) < 1e-12);
  Vec huge(2, 800.0), mixed = {1.0, 0.0};
  const double l = bce_with_logits(huge, mixed);
  CHECK(std::isfinite(l));
  CHECK(l == doctest::Approx(800.0));

  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Vec x = random_vec(rng, 128, 6.0), t(128);
    for (double& v : t) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
    Vec grad(128);
    const double value = bce_with_logits(x, t, grad);
    CHECK(value >= 0.0);
    for (std::size_t i = 0; i < 128; ++i) {
      const double numeric = oracle::central_difference([&] { return bce_with_logits(x, t); }, x[i]);
      CHECK(std::abs(numeric - grad[i]) <= 1e-6);
      CHECK(grad[i] == doctest::Approx(sigmoid(x[i]) - t[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("Adam update") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParamSet ps;
    ps.add("p", 2, 2);
    ps.value(0).data = {1.0, -2.0, 3.0, 0.5};
    const Tensor2 before = ps.value(0);
    adam_step(ps, {});
    CHECK(ps.value(0) == before);
    CHECK(ps.step() == 1);
  }
  SUBCASE("first step moves by the learning rate") {
    ParamSet ps;
    ps.add("p", 1, 1);
    ps.grad(0)(0, 0) = 1.0;
    adam_step(ps, {});
    CHECK(ps.value(0)(0, 0) == doctest::Approx(-0.001).epsilon(1e-6));
    CHECK(ps.grad(0)(0, 0) == 0.0);
  }
  SUBCASE("converges on a quadratic within 2000 steps") {
    ParamSet ps;
    ps.add("p", 1, 1);
    ps.value(0)(0, 0) = 1.0;
    AdamOptions opts;
    opts.lr = 0.01;
    int steps = 0;
    while (std::abs(ps.value(0)(0, 0)) >= 0.01 && steps < 2000) {
      ps.grad(0)(0, 0) = 2.0 * ps.value(0)(0, 0);
      adam_step(ps, opts);
      ++steps;
    }
    CHECK(std::abs(ps.value(0)(0, 0)) < 0.01);
    CHECK(steps <= 2000);
  }
  SUBCASE("matches the update recurrence over 2000 steps") {
    ParamSet ps;
    ps.add("p", 1, 1);
    ps.value(0)(0, 0) = 1.0;
    double p = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2000; ++t) {
      ps.grad(0)(0, 0) = 2.0 * ps.value(0)(0, 0);
      adam_step(ps, {});
      const double g = 2.0 * p;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      p -= 0.001 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    }
    CHECK(ps.value(0)(0, 0) == doctest::Approx(p).epsilon(1e-12));
    CHECK(p == doctest::Approx(0.0206623).epsilon(1e-5));
  }
}

TEST_CASE("fan-in initialization stays in range") {
  Rng rng(6);
  Tensor2 w(50, 16);
  init_uniform_fan_in(w, rng);
  for (double v : w.data) CHECK(std::abs(v) <= 0.25);
  double spread = 0.0;
  for (double v : w.data) spread = std::max(spread, std::abs(v));
  CHECK(spread > 0.2);
}

TEST_CASE("parameter set bookkeeping") {
  ParamSet a;
  a.add("w", 2, 3);
  a.add("b", 2, 1);
  CHECK(a.scalar_count() == 8);
  CHECK(a.index("b") == 1);
  CHECK(a.contains("w"));
  CHECK_FALSE(a.contains("x"));
  CHECK_THROWS_AS(a.add("w", 1, 1), Error);
  ParamSet b = a;
  b.grad(0)(1, 2) = 2.5;
  a.accumulate_grad(b);
  a.accumulate_grad(b);
  CHECK(a.grad(0)(1, 2) == 5.0);
  a.zero_grad();
  CHECK(a.grad(0)(1, 2) == 0.0);
}
