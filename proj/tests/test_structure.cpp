#include <doctest.h>

#include <cmath>

#include "sing/error.hpp"
#include "sing/rng.hpp"
#include "sing/structure.hpp"

using namespace sing;

namespace {

PianoRoll roll_of(std::initializer_list<std::initializer_list<int>> samples) {
  PianoRoll r(samples.size(), 120.0);
  std::size_t s = 0;
  for (const auto& pitches : samples) {
    for (int p : pitches) r.set(static_cast<std::size_t>(p), s, true);
    ++s;
  }
  return r;
}

PianoRoll random_roll(Rng& rng, std::size_t n, double silent_prob = 0.1) {
  PianoRoll r(n, 120.0);
  for (std::size_t s = 0; s < n; ++s) {
    if (rng.bernoulli(silent_prob)) continue;
    const std::size_t k = 1 + rng.index(4);
    for (std::size_t j = 0; j < k; ++j) r.set(20 + rng.index(88), s, true);
  }
  return r;
}

Tensor2 random_symmetric(Rng& rng, std::size_t n) {
  Tensor2 m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = rng.uniform();
  return m;
}

double mean_of(const Tensor2& m) {
  double s = 0.0;
  for (double v : m.data) s += v;
  return s / static_cast<double>(m.size());
}

double pop_std(const Tensor2& m) {
  const double mu = mean_of(m);
  double s = 0.0;
  for (double v : m.data) s += (v - mu) * (v - mu);
  return std::sqrt(s / static_cast<double>(m.size()));
}

}  // namespace

TEST_CASE("chroma folds pitches into classes") {
  const ChromaSequence c = chroma(roll_of({{60, 72}, {}, {60, 64, 67}}));
  REQUIRE(c.rows == 12);
  REQUIRE(c.cols == 3);
  for (std::size_t k = 0; k < 12; ++k) {
    CHECK(c(k, 0) == (k == 0 ? 2.0 : 0.0));
    CHECK(c(k, 1) == 0.0);
    CHECK(c(k, 2) == ((k == 0 || k == 4 || k == 7) ? 1.0 : 0.0));
  }
}

TEST_CASE("chroma columns sum to the number of active pitches") {
  Rng rng(3);
  const PianoRoll r = random_roll(rng, 64);
  const ChromaSequence c = chroma(r);
  for (std::size_t s = 0; s < r.samples(); ++s) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 12; ++k) {
      CHECK(c(k, s) >= 0.0);
      sum += c(k, s);
    }
    CHECK(sum == static_cast<double>(r.active_count(s)));
  }
}

TEST_CASE("cosine similarity of chroma columns") {
  const auto s = ssm_of(roll_of({{60}, {60}, {64}, {60, 72}, {48, 52}, {}}));
  CHECK(s.values(0, 1) == doctest::Approx(1.0));
  CHECK(s.values(0, 2) == doctest::Approx(0.0));
  CHECK(s.values(3, 4) == doctest::Approx(2.0 / (2.0 * std::sqrt(2.0))).epsilon(1e-12));
  CHECK(s.values(3, 4) == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(s.values(5, 5) == 0.0);
  CHECK(s.values(5, 0) == 0.0);
}

TEST_CASE("SSM invariants on random rolls") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const PianoRoll r = random_roll(rng, 16 + rng.index(48));
    const auto s = ssm_of(r);
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = 0; j < s.size(); ++j) {
        CHECK(std::abs(s.values(i, j) - s.values(j, i)) <= 1e-9);
        CHECK(s.values(i, j) >= 0.0);
        CHECK(s.values(i, j) <= 1.0 + 1e-12);
      }
      if (r.active_count(i) > 0) CHECK(s.values(i, i) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("standardize") {
  Tensor2 constant(3, 3, 0.4);
  for (double v : standardize(constant).data) CHECK(v == 0.0);

  Tensor2 eye(2, 2);
  eye(0, 0) = eye(1, 1) = 1.0;
  const Tensor2 z = standardize(eye);
  CHECK(z(0, 0) == doctest::Approx(1.0));
  CHECK(z(0, 1) == doctest::Approx(-1.0));
  CHECK(z(1, 0) == doctest::Approx(-1.0));
  CHECK(z(1, 1) == doctest::Approx(1.0));

  Rng rng(9);
  const Tensor2 m = random_symmetric(rng, 40);
  const Tensor2 sm = standardize(m);
  CHECK(std::abs(mean_of(sm)) <= 1e-9);
  CHECK(std::abs(pop_std(sm) - 1.0) <= 1e-9);
  const Tensor2 twice = standardize(sm);
  for (std::size_t i = 0; i < sm.size(); ++i) CHECK(std::abs(twice.data[i] - sm.data[i]) <= 1e-9);
}

TEST_CASE("mean squared error") {
  Tensor2 zeros(4, 4, 0.0), ones(4, 4, 1.0);
  CHECK(mse(zeros, zeros) == 0.0);
  CHECK(mse(zeros, ones) == doctest::Approx(1.0));
  CHECK_THROWS_AS(mse(zeros, Tensor2(3, 3)), Error);

  Rng rng(13);
  const Tensor2 z = standardize(random_symmetric(rng, 30));
  Tensor2 neg = z;
  for (double& v : neg.data) v = -v;
  CHECK(mse(z, neg) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("standardized MSE properties") {
  Rng rng(17);
  SelfSimilarityMatrix a{random_symmetric(rng, 32), SsmRole::kTemplate};
  SelfSimilarityMatrix b{random_symmetric(rng, 32), SsmRole::kGenerated};
  CHECK(standardized_mse(a, a) == doctest::Approx(0.0));
  CHECK(standardized_mse(a, b) == doctest::Approx(standardized_mse(b, a)).epsilon(1e-12));

  SelfSimilarityMatrix affine = a;
  for (double& v : affine.values.data) v = 3.5 * v + 0.25;
  CHECK(std::abs(standardized_mse(a, affine)) <= 1e-12);
}

TEST_CASE("independent symmetric matrices sit near 2 at n = 256") {
  Rng rng(19);
  SelfSimilarityMatrix a{random_symmetric(rng, 256), SsmRole::kTemplate};
  SelfSimilarityMatrix b{random_symmetric(rng, 256), SsmRole::kGenerated};
  CHECK(std::abs(standardized_mse(a, b) - 2.0) <= 0.15);
}

TEST_CASE("synthetic SSM construction") {
  SUBCASE("no blocks") {
    const auto s = synth_ssm({4, {}, 0.0});
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(s.values(i, j) == (i == j ? 1.0 : 0.0));
  }
  SUBCASE("one block on a background") {
    const auto s = synth_ssm({4, {{0, 2, 0.8}}, 0.1});
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        double expect = 0.1;
        if (i < 2 && j < 2) expect = 0.8;
        if (i == j) expect = 1.0;
        CHECK(s.values(i, j) == doctest::Approx(expect));
      }
    }
  }
  SUBCASE("later blocks overwrite") {
    const auto s = synth_ssm({6, {{0, 4, 0.3}, {2, 6, 0.9}}, 0.0});
    CHECK(s.values(0, 1) == doctest::Approx(0.3));
    CHECK(s.values(2, 3) == doctest::Approx(0.9));
    CHECK(s.values(5, 4) == doctest::Approx(0.9));
  }
  SUBCASE("symmetric with unit diagonal") {
    Rng rng(23);
    for (int t = 0; t < 10; ++t) {
      SynthSpec spec{20, {}, rng.uniform()};
      for (int b = 0; b < 4; ++b) {
        const std::size_t start = rng.index(19);
        const std::size_t end = start + 1 + rng.index(20 - start);
        spec.blocks.push_back({start, end, rng.uniform()});
      }
      const auto s = synth_ssm(spec);
      for (std::size_t i = 0; i < 20; ++i) {
        CHECK(s.values(i, i) == 1.0);
        for (std::size_t j = 0; j < 20; ++j) CHECK(s.values(i, j) == s.values(j, i));
      }
    }
  }
  SUBCASE("invalid blocks are rejected") {
    CHECK_THROWS_AS(synth_ssm({4, {{2, 2, 0.5}}, 0.0}), Error);
    CHECK_THROWS_AS(synth_ssm({4, {{0, 5, 0.5}}, 0.0}), Error);
  }
}

TEST_CASE("synthetic spec text") {
  const SynthSpec spec = parse_synth_spec(
      "# two sections\nlength=8\nbackground=0.2\n\nblock=0,4,0.9\nblock=4,8,0.7\n");
  CHECK(spec.length == 8);
  CHECK(spec.background == doctest::Approx(0.2));
  REQUIRE(spec.blocks.size() == 2);
  CHECK(spec.blocks[1].start == 4);
  CHECK(spec.blocks[1].end == 8);
  CHECK(spec.blocks[1].level == doctest::Approx(0.7));
  CHECK_THROWS_AS(parse_synth_spec("length=4\nblock=0,2\n"), Error);
  CHECK_THROWS_AS(parse_synth_spec("size=4\n"), Error);
}

TEST_CASE("PGM rendering") {
  Tensor2 m(1, 3);
  m(0, 0) = 1.0;
  m(0, 1) = 0.0;
  m(0, 2) = 0.5;
  const auto pgm = render_pgm(m);
  const std::string header = "P5\n3 1\n255\n";
  REQUIRE(pgm.size() == header.size() + 3);
  CHECK(std::string(pgm.begin(), pgm.begin() + static_cast<long>(header.size())) == header);
  CHECK(pgm[header.size() + 0] == 255);
  CHECK(pgm[header.size() + 1] == 0);
  CHECK(pgm[header.size() + 2] == 128);
}
