#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "sing/error.hpp"
#include "sing/formats.hpp"
#include "sing/training.hpp"

using namespace sing;
using nn::Vec;

namespace {

PianoRoll patterned_roll(Rng& rng, std::size_t n, std::size_t period) {
  std::vector<std::vector<std::size_t>> motif(period);
  for (auto& chord : motif) {
    const std::size_t k = 1 + rng.index(3);
    for (std::size_t j = 0; j < k; ++j) chord.push_back(45 + rng.index(30));
  }
  PianoRoll r(n, 120.0);
  for (std::size_t s = 0; s < n; ++s)
    for (auto p : motif[s % period]) r.set(p, s, true);
  return r;
}

ModelConfig tiny_config(bool attention = true) {
  ModelConfig cfg;
  cfg.hidden_size = 4;
  cfg.seed_len = 2;
  cfg.attention = attention;
  return cfg;
}

std::vector<TrainingPiece> corpus(Rng& rng, std::size_t count, std::size_t n) {
  std::vector<TrainingPiece> out;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(make_training_piece("piece" + std::to_string(i), patterned_roll(rng, n, 2 + rng.index(3))));
  return out;
}

}  // namespace

TEST_CASE("zero model on a silent target pays ln 2 per pitch and step") {
  const Model m = Model::zeros(tiny_config());
  const PianoRoll silent(8, 120.0);
  const auto s = ssm_of(silent);
  Rng rng(1);
  const auto trace = run_sequence(m, silent, &s.values, 8, Feedback::kScheduled, 0.0, rng);
  const PieceLoss loss = piece_loss(trace, silent, s.values);
  CHECK(loss.bce == doctest::Approx(6.0 * 128.0 * std::log(2.0)));
  CHECK(loss.total == doctest::Approx(loss.bce + loss.structural));
}

TEST_CASE("structural term vanishes when G equals S") {
  Rng rng(2);
  const PianoRoll r = patterned_roll(rng, 12, 3);
  const ChromaSequence c = chroma(r);
  const auto s = ssm(c);
  Tensor2 d;
  CHECK(structural_loss(c, s.values, 0, &d) == doctest::Approx(0.0));
  for (double v : d.data) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("structural term gradient matches finite differences") {
  Rng rng(3);
  const std::size_t n = 9, first_free = 3;
  Tensor2 c(12, n);
  for (double& v : c.data) v = 0.1 + rng.uniform();
  Tensor2 s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) s(i, j) = s(j, i) = i == j ? 1.0 : rng.uniform();
  Tensor2 d;
  structural_loss(c, s, first_free, &d);
  auto loss = [&] { return structural_loss(c, s, first_free, nullptr); };
  double worst = 0.0;
  for (std::size_t col = first_free; col < n; ++col) {
    for (std::size_t k = 0; k < 12; ++k) {
      const double numeric = oracle::central_difference(loss, c(k, col));
      worst = std::max(worst, oracle::relative_error(d(k, col), numeric));
    }
  }
  CHECK(worst < 1e-4);
  for (std::size_t col = 0; col < first_free; ++col)
    for (std::size_t k = 0; k < 12; ++k) CHECK(d(k, col) == 0.0);
}

TEST_CASE("full piece loss gradient matches finite differences") {
  for (bool attention : {true, false}) {
    Rng rng(4);
    Model m(tiny_config(attention), 5);
    const PianoRoll target = patterned_roll(rng, 8, 3);
    const auto s = ssm_of(target);
    auto loss = [&] {
      Rng local(6);
      const auto tr = run_sequence(m, target, &s.values, 8, Feedback::kScheduled, 0.0, local);
      return piece_loss(tr, target, s.values, false).total;
    };
    Rng local(6);
    const auto trace = run_sequence(m, target, &s.values, 8, Feedback::kScheduled, 0.0, local);
    const PieceLoss pl = piece_loss(trace, target, s.values);
    m.params().zero_grad();
    backpropagate(m, trace, pl.d_logits);
    for (auto& p : m.params()) {
      INFO(p.name << " attention=" << attention);
      const Vec analytic = p.grad.data;
      constexpr double h = 1e-3;
      CHECK(oracle::max_gradient_error(p.value.data, analytic, loss,
                                       oracle::roundoff_floor(pl.total, 1e-3, h), h) < 1e-3);
    }
  }
}

TEST_CASE("structural term is blind to octave transpositions of generated pitches") {
  Rng rng(7);
  const Model m(tiny_config(), 8);
  const PianoRoll target = patterned_roll(rng, 10, 2);
  const auto s = ssm_of(target);
  const auto trace = run_sequence(m, target, &s.values, 10, Feedback::kScheduled, 0.8, rng);
  ForwardTrace moved = trace;
  for (auto& rec : moved.steps) {
    Vec shifted(kPitches, 0.0);
    for (std::size_t p = 0; p < kPitches; ++p) {
      const std::size_t up = p + 12 * (1 + rng.index(2));
      shifted[up < kPitches ? up : p % 12] += rec.prob[p];
    }
    rec.prob = shifted;
  }
  const double a = piece_loss(trace, target, s.values, false).structural;
  const double b = piece_loss(moved, target, s.values, false).structural;
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("scheduled sampling feedback") {
  Rng rng(9);
  const Model m(tiny_config(), 10);
  const PianoRoll target = patterned_roll(rng, 30, 4);
  const auto s = ssm_of(target);
  SUBCASE("p = 0 is teacher forcing") {
    const auto tr = run_sequence(m, target, &s.values, 30, Feedback::kScheduled, 0.0, rng);
    for (std::size_t t = 0; t < 30; ++t) CHECK(tr.inputs[t] == sample_vector(target, t));
  }
  SUBCASE("p = 1 feeds every sample back") {
    const auto tr = run_sequence(m, target, &s.values, 30, Feedback::kScheduled, 1.0, rng);
    for (const auto& rec : tr.steps) {
      CHECK(rec.fed_back);
      CHECK(tr.inputs[rec.position] == rec.sampled);
    }
  }
  SUBCASE("p = 0.8 feeds back at the binomial rate") {
    Vec sampled(kPitches, 0.0), reference(kPitches, 1.0);
    int fed = 0;
    const int steps = 10000;
    for (int i = 0; i < steps; ++i) {
      bool f = false;
      const Vec& chosen = scheduled_input(sampled, reference, 0.8, rng, &f);
      CHECK(&chosen == (f ? &sampled : &reference));
      fed += f;
    }
    const auto b = oracle::binomial(steps, 0.8);
    CHECK(std::abs(fed - b.mean) <= 3.0 * b.sd);
  }
}

TEST_CASE("one optimizer step per batch") {
  Rng rng(11);
  auto pieces = corpus(rng, 5, 12);
  TrainConfig cfg;
  SUBCASE("empty plan") {
    Model m(tiny_config(), 1);
    std::vector<std::vector<std::size_t>> none;
    const EpochReport r = train_epoch(m, none, pieces, cfg, rng);
    CHECK(r.batches == 0);
    CHECK_FALSE(r.train_loss_defined);
    CHECK(m.params().step() == 0);
  }
  SUBCASE("single piece") {
    Model m(tiny_config(), 1);
    std::vector<std::vector<std::size_t>> one = {{2}};
    const EpochReport r = train_epoch(m, one, pieces, cfg, rng);
    CHECK(r.batches == 1);
    CHECK(m.params().step() == 1);
  }
  SUBCASE("several batches") {
    Model m(tiny_config(), 1);
    std::vector<std::vector<std::size_t>> plan = {{0, 1}, {2, 3, 4}, {1}};
    train_epoch(m, plan, pieces, cfg, rng);
    CHECK(m.params().step() == 3);
    train_epoch(m, plan, pieces, cfg, rng);
    CHECK(m.params().step() == 6);
  }
  SUBCASE("mixed lengths in a batch are rejected") {
    Model m(tiny_config(), 1);
    pieces.push_back(make_training_piece("longer", patterned_roll(rng, 14, 2)));
    std::vector<std::vector<std::size_t>> plan = {{0, 5}};
    CHECK_THROWS_AS(train_epoch(m, plan, pieces, cfg, rng), Error);
  }
}

TEST_CASE("a non-finite loss aborts the epoch and names the piece") {
  Rng rng(12);
  auto pieces = corpus(rng, 2, 10);
  pieces[1].id = "troublesome";
  Model m(tiny_config(), 1);
  m.params().value(m.params().index("head.bias")).data[60] = std::nan("");
  std::vector<std::vector<std::size_t>> plan = {{1}};
  CHECK_THROWS_WITH(train_epoch(m, plan, pieces, TrainConfig{}, rng), doctest::Contains("troublesome"));
}

TEST_CASE("training loss falls over the first epochs on a toy corpus") {
  Rng rng(13);
  const auto pieces = corpus(rng, 5, 16);
  ModelConfig mc = tiny_config();
  mc.hidden_size = 16;
  Model m(mc, 14);
  TrainConfig cfg;
  std::vector<std::vector<std::size_t>> plan = {{0}, {1}, {2}, {3}, {4}};
  Rng train_rng(15);
  std::vector<double> losses;
  for (int e = 0; e < 3; ++e) losses.push_back(train_epoch(m, plan, pieces, cfg, train_rng).train_loss);
  CHECK(losses[1] < losses[0]);
  CHECK(losses[2] < losses[1]);
}

TEST_CASE("model selection picks the earliest minimum") {
  std::vector<EpochReport> r(6);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i].epoch = i + 1;
    r[i].val_loss = 10.0 - static_cast<double>(i);
  }
  CHECK(select_best(r) == 5);
  r[1].val_loss = 1.0;
  r[4].val_loss = 1.0;
  CHECK(select_best(r) == 1);
  CHECK(r[select_best(r)].epoch == 2);
}

TEST_CASE("identical seeds give byte-identical training runs") {
  Rng rng(16);
  const auto pieces = corpus(rng, 4, 12);
  const auto val = corpus(rng, 2, 12);
  std::vector<std::vector<std::size_t>> plan = {{0, 1}, {2, 3}};
  const auto dir = std::filesystem::temp_directory_path() / "sing_test_training_run";
  std::filesystem::remove_all(dir);
  auto run = [&](const std::filesystem::path& out) {
    Model m(tiny_config(), 3);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 42;
    cfg.checkpoint_dir = out;
    return train(m, plan, pieces, val, cfg);
  };
  const TrainResult a = run(dir / "a");
  const TrainResult b = run(dir / "b");
  REQUIRE(a.checkpoints.size() == 3);
  CHECK(a.checkpoints == b.checkpoints);
  CHECK(a.best_index == b.best_index);
  for (int e = 1; e <= 3; ++e) {
    const auto name = "epoch_" + std::to_string(e) + ".ckpt";
    CHECK(read_file(dir / "a" / name) == read_file(dir / "b" / name));
  }
  CHECK(read_file(dir / "a" / "best.ckpt") == a.checkpoints[a.best_index]);
  const std::string csv = read_text(dir / "a" / "report.csv");
  CHECK(csv.rfind("epoch,train_loss,val_loss,seconds\n", 0) == 0);
  std::filesystem::remove_all(dir);
}
