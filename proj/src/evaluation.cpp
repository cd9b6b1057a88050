#include "sing/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "sing/error.hpp"
#include "sing/log.hpp"

namespace sing {

double EvalRun::mean() const {
  if (records.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : records) sum += r.std_mse;
  return sum / static_cast<double>(records.size());
}

PianoRoll random_baseline(std::size_t n, const ModelConfig& config, Rng& rng) {
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "random baseline needs n >= 1");
  const std::size_t range = config.pitch_hi - config.pitch_lo + 1;
  const std::size_t notes = std::min(config.max_notes, range);
  PianoRoll roll(n, 120.0);
  std::vector<std::size_t> pool(range);
  for (std::size_t s = 0; s < n; ++s) {
    std::iota(pool.begin(), pool.end(), config.pitch_lo);
    // Partial Fisher-Yates: the first `notes` entries are a uniform subset.
    for (std::size_t i = 0; i < notes; ++i) {
      const auto j = i + rng.index(range - i);
      std::swap(pool[i], pool[j]);
      roll.set(pool[i], s, true);
    }
  }
  return roll;
}

Generator model_generator(const Model& model) {
  return [&model](const EvalPiece& piece, Rng& rng) {
    return generate(model, piece.roll, piece.tmpl, rng);
  };
}

Generator random_generator(const ModelConfig& config) {
  return [config](const EvalPiece& piece, Rng& rng) {
    return random_baseline(piece.tmpl.size(), config, rng);
  };
}

Generator replay_generator() {
  return [](const EvalPiece& piece, Rng&) { return piece.roll.resized(piece.tmpl.size()); };
}

EvalRun evaluate(std::string name, const Generator& generator, std::span<const EvalPiece> pieces,
                 std::uint64_t seed, std::size_t generations, std::size_t jobs) {
  struct Slot {
    std::vector<double> scores;
    std::optional<std::string> failure;
  };
  std::vector<Slot> slots(pieces.size());

  auto work = [&](std::size_t i) {
    Rng rng(Rng::mix(seed ^ Rng::mix(i)));
    const auto& piece = pieces[i];
    try {
      for (std::size_t g = 0; g < generations; ++g) {
        const PianoRoll out = generator(piece, rng);
        slots[i].scores.push_back(standardized_mse(piece.tmpl, ssm_of(out, SsmRole::kGenerated)));
      }
    } catch (const std::exception& e) {
      slots[i].scores.clear();
      slots[i].failure = e.what();
    }
  };

  jobs = std::max<std::size_t>(1, std::min(jobs, pieces.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < pieces.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < jobs; ++j) {
      threads.emplace_back([&] {
        for (std::size_t i = next++; i < pieces.size(); i = next++) work(i);
      });
    }
    for (auto& t : threads) t.join();
  }

  EvalRun run;
  run.generator = std::move(name);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (slots[i].failure) {
      log::warn("skipping " + pieces[i].id + ": " + *slots[i].failure);
      run.skipped.push_back(pieces[i].id);
      continue;
    }
    ++run.pieces;
    for (std::size_t g = 0; g < slots[i].scores.size(); ++g) {
      run.records.push_back({pieces[i].id, g, slots[i].scores[g]});
    }
  }
  return run;
}

std::string format_eval_csv(const EvalRun& run) {
  std::ostringstream out;
  out << "piece_id,generation_index,std_mse\n";
  char buf[64];
  for (const auto& r : run.records) {
    std::snprintf(buf, sizeof buf, "%.10f", r.std_mse);
    out << r.piece_id << ',' << r.generation << ',' << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.10f", run.mean());
  out << "# summary generator=" << run.generator << " pieces=" << run.pieces
      << " generations=" << run.records.size() << " skipped=" << run.skipped.size()
      << " mean_std_mse=" << buf << '\n';
  return out.str();
}

}  // namespace sing
