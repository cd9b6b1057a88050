#include "sing/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>

#include "sing/error.hpp"
#include "sing/formats.hpp"
#include "sing/log.hpp"

namespace sing::pipeline {

std::vector<fs::path> list_files(const fs::path& dir, std::string_view extension) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

PianoRoll roll_from_midi(std::span<const std::uint8_t> bytes, std::string source_id) {
  const MidiData midi = parse_midi(bytes);
  const double tempo = estimate_tempo(midi.notes);
  PianoRoll roll = to_piano_roll(midi.notes, tempo);
  roll.set_source_id(std::move(source_id));
  return roll;
}

PreprocessSummary preprocess(const fs::path& in_dir, const fs::path& out_dir, std::size_t jobs) {
  auto files = list_files(in_dir, ".mid");
  for (auto& f : list_files(in_dir, ".midi")) files.push_back(f);
  std::sort(files.begin(), files.end());
  fs::create_directories(out_dir);

  std::vector<std::string> errors(files.size());
  auto work = [&](std::size_t i) {
    const auto stem = files[i].stem().string();
    try {
      const PianoRoll roll = roll_from_midi(read_file(files[i]), stem);
      write_file(out_dir / (stem + ".proll"), encode_roll(roll));
      write_file(out_dir / (stem + ".ssm"), encode_ssm(ssm_of(roll)));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, files.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  for (std::size_t j = 1; j < jobs; ++j) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < files.size(); i = next++) work(i);
    });
  }
  for (std::size_t i = next++; i < files.size(); i = next++) work(i);
  for (auto& t : threads) t.join();

  PreprocessSummary summary;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (errors[i].empty()) {
      ++summary.written;
    } else {
      log::warn("excluded " + files[i].filename().string() + ": " + errors[i]);
      summary.failed.push_back(files[i].filename().string() + ": " + errors[i]);
    }
  }
  return summary;
}

BatchPlan plan_corpus(const fs::path& corpus_dir, const BatchingOptions& options,
                      std::uint64_t seed, LengthGrid* grid) {
  std::vector<PieceLength> lengths;
  for (const auto& f : list_files(corpus_dir, ".proll")) {
    lengths.push_back({f.stem().string(), decode_roll(read_file(f)).samples()});
  }
  Rng rng(seed);
  return plan_batches(lengths, options, rng, grid);
}

std::vector<TrainingPiece> load_plan_pieces(const fs::path& corpus_dir, const BatchPlan& plan,
                                            std::size_t max_len) {
  std::map<std::string, std::vector<PianoRoll>> cache;
  std::vector<TrainingPiece> out;
  out.reserve(plan.assignments.size());
  for (const auto& a : plan.assignments) {
    auto it = cache.find(a.piece_id);
    if (it == cache.end()) {
      const PianoRoll roll = decode_roll(read_file(corpus_dir / (a.piece_id + ".proll")));
      it = cache.emplace(a.piece_id, slice_long(roll, max_len)).first;
    }
    if (a.segment >= it->second.size()) {
      throw Error(ErrorKind::kFormat, "plan names segment " + std::to_string(a.segment) + " of " +
                                          a.piece_id + ", which has " +
                                          std::to_string(it->second.size()));
    }
    out.push_back(make_training_piece(a.piece_id + "#" + std::to_string(a.segment),
                                      apply_edit(it->second[a.segment], a.target)));
  }
  return out;
}

TrainResult train_from_files(const TrainRequest& request, const EpochCallback& on_epoch) {
  const auto& s = request.settings;
  const BatchPlan plan = parse_plan(read_text(request.plan));
  const auto pieces = load_plan_pieces(request.corpus_dir, plan, s.batching.max_len);
  std::vector<TrainingPiece> val;
  if (request.val_plan) {
    val = load_plan_pieces(request.corpus_dir, parse_plan(read_text(*request.val_plan)),
                           s.batching.max_len);
  }
  TrainConfig config = s.train;
  config.checkpoint_dir = request.out_dir;
  Model model(s.model, Rng::mix(config.seed));
  return train(model, plan.batches, pieces, val, config, on_epoch);
}

PianoRoll generate_files(const Model& model, const fs::path& seed_roll, const fs::path& tmpl,
                         std::uint64_t seed, const fs::path& out_prefix) {
  const PianoRoll seed_piece = decode_roll(read_file(seed_roll));
  const SelfSimilarityMatrix templ = decode_ssm(read_file(tmpl));
  Rng rng(seed);
  const PianoRoll out = generate(model, seed_piece, templ, rng);
  if (out_prefix.has_parent_path()) fs::create_directories(out_prefix.parent_path());
  write_file(fs::path(out_prefix.string() + ".proll"), encode_roll(out));
  write_file(fs::path(out_prefix.string() + ".mid"), to_midi(out, out.tempo()));
  return out;
}

std::vector<EvalPiece> load_eval_pieces(const fs::path& dir) {
  std::vector<EvalPiece> out;
  for (const auto& f : list_files(dir, ".proll")) {
    EvalPiece piece;
    piece.id = f.stem().string();
    piece.roll = decode_roll(read_file(f));
    const auto ssm_path = fs::path(f).replace_extension(".ssm");
    piece.tmpl = fs::exists(ssm_path) ? decode_ssm(read_file(ssm_path)) : ssm_of(piece.roll);
    out.push_back(std::move(piece));
  }
  return out;
}

}  // namespace sing::pipeline
