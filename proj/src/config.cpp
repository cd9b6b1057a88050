#include "sing/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "sing/error.hpp"

namespace sing {
namespace {

std::string_view trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value) {
  throw Error(ErrorKind::kInvalidArgument,
              "bad value '" + std::string(value) + "' for " + std::string(key));
}

std::size_t to_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v);
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v);
  return out;
}

double to_real(std::string_view key, std::string_view v) {
  const std::string copy(v);
  char* end = nullptr;
  const double out = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size()) bad(key, v);
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, v);
}

std::string real_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the short form when it round-trips.
  char shorter[32];
  std::snprintf(shorter, sizeof shorter, "%g", v);
  return std::strtod(shorter, nullptr) == v ? shorter : buf;
}

}  // namespace

const std::vector<std::string>& Settings::keys() {
  static const std::vector<std::string> k = {
      "hidden_size", "combiner", "seed_len", "top_k", "max_notes", "pitch_lo", "pitch_hi",
      "attention", "lstm_sparsemax", "p_feedback", "lr", "epochs", "seed", "adam.beta1",
      "adam.beta2", "adam.eps", "grid.k", "grid.count", "grid.max_len", "batch.cap",
      "edit.max_fraction"};
  return k;
}

void Settings::set(std::string_view key, std::string_view raw) {
  const auto v = trim(raw);
  if (key == "hidden_size") model.hidden_size = to_count(key, v);
  else if (key == "combiner") {
    if (v == "dense") model.combiner = CombinerMode::kDense;
    else if (v == "per_pitch") model.combiner = CombinerMode::kPerPitch;
    else bad(key, v);
  }
  else if (key == "seed_len") model.seed_len = to_count(key, v);
  else if (key == "top_k") model.top_k = to_count(key, v);
  else if (key == "max_notes") model.max_notes = to_count(key, v);
  else if (key == "pitch_lo") model.pitch_lo = to_count(key, v);
  else if (key == "pitch_hi") model.pitch_hi = to_count(key, v);
  else if (key == "attention") model.attention = to_bool(key, v);
  else if (key == "lstm_sparsemax") model.sparsemax_lstm_output = to_bool(key, v);
  else if (key == "p_feedback") {
    train.p_feedback = to_real(key, v);
    if (!(train.p_feedback >= 0.0 && train.p_feedback <= 1.0)) bad(key, v);
  }
  else if (key == "lr") {
    train.lr = to_real(key, v);
    if (!(train.lr > 0.0)) bad(key, v);
  }
  else if (key == "epochs") train.epochs = to_count(key, v);
  else if (key == "seed") train.seed = to_u64(key, v);
  else if (key == "adam.beta1") train.adam.beta1 = to_real(key, v);
  else if (key == "adam.beta2") train.adam.beta2 = to_real(key, v);
  else if (key == "adam.eps") train.adam.eps = to_real(key, v);
  else if (key == "grid.k") batching.grid_k = to_count(key, v);
  else if (key == "grid.count") batching.grid_count = to_count(key, v);
  else if (key == "grid.max_len") batching.max_len = to_count(key, v);
  else if (key == "batch.cap") batching.batch_cap = to_count(key, v);
  else if (key == "edit.max_fraction") {
    batching.max_edit_fraction = to_real(key, v);
    if (!(batching.max_edit_fraction >= 0.0)) bad(key, v);
  }
  else throw Error(ErrorKind::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
}

std::string Settings::get(std::string_view key) const {
  if (key == "hidden_size") return std::to_string(model.hidden_size);
  if (key == "combiner") return model.combiner == CombinerMode::kDense ? "dense" : "per_pitch";
  if (key == "seed_len") return std::to_string(model.seed_len);
  if (key == "top_k") return std::to_string(model.top_k);
  if (key == "max_notes") return std::to_string(model.max_notes);
  if (key == "pitch_lo") return std::to_string(model.pitch_lo);
  if (key == "pitch_hi") return std::to_string(model.pitch_hi);
  if (key == "attention") return model.attention ? "true" : "false";
  if (key == "lstm_sparsemax") return model.sparsemax_lstm_output ? "true" : "false";
  if (key == "p_feedback") return real_text(train.p_feedback);
  if (key == "lr") return real_text(train.lr);
  if (key == "epochs") return std::to_string(train.epochs);
  if (key == "seed") return std::to_string(train.seed);
  if (key == "adam.beta1") return real_text(train.adam.beta1);
  if (key == "adam.beta2") return real_text(train.adam.beta2);
  if (key == "adam.eps") return real_text(train.adam.eps);
  if (key == "grid.k") return std::to_string(batching.grid_k);
  if (key == "grid.count") return std::to_string(batching.grid_count);
  if (key == "grid.max_len") return std::to_string(batching.max_len);
  if (key == "batch.cap") return std::to_string(batching.batch_cap);
  if (key == "edit.max_fraction") return real_text(batching.max_edit_fraction);
  throw Error(ErrorKind::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
}

void Settings::load(std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::kInvalidArgument,
                  "config line " + std::to_string(line_no) + ": expected key = value");
    }
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

std::string Settings::dump() const {
  std::ostringstream out;
  for (const auto& k : keys()) out << k << " = " << get(k) << '\n';
  return out.str();
}

}  // namespace sing
