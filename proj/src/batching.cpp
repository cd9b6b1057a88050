#include "sing/batching.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "sing/error.hpp"
#include "sing/log.hpp"

namespace sing {

std::vector<std::size_t> segment_lengths(std::size_t n, std::size_t max_len) {
  if (max_len == 0) throw Error(ErrorKind::kInvalidArgument, "max_len must be at least 1");
  if (n <= max_len) return {n};
  const std::size_t m = (n + max_len - 1) / max_len;
  return std::vector<std::size_t>(m, n / m);
}

std::vector<PianoRoll> slice_long(const PianoRoll& roll, std::size_t max_len) {
  const auto lengths = segment_lengths(roll.samples(), max_len);
  if (lengths.size() == 1) return {roll};
  std::vector<PianoRoll> out;
  out.reserve(lengths.size());
  std::size_t at = 0;
  for (auto len : lengths) {
    out.push_back(roll.slice(at, at + len));
    at += len;
  }
  return out;
}

LengthGrid build_grid(std::span<const std::size_t> piece_lengths, std::size_t k,
                      std::size_t count, std::size_t max_len) {
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "grid k must be at least 1");
  if (count < 2) throw Error(ErrorKind::kInvalidArgument, "grid needs at least 2 lengths");
  if (piece_lengths.size() < k) {
    throw Error(ErrorKind::kInvalidArgument, "grid needs at least k=" + std::to_string(k) +
                                                 " pieces, got " +
                                                 std::to_string(piece_lengths.size()));
  }
  std::vector<std::size_t> sorted(piece_lengths.begin(), piece_lengths.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  LengthGrid grid;
  grid.k = k;
  grid.min_len = sorted[k - 1];
  grid.max_len = max_len;
  if (grid.min_len == 0 || grid.min_len > max_len) {
    throw Error(ErrorKind::kInvalidArgument, "k-th shortest length " +
                                                 std::to_string(grid.min_len) +
                                                 " outside [1, max_len]");
  }
  const double ratio = static_cast<double>(max_len) / static_cast<double>(grid.min_len);
  grid.lengths.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double e = static_cast<double>(i) / static_cast<double>(count - 1);
    grid.lengths[i] = static_cast<std::size_t>(std::llround(grid.min_len * std::pow(ratio, e)));
  }
  return grid;
}

Placement nearest(std::size_t roll_length, const LengthGrid& grid) {
  if (grid.lengths.empty()) throw Error(ErrorKind::kInvalidArgument, "empty length grid");
  if (roll_length == 0) throw Error(ErrorKind::kInvalidArgument, "zero-length roll");
  const double log_len = std::log(static_cast<double>(roll_length));
  std::size_t best = grid.lengths.front();
  double best_dist = std::abs(log_len - std::log(static_cast<double>(best)));
  for (auto len : grid.lengths) {
    const double d = std::abs(log_len - std::log(static_cast<double>(len)));
    if (d < best_dist || (d == best_dist && len < best)) {
      best = len;
      best_dist = d;
    }
  }
  Placement p;
  p.target = best;
  p.edit = roll_length > best ? Edit::kTruncate : roll_length < best ? Edit::kPad : Edit::kNone;
  const auto diff = roll_length > best ? roll_length - best : best - roll_length;
  p.fraction = static_cast<double>(diff) / static_cast<double>(roll_length);
  return p;
}

std::optional<Placement> assign(std::size_t roll_length, const LengthGrid& grid,
                                double max_fraction) {
  const Placement p = nearest(roll_length, grid);
  if (p.fraction > max_fraction) return std::nullopt;
  return p;
}

BatchPlan make_batches(std::vector<Assignment> assignments, std::size_t batch_cap, Rng& rng) {
  if (batch_cap == 0) throw Error(ErrorKind::kInvalidArgument, "batch cap must be at least 1");
  BatchPlan plan;
  plan.assignments = std::move(assignments);
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
    groups[plan.assignments[i].target].push_back(i);
  }
  for (auto& [target, members] : groups) {
    rng.shuffle(members.begin(), members.end());
    for (std::size_t at = 0; at < members.size(); at += batch_cap) {
      const auto end = std::min(members.size(), at + batch_cap);
      plan.batches.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(at),
                                members.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  rng.shuffle(plan.batches.begin(), plan.batches.end());
  return plan;
}

BatchPlan plan_batches(std::span<const PieceLength> pieces, const BatchingOptions& options,
                       Rng& rng, LengthGrid* grid_out) {
  std::vector<Assignment> segments;
  std::vector<std::size_t> lengths;
  for (const auto& piece : pieces) {
    const auto segs = segment_lengths(piece.samples, options.max_len);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      segments.push_back({piece.piece_id, i, segs[i], 0, Edit::kNone, 0.0});
      lengths.push_back(segs[i]);
    }
  }
  const LengthGrid grid = build_grid(lengths, options.grid_k, options.grid_count, options.max_len);
  if (grid_out != nullptr) *grid_out = grid;

  std::vector<Assignment> kept;
  std::vector<Assignment> excluded;
  for (auto& a : segments) {
    const Placement p = nearest(a.length, grid);
    a.target = p.target;
    a.edit = p.edit;
    a.fraction = p.fraction;
    if (p.fraction > options.max_edit_fraction) {
      log::info("excluding " + a.piece_id + " segment " + std::to_string(a.segment) +
                " (length " + std::to_string(a.length) + ")");
      excluded.push_back(a);
    } else {
      kept.push_back(a);
    }
  }
  BatchPlan plan = make_batches(std::move(kept), options.batch_cap, rng);
  plan.excluded = std::move(excluded);
  return plan;
}

PianoRoll apply_edit(const PianoRoll& segment, std::size_t target) {
  return segment.resized(target);
}

std::string_view edit_name(Edit e) {
  switch (e) {
    case Edit::kNone: return "none";
    case Edit::kPad: return "pad";
    case Edit::kTruncate: return "truncate";
  }
  return "none";
}

namespace {

Edit parse_edit(std::string_view s, std::size_t line) {
  if (s == "none") return Edit::kNone;
  if (s == "pad") return Edit::kPad;
  if (s == "truncate") return Edit::kTruncate;
  throw Error(ErrorKind::kFormat, "plan line " + std::to_string(line) + ": unknown edit '" +
                                      std::string(s) + "'");
}

std::string format_fraction(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", f);
  return buf;
}

void write_assignment(std::ostringstream& out, const char* prefix, const Assignment& a) {
  out << prefix << a.piece_id << ',' << a.segment << ',' << a.target << ',' << edit_name(a.edit)
      << ',' << format_fraction(a.fraction) << '\n';
}

template <typename T>
T number(std::string_view s, std::size_t line) {
  T v{};
  if constexpr (std::is_floating_point_v<T>) {
    const std::string copy(s);
    char* end = nullptr;
    v = std::strtod(copy.c_str(), &end);
    if (copy.empty() || end != copy.c_str() + copy.size()) {
      throw Error(ErrorKind::kFormat, "plan line " + std::to_string(line) + ": bad number");
    }
  } else {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw Error(ErrorKind::kFormat, "plan line " + std::to_string(line) + ": bad number");
    }
  }
  return v;
}

Assignment parse_assignment(std::string_view line, std::size_t line_no) {
  // piece ids may contain commas; the numeric fields are the last four.
  std::vector<std::string_view> tail;
  std::string_view rest = line;
  for (int i = 0; i < 4; ++i) {
    const auto c = rest.rfind(',');
    if (c == std::string_view::npos) {
      throw Error(ErrorKind::kFormat, "plan line " + std::to_string(line_no) +
                                          ": expected piece_id,segment,target,edit,fraction");
    }
    tail.push_back(rest.substr(c + 1));
    rest = rest.substr(0, c);
  }
  Assignment a;
  a.piece_id = std::string(rest);
  a.segment = number<std::size_t>(tail[3], line_no);
  a.target = number<std::size_t>(tail[2], line_no);
  a.edit = parse_edit(tail[1], line_no);
  a.fraction = number<double>(tail[0], line_no);
  return a;
}

}  // namespace

std::string format_plan(const BatchPlan& plan) {
  std::ostringstream out;
  for (const auto& a : plan.assignments) write_assignment(out, "", a);
  for (const auto& batch : plan.batches) {
    out << "batch:";
    for (auto i : batch) out << ' ' << i;
    out << '\n';
  }
  for (const auto& a : plan.excluded) write_assignment(out, "# excluded ", a);
  return out.str();
}

BatchPlan parse_plan(std::string_view text) {
  BatchPlan plan;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.starts_with("# excluded ")) {
      plan.excluded.push_back(parse_assignment(line.substr(11), line_no));
      continue;
    }
    if (line.front() == '#') continue;
    if (line.starts_with("batch:")) {
      std::vector<std::size_t> batch;
      std::string_view rest = line.substr(6);
      while (!rest.empty()) {
        const auto start = rest.find_first_not_of(' ');
        if (start == std::string_view::npos) break;
        rest = rest.substr(start);
        const auto end = rest.find(' ');
        const auto idx = number<std::size_t>(rest.substr(0, end), line_no);
        if (idx >= plan.assignments.size()) {
          throw Error(ErrorKind::kFormat, "plan line " + std::to_string(line_no) +
                                              ": batch index out of range");
        }
        batch.push_back(idx);
        rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
      }
      plan.batches.push_back(std::move(batch));
      continue;
    }
    if (!plan.batches.empty()) {
      throw Error(ErrorKind::kFormat, "plan line " + std::to_string(line_no) +
                                          ": assignment after batch lines");
    }
    plan.assignments.push_back(parse_assignment(line, line_no));
  }
  return plan;
}

}  // namespace sing
