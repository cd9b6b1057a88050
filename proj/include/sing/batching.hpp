#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sing/piano_roll.hpp"
#include "sing/rng.hpp"

namespace sing {

struct BatchingOptions {
  std::size_t grid_k = 10;
  std::size_t grid_count = 16;
  std::size_t max_len = 700;
  std::size_t batch_cap = 100;
  double max_edit_fraction = 0.04;
};

struct LengthGrid {
  std::vector<std::size_t> lengths;
  std::size_t min_len = 0;
  std::size_t max_len = 0;
  std::size_t k = 0;
};

enum class Edit { kNone, kPad, kTruncate };

struct Assignment {
  std::string piece_id;
  std::size_t segment = 0;
  std::size_t length = 0;  // segment length before editing
  std::size_t target = 0;
  Edit edit = Edit::kNone;
  double fraction = 0.0;
};

struct BatchPlan {
  std::vector<Assignment> assignments;
  std::vector<std::vector<std::size_t>> batches;  // indices into assignments
  std::vector<Assignment> excluded;               // target/edit of nearest grid point
};

// Cuts rolls longer than max_len into ceil(n/max_len) consecutive equal
// segments of floor(n/m) samples; the remainder is dropped.
std::vector<PianoRoll> slice_long(const PianoRoll& roll, std::size_t max_len);
std::vector<std::size_t> segment_lengths(std::size_t n, std::size_t max_len);

// Log-spaced grid from the k-th shortest length to max_len.
LengthGrid build_grid(std::span<const std::size_t> piece_lengths, std::size_t k,
                      std::size_t count, std::size_t max_len);

struct Placement {
  std::size_t target = 0;
  Edit edit = Edit::kNone;
  double fraction = 0.0;
};

// Nearest grid length in log space (ties to the shorter); nullopt when the
// edit exceeds max_fraction of the roll length.
std::optional<Placement> assign(std::size_t roll_length, const LengthGrid& grid,
                                double max_fraction = 0.04);
Placement nearest(std::size_t roll_length, const LengthGrid& grid);

// Groups by target length, shuffles within groups, chunks by cap and
// shuffles the batch order.
BatchPlan make_batches(std::vector<Assignment> assignments, std::size_t batch_cap, Rng& rng);

struct PieceLength {
  std::string piece_id;
  std::size_t samples = 0;
};

// slice -> grid -> assign -> batch, over whole-piece lengths.
BatchPlan plan_batches(std::span<const PieceLength> pieces, const BatchingOptions& options,
                       Rng& rng, LengthGrid* grid_out = nullptr);

// Applies an assignment's edit: truncation drops trailing samples, padding
// appends silence.
PianoRoll apply_edit(const PianoRoll& segment, std::size_t target);

std::string format_plan(const BatchPlan& plan);
BatchPlan parse_plan(std::string_view text);

std::string_view edit_name(Edit e);

}  // namespace sing
