#include "sing/piano_roll.hpp"

#include <algorithm>
#include <numeric>

#include "sing/error.hpp"

namespace sing {

PianoRoll::PianoRoll(std::size_t n_samples, double tempo, std::string source_id)
    : n_samples_(n_samples),
      tempo_(tempo),
      source_id_(std::move(source_id)),
      data_(n_samples * kPitches, 0) {}

std::size_t PianoRoll::active_count(std::size_t s) const {
  const auto row = sample(s);
  return static_cast<std::size_t>(
      std::count_if(row.begin(), row.end(), [](std::uint8_t v) { return v != 0; }));
}

PianoRoll PianoRoll::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > n_samples_) {
    throw Error(ErrorKind::kInvalidArgument, "piano roll slice out of range");
  }
  PianoRoll out(end - begin, tempo_, source_id_);
  std::copy(data_.begin() + static_cast<std::ptrdiff_t>(begin * kPitches),
            data_.begin() + static_cast<std::ptrdiff_t>(end * kPitches),
            out.data_.begin());
  return out;
}

PianoRoll PianoRoll::resized(std::size_t n_samples) const {
  PianoRoll out(n_samples, tempo_, source_id_);
  const auto keep = std::min(n_samples, n_samples_) * kPitches;
  std::copy_n(data_.begin(), keep, out.data_.begin());
  return out;
}

}  // namespace sing
