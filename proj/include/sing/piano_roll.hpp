#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sing {

inline constexpr std::size_t kPitches = 128;

// Binary pitch activations, one 128-entry sample per estimated beat.
// Storage is sample-major so a sample is a contiguous span.
class PianoRoll {
 public:
  PianoRoll() = default;
  PianoRoll(std::size_t n_samples, double tempo, std::string source_id = {});

  std::size_t samples() const { return n_samples_; }
  double tempo() const { return tempo_; }
  void set_tempo(double tempo) { tempo_ = tempo; }
  const std::string& source_id() const { return source_id_; }
  void set_source_id(std::string id) { source_id_ = std::move(id); }

  bool active(std::size_t pitch, std::size_t sample) const {
    return data_[sample * kPitches + pitch] != 0;
  }
  void set(std::size_t pitch, std::size_t sample, bool on) {
    data_[sample * kPitches + pitch] = on ? 1 : 0;
  }

  std::span<const std::uint8_t> sample(std::size_t s) const {
    return {data_.data() + s * kPitches, kPitches};
  }
  std::span<std::uint8_t> sample(std::size_t s) {
    return {data_.data() + s * kPitches, kPitches};
  }

  std::size_t active_count(std::size_t s) const;

  // Samples [begin, end) as a new roll with the same tempo.
  PianoRoll slice(std::size_t begin, std::size_t end) const;

  // Truncates trailing samples or appends silent ones.
  PianoRoll resized(std::size_t n_samples) const;

  std::span<const std::uint8_t> raw() const { return data_; }
  std::span<std::uint8_t> raw() { return data_; }

  friend bool operator==(const PianoRoll& a, const PianoRoll& b) {
    return a.n_samples_ == b.n_samples_ && a.data_ == b.data_;
  }

 private:
  std::size_t n_samples_ = 0;
  double tempo_ = 120.0;
  std::string source_id_;
  std::vector<std::uint8_t> data_;
};

}  // namespace sing
