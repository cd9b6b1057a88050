#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "oracles.hpp"
#include "sing/rng.hpp"

namespace fixture {

// Quarter-note chords (1-3 notes) following a repeating motif, 480 ticks per
// quarter at 120 BPM, so each beat becomes one piano-roll sample.
inline std::vector<std::uint8_t> motif_midi(sing::Rng& rng, std::size_t beats, std::size_t period) {
  std::vector<std::vector<int>> motif(period);
  for (auto& chord : motif) {
    const std::size_t k = 1 + rng.index(3);
    for (std::size_t j = 0; j < k; ++j) {
      const int p = 48 + static_cast<int>(rng.index(24));
      if (std::find(chord.begin(), chord.end(), p) == chord.end()) chord.push_back(p);
    }
  }
  oracle::MidiBuilder b(1, 480);
  b.track().tempo(0, 500000).end();
  b.track();
  for (std::size_t s = 0; s < beats; ++s) {
    const auto& chord = motif[s % period];
    for (std::size_t j = 0; j < chord.size(); ++j) b.note_on(0, chord[j], 90);
    for (std::size_t j = 0; j < chord.size(); ++j) b.note_off(j == 0 ? 480 : 0, chord[j]);
  }
  b.end();
  return b.build();
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct Run {
  int status = -1;
  std::string output;
};

// Runs a shell command, capturing stdout and stderr together.
inline Run run(const std::string& command, const std::filesystem::path& log) {
  const int raw = std::system((command + " > '" + log.string() + "' 2>&1").c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.output = slurp(log);
  return r;
}

}  // namespace fixture
