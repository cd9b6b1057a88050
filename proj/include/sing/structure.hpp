#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sing/piano_roll.hpp"
#include "sing/tensor.hpp"

namespace sing {

inline constexpr std::size_t kPitchClasses = 12;

// 12 x n pitch-class counts.
using ChromaSequence = Tensor2;

enum class SsmRole { kTemplate, kGenerated };

struct SelfSimilarityMatrix {
  Tensor2 values;  // n x n
  SsmRole role = SsmRole::kTemplate;

  std::size_t size() const { return values.rows; }
};

struct SynthBlock {
  std::size_t start = 0;
  std::size_t end = 0;
  double level = 0.0;
};

struct SynthSpec {
  std::size_t length = 0;
  std::vector<SynthBlock> blocks;
  double background = 0.0;
};

ChromaSequence chroma(const PianoRoll& roll);

// Pairwise cosine similarity of chroma columns. A silent column is
// similar to nothing, itself included.
SelfSimilarityMatrix ssm(const ChromaSequence& chroma,
                         SsmRole role = SsmRole::kTemplate);

inline SelfSimilarityMatrix ssm_of(const PianoRoll& roll,
                                   SsmRole role = SsmRole::kTemplate) {
  return ssm(chroma(roll), role);
}

// (x - mean) / std over all n^2 entries, population std. Degenerate
// (std < 1e-12) input maps to all zeros.
Tensor2 standardize(const Tensor2& m);

double mse(const Tensor2& a, const Tensor2& b);

double standardized_mse(const SelfSimilarityMatrix& reference,
                        const SelfSimilarityMatrix& generated);

// Later blocks overwrite earlier ones; the diagonal is forced to 1.
SelfSimilarityMatrix synth_ssm(const SynthSpec& spec);

// Parses `length=`, `background=` and repeated `block=start,end,level` lines.
// Blank lines and lines starting with '#' are ignored.
SynthSpec parse_synth_spec(std::string_view text);

// Binary PGM (P5), maxval 255, pixel = round(clamp(v, 0, 1) * 255).
std::vector<std::uint8_t> render_pgm(const Tensor2& m);

// Grayscale images laid side by side with a white gutter, tallest first.
std::vector<std::uint8_t> render_pgm_row(std::span<const Tensor2> panels,
                                         std::size_t gutter = 4);

}  // namespace sing
