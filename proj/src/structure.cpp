#include "sing/structure.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "sing/error.hpp"

namespace sing {

ChromaSequence chroma(const PianoRoll& roll) {
  ChromaSequence out(kPitchClasses, roll.samples());
  for (std::size_t s = 0; s < roll.samples(); ++s) {
    const auto sample = roll.sample(s);
    for (std::size_t p = 0; p < kPitches; ++p) {
      if (sample[p]) out(p % kPitchClasses, s) += 1.0;
    }
  }
  return out;
}

SelfSimilarityMatrix ssm(const ChromaSequence& chroma, SsmRole role) {
  const std::size_t n = chroma.cols;
  const std::size_t k = chroma.rows;
  std::vector<double> norms(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    double sq = 0.0;
    for (std::size_t c = 0; c < k; ++c) sq += chroma(c, s) * chroma(c, s);
    norms[s] = std::sqrt(sq);
  }
  SelfSimilarityMatrix out{Tensor2(n, n), role};
  for (std::size_t i = 0; i < n; ++i) {
    if (norms[i] == 0.0) continue;
    out.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (norms[j] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < k; ++c) dot += chroma(c, i) * chroma(c, j);
      const double v = std::clamp(dot / (norms[i] * norms[j]), 0.0, 1.0);
      out.values(i, j) = v;
      out.values(j, i) = v;
    }
  }
  return out;
}

Tensor2 standardize(const Tensor2& m) {
  const auto count = static_cast<double>(m.size());
  Tensor2 out(m.rows, m.cols);
  if (m.size() == 0) return out;
  double mean = 0.0;
  for (double v : m.data) mean += v;
  mean /= count;
  double var = 0.0;
  for (double v : m.data) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / count);
  if (sd < 1e-12) return out;
  for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = (m.data[i] - mean) / sd;
  return out;
}

double mse(const Tensor2& a, const Tensor2& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::kShape, "mse: dimension mismatch (" + std::to_string(a.rows) + "x" +
                                       std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                                       "x" + std::to_string(b.cols) + ")");
  }
  if (a.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double standardized_mse(const SelfSimilarityMatrix& reference,
                        const SelfSimilarityMatrix& generated) {
  return mse(standardize(reference.values), standardize(generated.values));
}

SelfSimilarityMatrix synth_ssm(const SynthSpec& spec) {
  if (spec.length == 0) throw Error(ErrorKind::kInvalidArgument, "synthetic SSM length must be positive");
  if (spec.background < 0.0 || spec.background > 1.0) {
    throw Error(ErrorKind::kInvalidArgument, "background level outside [0, 1]");
  }
  SelfSimilarityMatrix out{Tensor2(spec.length, spec.length, spec.background), SsmRole::kTemplate};
  for (const auto& b : spec.blocks) {
    if (b.start >= b.end || b.end > spec.length) {
      throw Error(ErrorKind::kInvalidArgument, "block [" + std::to_string(b.start) + ", " +
                                                   std::to_string(b.end) + ") outside [0, " +
                                                   std::to_string(spec.length) + ")");
    }
    if (b.level < 0.0 || b.level > 1.0) {
      throw Error(ErrorKind::kInvalidArgument, "block level outside [0, 1]");
    }
    for (std::size_t i = b.start; i < b.end; ++i) {
      for (std::size_t j = b.start; j < b.end; ++j) out.values(i, j) = b.level;
    }
  }
  for (std::size_t i = 0; i < spec.length; ++i) out.values(i, i) = 1.0;
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view text, std::size_t line) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::kFormat, "synth spec line " + std::to_string(line) +
                                        ": bad number '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

SynthSpec parse_synth_spec(std::string_view text) {
  SynthSpec spec;
  bool have_length = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::kFormat, "synth spec line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = line.substr(eq + 1);
    if (key == "length") {
      spec.length = parse_number<std::size_t>(value, line_no);
      have_length = true;
    } else if (key == "background") {
      spec.background = parse_number<double>(value, line_no);
    } else if (key == "block") {
      const auto c1 = value.find(',');
      const auto c2 = c1 == std::string_view::npos ? c1 : value.find(',', c1 + 1);
      if (c2 == std::string_view::npos) {
        throw Error(ErrorKind::kFormat, "synth spec line " + std::to_string(line_no) +
                                            ": block needs start,end,level");
      }
      spec.blocks.push_back({parse_number<std::size_t>(value.substr(0, c1), line_no),
                             parse_number<std::size_t>(value.substr(c1 + 1, c2 - c1 - 1), line_no),
                             parse_number<double>(value.substr(c2 + 1), line_no)});
    } else {
      throw Error(ErrorKind::kFormat, "synth spec line " + std::to_string(line_no) +
                                          ": unknown key '" + std::string(key) + "'");
    }
  }
  if (!have_length) throw Error(ErrorKind::kFormat, "synth spec: missing length");
  return spec;
}

namespace {

std::uint8_t to_pixel(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

std::vector<std::uint8_t> pgm_header(std::size_t width, std::size_t height) {
  const std::string h = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  return {h.begin(), h.end()};
}

}  // namespace

std::vector<std::uint8_t> render_pgm(const Tensor2& m) {
  auto out = pgm_header(m.cols, m.rows);
  out.reserve(out.size() + m.size());
  for (double v : m.data) out.push_back(to_pixel(v));
  return out;
}

std::vector<std::uint8_t> render_pgm_row(std::span<const Tensor2> panels, std::size_t gutter) {
  std::size_t width = 0;
  std::size_t height = 0;
  for (const auto& p : panels) {
    width += p.cols;
    height = std::max(height, p.rows);
  }
  if (!panels.empty()) width += gutter * (panels.size() - 1);
  std::vector<std::uint8_t> pixels(width * height, 255);
  std::size_t x0 = 0;
  for (const auto& p : panels) {
    for (std::size_t r = 0; r < p.rows; ++r) {
      for (std::size_t c = 0; c < p.cols; ++c) pixels[r * width + x0 + c] = to_pixel(p(r, c));
    }
    x0 += p.cols + gutter;
  }
  auto out = pgm_header(width, height);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

}  // namespace sing
