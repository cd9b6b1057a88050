#include "sing/formats.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "sing/error.hpp"

namespace sing {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
 public:
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void byte(std::uint8_t b) { out_.push_back(b); }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Cursor {
 public:
  Cursor(std::span<const std::uint8_t> bytes, const char* what) : bytes_(bytes), what_(what) {}

  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) {
      throw Error(ErrorKind::kFormat, std::string(what_) + ": truncated at byte " + std::to_string(pos_));
    }
  }
  void expect(std::string_view magic) {
    need(magic.size());
    if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0) {
      throw Error(ErrorKind::kFormat, std::string(what_) + ": bad magic");
    }
    pos_ += magic.size();
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void finish() const {
    if (pos_ != bytes_.size()) {
      throw Error(ErrorKind::kFormat, std::string(what_) + ": trailing bytes after payload");
    }
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  const char* what_;
};

constexpr std::string_view kRollMagic{"SINGPR1\0", 8};
constexpr std::string_view kSsmMagic{"SINGSSM\0", 8};
constexpr std::string_view kCkptMagic{"SINGCKPT", 8};

}  // namespace

Bytes encode_roll(const PianoRoll& roll) {
  Writer w;
  w.raw(kRollMagic);
  w.u32(static_cast<std::uint32_t>(roll.samples()));
  w.u32(static_cast<std::uint32_t>(kPitches));
  w.f64(roll.tempo());
  for (auto b : roll.raw()) w.byte(b ? 1 : 0);
  return w.take();
}

PianoRoll decode_roll(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes, "PRoll");
  c.expect(kRollMagic);
  const std::uint32_t n = c.u32();
  const std::uint32_t pitches = c.u32();
  if (pitches != kPitches) throw Error(ErrorKind::kFormat, "PRoll: pitch count must be 128");
  const double tempo = c.f64();
  if (n == 0) throw Error(ErrorKind::kFormat, "PRoll: zero samples");
  const auto body = c.take(static_cast<std::size_t>(n) * kPitches);
  c.finish();
  PianoRoll roll(n, tempo);
  auto raw = roll.raw();
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] > 1) throw Error(ErrorKind::kFormat, "PRoll: entry is not 0 or 1");
    raw[i] = body[i];
  }
  return roll;
}

Bytes encode_ssm(const SelfSimilarityMatrix& ssm) {
  Writer w;
  w.raw(kSsmMagic);
  w.u32(static_cast<std::uint32_t>(ssm.size()));
  for (double v : ssm.values.data) w.f32(static_cast<float>(v));
  return w.take();
}

SelfSimilarityMatrix decode_ssm(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes, "SINGSSM");
  c.expect(kSsmMagic);
  const std::uint32_t n = c.u32();
  c.need(static_cast<std::size_t>(n) * n * 4);
  SelfSimilarityMatrix out{Tensor2(n, n), SsmRole::kTemplate};
  for (auto& v : out.values.data) v = c.f32();
  c.finish();
  return out;
}

Bytes encode_tensors(std::span<const NamedTensor> tensors) {
  Writer w;
  w.raw(kCkptMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.raw(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rows));
    w.u32(static_cast<std::uint32_t>(t.value.cols));
    for (double v : t.value.data) w.f64(v);
  }
  return w.take();
}

std::vector<NamedTensor> decode_tensors(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes, "SINGCKPT");
  c.expect(kCkptMagic);
  const std::uint32_t version = c.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kFormat, "SINGCKPT: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = c.u32();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = c.take(c.u32());
    NamedTensor t;
    t.name.assign(name.begin(), name.end());
    const std::uint32_t rows = c.u32();
    const std::uint32_t cols = c.u32();
    c.need(static_cast<std::size_t>(rows) * cols * 8);
    t.value = Tensor2(rows, cols);
    for (auto& v : t.value.data) v = c.f64();
    out.push_back(std::move(t));
  }
  c.finish();
  return out;
}

namespace {

Tensor2 scalar(double v) { return Tensor2(1, 1, v); }

}  // namespace

Bytes encode_checkpoint(const Model& model) {
  const auto& cfg = model.config();
  std::vector<NamedTensor> tensors = {
      {"config/hidden_size", scalar(static_cast<double>(cfg.hidden_size))},
      {"config/combiner", scalar(cfg.combiner == CombinerMode::kDense ? 0.0 : 1.0)},
      {"config/seed_len", scalar(static_cast<double>(cfg.seed_len))},
      {"config/top_k", scalar(static_cast<double>(cfg.top_k))},
      {"config/max_notes", scalar(static_cast<double>(cfg.max_notes))},
      {"config/pitch_lo", scalar(static_cast<double>(cfg.pitch_lo))},
      {"config/pitch_hi", scalar(static_cast<double>(cfg.pitch_hi))},
      {"config/attention", scalar(cfg.attention ? 1.0 : 0.0)},
      {"config/lstm_sparsemax", scalar(cfg.sparsemax_lstm_output ? 1.0 : 0.0)},
      {"adam/step", scalar(static_cast<double>(model.params().step()))},
  };
  for (const auto& p : model.params()) tensors.push_back({p.name, p.value});
  for (const auto& p : model.params()) tensors.push_back({"adam.m/" + p.name, p.m});
  for (const auto& p : model.params()) tensors.push_back({"adam.v/" + p.name, p.v});
  return encode_tensors(tensors);
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
  const auto tensors = decode_tensors(bytes);
  std::map<std::string, const Tensor2*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t.value;
  auto get = [&](const std::string& name) -> const Tensor2& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(ErrorKind::kFormat, "SINGCKPT: missing tensor " + name);
    return *it->second;
  };
  auto count = [&](const std::string& name) {
    const auto& t = get(name);
    if (t.size() != 1 || t.data[0] < 0) throw Error(ErrorKind::kFormat, "SINGCKPT: bad " + name);
    return static_cast<std::size_t>(t.data[0]);
  };

  ModelConfig cfg;
  cfg.hidden_size = count("config/hidden_size");
  cfg.combiner = count("config/combiner") == 0 ? CombinerMode::kDense : CombinerMode::kPerPitch;
  cfg.seed_len = count("config/seed_len");
  cfg.top_k = count("config/top_k");
  cfg.max_notes = count("config/max_notes");
  cfg.pitch_lo = count("config/pitch_lo");
  cfg.pitch_hi = count("config/pitch_hi");
  cfg.attention = count("config/attention") != 0;
  cfg.sparsemax_lstm_output = count("config/lstm_sparsemax") != 0;

  Model model = Model::zeros(cfg);
  for (auto& p : model.params()) {
    const auto& value = get(p.name);
    const auto& m = get("adam.m/" + p.name);
    const auto& v = get("adam.v/" + p.name);
    if (!value.same_shape(p.value) || !m.same_shape(p.value) || !v.same_shape(p.value)) {
      throw Error(ErrorKind::kFormat, "SINGCKPT: shape mismatch for " + p.name);
    }
    p.value = value;
    p.m = m;
    p.v = v;
  }
  model.params().set_step(count("adam/step"));
  return model;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

}  // namespace sing
