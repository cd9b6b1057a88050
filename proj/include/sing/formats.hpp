#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sing/model.hpp"
#include "sing/piano_roll.hpp"
#include "sing/structure.hpp"

namespace sing {

using Bytes = std::vector<std::uint8_t>;

// PRoll: "SINGPR1\0", u32 n_samples, u32 n_pitches (128), f64 tempo, then
// n_samples * 128 bytes of 0/1, sample-major. All little-endian.
Bytes encode_roll(const PianoRoll& roll);
PianoRoll decode_roll(std::span<const std::uint8_t> bytes);

// SINGSSM: "SINGSSM\0", u32 n, then n*n f32 row-major.
Bytes encode_ssm(const SelfSimilarityMatrix& ssm);
SelfSimilarityMatrix decode_ssm(std::span<const std::uint8_t> bytes);

// SINGCKPT: "SINGCKPT", u32 version, u32 tensor count, then per tensor
// u32 name length, name, u32 rows, u32 cols, f64 row-major. Model
// configuration, Adam moments and the step counter use reserved names
// ("config/...", "adam.m/...", "adam.v/...", "adam/step").
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor2 value;
};

Bytes encode_tensors(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_tensors(std::span<const std::uint8_t> bytes);

Bytes encode_checkpoint(const Model& model);
Model decode_checkpoint(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace sing
