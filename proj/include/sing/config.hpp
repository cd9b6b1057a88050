#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sing/batching.hpp"
#include "sing/model.hpp"
#include "sing/training.hpp"

namespace sing {

// Every tunable of the pipeline, read from `key = value` text.
struct Settings {
  ModelConfig model;
  TrainConfig train;
  BatchingOptions batching;

  // Throws Error(kInvalidArgument) for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  // Lines of `key = value`; '#' starts a comment.
  void load(std::string_view text);
  std::string dump() const;

  static const std::vector<std::string>& keys();
};

}  // namespace sing
