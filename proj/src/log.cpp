#include "sing/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace sing::log {
namespace {

Level from_env() {
  const char* env = std::getenv("SING_LOG");
  if (env == nullptr) return Level::kWarn;
  const std::string v(env);
  if (v == "error" || v == "0") return Level::kError;
  if (v == "warn" || v == "1") return Level::kWarn;
  if (v == "info" || v == "2") return Level::kInfo;
  if (v == "debug" || v == "3") return Level::kDebug;
  return Level::kWarn;
}

std::atomic<int>& stored() {
  static std::atomic<int> level{static_cast<int>(from_env())};
  return level;
}

const char* tag(Level level) {
  switch (level) {
    case Level::kError: return "error";
    case Level::kWarn: return "warn";
    case Level::kInfo: return "info";
    case Level::kDebug: return "debug";
  }
  return "?";
}

}  // namespace

Level threshold() { return static_cast<Level>(stored().load()); }

void set_threshold(Level level) { stored().store(static_cast<int>(level)); }

void write(Level level, std::string_view message) {
  if (static_cast<int>(level) > stored().load()) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[sing " << tag(level) << "] " << message << '\n';
}

}  // namespace sing::log
