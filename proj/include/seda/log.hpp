#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace seda {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

/// Threshold parsed once from the SEDA_LOG_LEVEL environment variable
/// (error | warn | info | debug); unset or unrecognized values mean info.
inline LogLevel log_threshold() {
  static const LogLevel threshold = [] {
    const char* raw = std::getenv("SEDA_LOG_LEVEL");
    if (raw == nullptr) return LogLevel::info;
    const std::string value(raw);
    if (value == "error") return LogLevel::error;
    if (value == "warn") return LogLevel::warn;
    if (value == "debug") return LogLevel::debug;
    return LogLevel::info;
  }();
  return threshold;
}

inline const char* log_level_name(LogLevel level) {
  switch (level) {
    case LogLevel::error:
      return "error";
    case LogLevel::warn:
      return "warn";
    case LogLevel::info:
      return "info";
    default:
      return "debug";
  }
}

/// Writes one line to stderr when the level passes the threshold.
inline void log_message(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > static_cast<int>(log_threshold())) return;
  std::cerr << "[seda][" << log_level_name(level) << "] " << message << "\n";
}

}  // namespace seda
