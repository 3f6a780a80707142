#pragma once

#include <cstdio>
#include <mutex>
#include <stdexcept>
#include <string>

namespace convoforge {

// Error taxonomy. Exit-code mapping in the CLI: ValidationError /
// StageError -> 1, ConfigError / DependencyError -> 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DependencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };

namespace detail {
inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}
inline LogLevel& log_threshold() {
  static LogLevel lvl = LogLevel::info;
  return lvl;
}
}  // namespace detail

inline void set_log_level(LogLevel lvl) { detail::log_threshold() = lvl; }

inline void log(LogLevel lvl, const std::string& msg) {
  if (lvl < detail::log_threshold()) return;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::lock_guard<std::mutex> lock(detail::log_mutex());
  std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(lvl)], msg.c_str());
}

inline void log_warn(const std::string& msg) { log(LogLevel::warn, msg); }
inline void log_info(const std::string& msg) { log(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log(LogLevel::debug, msg); }

}  // namespace convoforge
