#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace aquathru {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Level comes from AQUATHRU_LOG (error|info|debug); default is info.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("AQUATHRU_LOG");
    if (env == nullptr) return LogLevel::kInfo;
    if (std::strcmp(env, "error") == 0) return LogLevel::kError;
    if (std::strcmp(env, "debug") == 0) return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

inline void log_line(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  const char* tag = level == LogLevel::kError ? "error" : level == LogLevel::kInfo ? "info" : "debug";
  std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}

inline void log_info(const std::string& msg) { log_line(LogLevel::kInfo, msg); }
inline void log_debug(const std::string& msg) { log_line(LogLevel::kDebug, msg); }
inline void log_error(const std::string& msg) { log_line(LogLevel::kError, msg); }

}  // namespace aquathru
