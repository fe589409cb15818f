#pragma once

#include <string_view>

namespace fdakrig {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

void setLogLevel(LogLevel level);
LogLevel logLevel();

// Thread-safe, line-buffered write to stderr.
void log(LogLevel level, std::string_view message);

inline void logWarn(std::string_view m) { log(LogLevel::Warn, m); }
inline void logInfo(std::string_view m) { log(LogLevel::Info, m); }

}  // namespace fdakrig
