#pragma once

#include <functional>
#include <string>

namespace tsnet {

enum class LogLevel { Debug = 0, Info = 1, Warning = 2, Error = 3 };

using LogSink = std::function<void(LogLevel, const std::string&)>;

/// Replaces the process-wide sink; an empty sink restores the default
/// (Info and above to stderr).
void set_log_sink(LogSink sink);
void log(LogLevel level, const std::string& message);

}  // namespace tsnet
