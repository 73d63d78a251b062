#pragma once

#include <cstdio>
#include <string>

namespace topp3 {

// Verbosity is read once from the TOPP3_LOG environment variable:
// "quiet" (default), "info", "debug".
enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level();

void log_info(const std::string& msg);
void log_debug(const std::string& msg);
void log_warn(const std::string& msg);  // always printed to stderr

// snprintf-based formatting with 12 significant digits; used by every file
// writer so reruns are byte-identical.
std::string fmt_g12(double value);

}  // namespace topp3
