#pragma once

#include <string>

namespace droopsim::log {

/// Configures the stderr logger. Level comes from DROOPSIM_LOG
/// (trace, debug, info, warn, error, off); default warn.
void init();

void debug(const std::string& msg);
void info(const std::string& msg);
void warn(const std::string& msg);

}  // namespace droopsim::log
