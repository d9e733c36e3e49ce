#pragma once

#include <string>

namespace slidemil {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Level comes from SLIDE_MIL_LOG (error|info|debug), default info.
LogLevel log_level();

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace slidemil
