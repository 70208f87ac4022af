#pragma once

#include <functional>
#include <string>

namespace dopocat {

using WarningHandler = std::function<void(const std::string&)>;

/// Replaces the process-wide warning sink (default: stderr). Pass an empty
/// handler to restore the default.
void set_warning_handler(WarningHandler handler);

void warn(const std::string& message);

}  // namespace dopocat
