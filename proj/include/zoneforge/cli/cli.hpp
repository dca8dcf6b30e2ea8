#pragma once

#include <string>
#include <vector>

namespace zoneforge::cli {

/// Runs one CLI invocation. Exit codes: 0 success, 1 domain error (message on
/// stderr), 2 usage error.
int dispatch(const std::vector<std::string>& args);

} // namespace zoneforge::cli
