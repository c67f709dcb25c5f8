#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace modernkit {

/// Runs one command. `args` excludes the program name. Returns 0 on
/// success, 1 for usage and validation errors, 2 for engine errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace modernkit
