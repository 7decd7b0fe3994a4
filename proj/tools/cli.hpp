#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ngmix {

/// Runs one `ngmix` subcommand. Returns 0 on success, 1 on a runtime error
/// and 2 on a usage error.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ngmix
