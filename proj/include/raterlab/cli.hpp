#pragma once

#include <string>
#include <vector>

namespace raterlab::cli {

/// Runs one command line (argv[0] included). Returns 0 on success, 1 on a
/// domain error and 2 on a usage error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace raterlab::cli
