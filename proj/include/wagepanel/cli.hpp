#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace wagepanel::cli {

std::string version();

/// Runs one command line (argv[0] is the program name). Returns the exit
/// code: 0 success, 1 validation error, 2 usage error.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace wagepanel::cli
