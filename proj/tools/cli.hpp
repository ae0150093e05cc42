#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace harsanyi {

// Runs the harsanyinet command line. `args` excludes the program name.
// Returns 0 on success, 1 on a runtime failure (one-line diagnostic on
// `err`), 2 on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace harsanyi
