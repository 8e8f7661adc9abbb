#pragma once

#include <string>
#include <vector>

namespace scoredist::cli {

// Entry point behind the scoredist binary. `args` excludes the program
// name. Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
// failure.
int run(const std::vector<std::string>& args);

}  // namespace scoredist::cli
