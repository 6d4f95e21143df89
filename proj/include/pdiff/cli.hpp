// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pdiff::cli {

/// Runs one command line (without the program name) and returns the exit code:
/// 0 success, 1 usage, 2 data, 3 training or runtime.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pdiff::cli
