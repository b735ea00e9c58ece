#pragma once

#include <string>

namespace pllhb::cli {

std::string version();

/// Entry point of the command-line tool. Returns 0 on success, 2 on invalid
/// arguments and 1 on numerical failure.
int run(int argc, const char* const* argv);

}  // namespace pllhb::cli
