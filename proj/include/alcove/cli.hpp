#pragma once

#include <iosfwd>

namespace alcove {

// Entry point of the `alcove` tool. Exit codes: 0 success, 1 runtime
// failure, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace alcove
