#pragma once

#include <ostream>

namespace megphone {

// Entry point of the megphone command line tool. Returns the process exit code:
// 0 success, 1 unexpected failure, 2 configuration error, 3 data error,
// 4 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace megphone
