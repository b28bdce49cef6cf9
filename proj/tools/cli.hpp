#pragma once

#include <iosfwd>

namespace hpin::cli {

/// Exit codes: 0 all gates pass, 1 a gate failed, 2 usage or domain error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hpin::cli
