#pragma once

#include <ostream>

namespace flakeprobe {

/// Exit codes: 0 completed (any verdict), 1 usage error, 2 internal error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flakeprobe
