#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "emokit/error.h"

namespace emokit::cli {

// 0 success, 1 internal, 2 usage, 3 config, 4 data, 5 backend, 6 transport.
int exit_code(ErrorCategory category);

// Runs one command line (args excludes the program name). Errors are
// reported on `err` and turned into an exit status; nothing escapes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace emokit::cli
