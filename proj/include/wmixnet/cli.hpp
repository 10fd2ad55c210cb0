#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wmixnet {

/// Command-line entry point. Returns 0 on success, 1 on runtime failures
/// and 2 on usage errors. Results go to --output (or `out`); diagnostics
/// and progress go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wmixnet
