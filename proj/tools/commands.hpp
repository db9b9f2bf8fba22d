#ifndef HTL_TOOLS_COMMANDS_HPP_
#define HTL_TOOLS_COMMANDS_HPP_

#include <iosfwd>

namespace htl::cli {

/// Entry point of the `htl` command line: generate | train | evaluate | tree | compare.
/// Returns the process exit code; diagnostics go to `err` as a single line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace htl::cli

#endif  // HTL_TOOLS_COMMANDS_HPP_
