#pragma once

#include <iosfwd>

namespace ser::cli {

/// Runs the ser command line. Results go to out, logs and usage errors to err.
/// Returns 0 on success, 1 for usage errors, 2 for runtime failures.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ser::cli
