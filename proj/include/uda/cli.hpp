#pragma once

#include <iosfwd>

namespace uda {

/// Entry point for `uda <command> [flags]`. Commands: gen-data, train, eval,
/// mi-sanity, bound-check, grad-check, plot. Returns the process exit code;
/// failures print one `error: ...` line to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace uda
