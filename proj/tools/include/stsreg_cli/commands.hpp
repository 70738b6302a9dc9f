#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace stsreg::cli {

/// Process exit codes.
enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

/// Runs the command line `args` (without the program name), writing normal
/// output to `out` and diagnostics to `err`. Never throws.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

/// Output directory precedence: the --out flag, then STSREG_OUT_DIR, then the config.
inline constexpr const char* kOutDirEnv = "STSREG_OUT_DIR";

}  // namespace stsreg::cli
