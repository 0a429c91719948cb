#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace skycatch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitInternal = 2;

// Parses argv and runs one subcommand; returns the process exit code.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skycatch::cli
