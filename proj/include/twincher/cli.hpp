#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace twincher::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitProtocolFailure = 1;
inline constexpr int kExitConfigError = 2;

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace twincher::cli
