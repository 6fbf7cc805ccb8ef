#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cid {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotIdentifiable = 2;
inline constexpr int kExitRejected = 3;

/// Runs one command line (without the program name). Normal output goes to
/// `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cid
