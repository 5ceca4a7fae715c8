#pragma once

#include <iosfwd>

namespace rcnds::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDiverged = 4;

/// Runs one `rcnds` subcommand: build, probe, train, eval, finetune or
/// inspect. Results go to `out`, usage and error text to `err`. Never throws.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rcnds::cli
