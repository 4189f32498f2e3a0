#pragma once

#include <iosfwd>

namespace partforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitFatal = 2;

// Parses argv and runs one subcommand. Reports go to `out`; usage, errors and
// logs go to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace partforge::cli
