#pragma once

#include <ostream>

namespace fsmean::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kEstimationError = 3;
inline constexpr int kDataError = 4;

/// Entry point of the `fsmean` tool.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fsmean::cli
