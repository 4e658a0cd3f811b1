#pragma once

#include <ostream>

namespace spanens::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point for the `spanens` tool: run | eval | sweep | validate-pool.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spanens::cli
