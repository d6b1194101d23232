#ifndef MLM_TOOLS_CLI_HPP
#define MLM_TOOLS_CLI_HPP

#include <iosfwd>

namespace mlm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `mlm` tool. Subcommands: fit, predict, select-refs,
/// benchmark, gen-s1.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mlm::cli

#endif
