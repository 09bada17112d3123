#ifndef DGNAEA_CLI_HPP
#define DGNAEA_CLI_HPP

#include <ostream>

namespace dgnaea {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point of the `dgnaea` tool: build-graph, gen-synthetic, train,
/// evaluate, ablate, analyze. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace dgnaea

#endif // DGNAEA_CLI_HPP
