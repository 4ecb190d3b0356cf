// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fama
{

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitProvider = 3;

/// Entry point of the `fama` command. `args` excludes the program name.
/// Subcommands: run, analyze, mitigate, report, ablate-memory, validate.
[[nodiscard]] int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace fama
