// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace prunesearch {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitInput = 3,
  kExitInfeasible = 4,
  kExitNumeric = 5,
};

/// Maps a library exception to the process exit code.
int exit_code_for(const std::exception& e);

/// Runs the command line `argv` (argv[0] is the program name). Results go to
/// `out`; progress lines and the single-line error record go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace prunesearch
