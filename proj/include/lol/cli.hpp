// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lol {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,    ///< a check failed or an unexpected error occurred
  kExitUsage = 2,      ///< bad flags, missing inputs, unsupported sizes
  kExitNumerical = 3,  ///< non-finite values during training
};

/// Runs one `lol` command. `args` excludes the program name. Machine-readable
/// results go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lol
