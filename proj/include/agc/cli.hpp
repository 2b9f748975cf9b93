// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <agc/error.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace agc::cli
{

enum ExitCode : int
{
    kSuccess = 0,
    kConfigError = 2,
    kPipelineError = 3,
    kInvariantViolation = 4,
};

/// Exit code for an error escaping a subcommand.
int exit_code_for(const Error& error) noexcept;

/// Entry point of the `agc` tool; `args` excludes the program name.
/// Subcommands: run, replay, passk, passrates, ablate.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace agc::cli
