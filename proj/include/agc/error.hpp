// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace agc
{

/// Error kinds surfaced by the engine. The names are part of the CLI contract:
/// failures print `<name>: <message>`.
enum class Errc
{
    // task model
    EmptyDescription,
    UnknownParent,
    UnknownTask,
    SelfLink,
    CycleDetected,
    Reparent,
    IllegalTransition,
    NotARoot,
    InvalidForest,
    // llm gateway
    ScriptExhausted,
    TransportError,
    MalformedResponse,
    ParseError,
    InvalidMessages,
    // query manager
    DecompositionFailed,
    CyclicPlan,
    DanglingDep,
    InvalidPlan,
    TreeIncomplete,
    // task manager
    DuplicateIds,
    NotExecuting,
    VerdictUnparseable,
    Deadlock,
    // group runtime
    RosterMismatch,
    NoEngines,
    InvalidConfig,
    UnknownTarget,
    NoResult,
    // evalkit / cli
    InvalidInput,
    InvariantViolation,
    ConfigError,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error
{
  public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }
    std::string_view name() const noexcept { return errc_name(code_); }

  private:
    Errc code_;
};

/// ParseError with the offending location; line/column are 1-based, 0 when unknown
/// (e.g. for I/O failures).
class ParseError : public Error
{
  public:
    ParseError(const std::string& message, std::size_t line = 0, std::size_t column = 0);

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

  private:
    std::size_t line_;
    std::size_t column_;
};

} // namespace agc
