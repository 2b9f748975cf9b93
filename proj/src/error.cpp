// SPDX-License-Identifier: Apache-2.0
#include <agc/error.hpp>

#include <fmt/core.h>

namespace agc
{

std::string_view errc_name(Errc code) noexcept
{
    switch (code)
    {
        case Errc::EmptyDescription: return "EmptyDescription";
        case Errc::UnknownParent: return "UnknownParent";
        case Errc::UnknownTask: return "UnknownTask";
        case Errc::SelfLink: return "SelfLink";
        case Errc::CycleDetected: return "CycleDetected";
        case Errc::Reparent: return "Reparent";
        case Errc::IllegalTransition: return "IllegalTransition";
        case Errc::NotARoot: return "NotARoot";
        case Errc::InvalidForest: return "InvalidForest";
        case Errc::ScriptExhausted: return "ScriptExhausted";
        case Errc::TransportError: return "TransportError";
        case Errc::MalformedResponse: return "MalformedResponse";
        case Errc::ParseError: return "ParseError";
        case Errc::InvalidMessages: return "InvalidMessages";
        case Errc::DecompositionFailed: return "DecompositionFailed";
        case Errc::CyclicPlan: return "CyclicPlan";
        case Errc::DanglingDep: return "DanglingDep";
        case Errc::InvalidPlan: return "InvalidPlan";
        case Errc::TreeIncomplete: return "TreeIncomplete";
        case Errc::DuplicateIds: return "DuplicateIds";
        case Errc::NotExecuting: return "NotExecuting";
        case Errc::VerdictUnparseable: return "VerdictUnparseable";
        case Errc::Deadlock: return "Deadlock";
        case Errc::RosterMismatch: return "RosterMismatch";
        case Errc::NoEngines: return "NoEngines";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::UnknownTarget: return "UnknownTarget";
        case Errc::NoResult: return "NoResult";
        case Errc::InvalidInput: return "InvalidInput";
        case Errc::InvariantViolation: return "InvariantViolation";
        case Errc::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message): std::runtime_error(message), code_(code)
{
}

ParseError::ParseError(const std::string& message, std::size_t line, std::size_t column):
    Error(Errc::ParseError,
          line == 0 ? message : fmt::format("{} (line {}, column {})", message, line, column)),
    line_(line),
    column_(column)
{
}

} // namespace agc
