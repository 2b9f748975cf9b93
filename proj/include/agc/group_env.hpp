// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agc
{

/// Receiver value of a broadcast message.
inline constexpr std::string_view kAllGroupMembers = "ALL";

struct DialogueEntry
{
    std::string sender;
    std::string receiver; // agent id or kAllGroupMembers
    std::string content;
    int round = 0;
    std::uint64_t seq = 0; // assigned by update_environment

    friend bool operator==(const DialogueEntry&, const DialogueEntry&) = default;
};

struct CompletionVerdict
{
    bool complete = false;
    std::optional<std::string> result;

    friend bool operator==(const CompletionVerdict&, const CompletionVerdict&) = default;
};

/// Shared, append-only state of one group chat.
struct GroupEnv
{
    std::vector<DialogueEntry> entries;
    std::vector<std::string> summaries; // one per completed action turn
    std::vector<std::string> resources;
    std::optional<CompletionVerdict> verdict;
};

/// Loop position handed to the completion checker.
struct RoundInfo
{
    int round = 0;
    int max_rounds = 0;
    std::size_t agents = 0;
};

enum class QualityFlag
{
    Pass,
    LowQuality,
};

std::string_view to_string(QualityFlag flag) noexcept;

} // namespace agc
