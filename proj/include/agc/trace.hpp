// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <agc/error.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agc
{

enum class EventKind
{
    TreeSubmitted,
    Dispatched,
    AgentAction,
    DialogueEntry,
    RoundSummary,
    CompletionCheck,
    TaskCompleted,
    TaskFailed,
    TreeComplete,
    FinalAnswer,
};

std::string_view to_string(EventKind kind) noexcept;
EventKind parse_event_kind(std::string_view text);

struct TraceEvent
{
    std::uint64_t seq = 0;
    std::string ts; // RFC3339, excluded from determinism comparisons
    EventKind kind = EventKind::TreeSubmitted;
    nlohmann::json payload = nlohmann::json::object();
};

/// Destination for events. Implementations must accept calls from any thread.
class EventSink
{
  public:
    virtual ~EventSink() = default;
    virtual void emit(EventKind kind, nlohmann::json payload) = 0;
};

class NullSink final : public EventSink
{
  public:
    void emit(EventKind, nlohmann::json) override {}
};

/// Single serialization point of a run: assigns seq numbers, keeps the events
/// in memory and optionally appends them as JSONL to a file.
class TraceWriter final : public EventSink
{
  public:
    TraceWriter() = default;
    explicit TraceWriter(const std::filesystem::path& path);

    void emit(EventKind kind, nlohmann::json payload) override;

    std::vector<TraceEvent> events() const;

  private:
    mutable std::mutex mutex_;
    std::vector<TraceEvent> events_;
    std::optional<std::ofstream> file_;
};

/// Collects events of one group chat so the coordinator can publish them
/// atomically, in a deterministic position of the trace.
class BufferedSink final : public EventSink
{
  public:
    void emit(EventKind kind, nlohmann::json payload) override;

    /// Moves every buffered event into `target`, in emission order.
    void flush_into(EventSink& target);

  private:
    std::mutex mutex_;
    std::vector<std::pair<EventKind, nlohmann::json>> pending_;
};

std::string current_timestamp();

std::string to_jsonl_line(const TraceEvent& event);
TraceEvent parse_trace_line(std::string_view line, std::size_t line_number);

/// Throws ParseError on unreadable files, malformed lines or an empty trace.
std::vector<TraceEvent> read_trace(const std::filesystem::path& path);
std::vector<TraceEvent> parse_trace(std::string_view text);

/// JSONL rendering with every `ts` field removed.
std::string strip_timestamps(const std::vector<TraceEvent>& events);

struct InvariantCheck
{
    std::string name;
    bool passed = true;
    std::optional<std::uint64_t> first_bad_seq;
    std::string detail;
};

struct ReplayReport
{
    std::vector<InvariantCheck> checks;

    bool ok() const;
    const InvariantCheck* first_failure() const;
};

/// Re-validates a trace without executing anything: seq monotonicity, causal
/// order, slot bound, topological safety and exactly-once termination.
ReplayReport verify_trace(const std::vector<TraceEvent>& events);

} // namespace agc
