// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <gtest/gtest.h>

using namespace agc;
using namespace agc::testing;

namespace
{

std::vector<TraceEvent> blockchain_trace(std::size_t slots = 2)
{
    auto trace = TraceWriter {};
    auto manager = TaskManager(SchedulerConfig { slots }, &trace);
    auto const root = manager.submit_tree(plan_tree("blockchain/plan.json"));
    manager.run_tree(root, echo_runner());
    return trace.events();
}

const InvariantCheck& check(const ReplayReport& report, const std::string& name)
{
    for (auto const& c: report.checks)
        if (c.name == name)
            return c;
    throw std::runtime_error("no check " + name);
}

std::size_t index_of(const std::vector<TraceEvent>& events, EventKind kind, const std::string& task)
{
    for (std::size_t i = 0; i < events.size(); ++i)
        if (events[i].kind == kind && events[i].payload.value("task", "") == task)
            return i;
    throw std::runtime_error("event not found");
}

void renumber(std::vector<TraceEvent>& events)
{
    for (std::size_t i = 0; i < events.size(); ++i)
        events[i].seq = i + 1;
}

} // namespace

TEST(EventKind, NamesRoundTrip)
{
    for (auto kind: { EventKind::TreeSubmitted, EventKind::Dispatched, EventKind::AgentAction,
                      EventKind::DialogueEntry, EventKind::RoundSummary, EventKind::CompletionCheck,
                      EventKind::TaskCompleted, EventKind::TaskFailed, EventKind::TreeComplete,
                      EventKind::FinalAnswer })
        EXPECT_EQ(parse_event_kind(to_string(kind)), kind);
    EXPECT_THROW(parse_event_kind("bogus"), ParseError);
}

TEST(TraceWriter, AssignsSeqAndWritesJsonl)
{
    auto const path = std::filesystem::temp_directory_path() / "agc_trace_writer_test.jsonl";
    {
        auto writer = TraceWriter(path);
        writer.emit(EventKind::TreeSubmitted, { { "root", "t1" } });
        writer.emit(EventKind::TreeComplete, { { "root", "t1" } });
    }
    auto const events = read_trace(path);
    ASSERT_EQ(events.size(), 2u);
    EXPECT_EQ(events[0].seq, 1u);
    EXPECT_EQ(events[1].seq, 2u);
    EXPECT_FALSE(events[0].ts.empty());
    auto const line = to_jsonl_line(events[0]);
    EXPECT_EQ(line.rfind(R"({"seq":1,"ts":)", 0), 0u);
    std::filesystem::remove(path);
}

TEST(TraceWriter, StripTimestampsIsStable)
{
    auto a = blockchain_trace();
    auto b = blockchain_trace();
    EXPECT_NE(strip_timestamps(a).find(R"({"seq":1,"kind":"tree_submitted")"), std::string::npos);
    EXPECT_EQ(strip_timestamps(a).find("\"ts\""), std::string::npos);
    EXPECT_EQ(strip_timestamps(a), strip_timestamps(b));
}

TEST(BufferedSink, FlushesInOrder)
{
    auto buffer = BufferedSink {};
    buffer.emit(EventKind::AgentAction, { { "n", 1 } });
    buffer.emit(EventKind::RoundSummary, { { "n", 2 } });
    auto writer = TraceWriter {};
    writer.emit(EventKind::TreeSubmitted, {});
    buffer.flush_into(writer);
    auto const events = writer.events();
    ASSERT_EQ(events.size(), 3u);
    EXPECT_EQ(events[2].payload.at("n"), 2);
    EXPECT_EQ(events[2].seq, 3u);
}

TEST(ParseTrace, Errors)
{
    EXPECT_THROW(parse_trace(""), ParseError);
    EXPECT_THROW(parse_trace("\n\n"), ParseError);
    EXPECT_THROW(parse_trace("{not json}\n"), ParseError);
    EXPECT_THROW(parse_trace(R"({"seq":1,"kind":"nope","payload":{}})"), ParseError);
    EXPECT_THROW(read_trace("/missing/trace.jsonl"), ParseError);
}

TEST(VerifyTrace, CleanRunPasses)
{
    for (std::size_t slots = 1; slots <= 3; ++slots)
    {
        auto const report = verify_trace(blockchain_trace(slots));
        EXPECT_TRUE(report.ok());
        EXPECT_EQ(report.checks.size(), 5u);
        EXPECT_EQ(report.first_failure(), nullptr);
    }
}

TEST(VerifyTrace, CompletionBeforeDispatchIsCausalViolation)
{
    auto events = blockchain_trace();
    auto const dispatched = index_of(events, EventKind::Dispatched, "t3");
    auto const completed = index_of(events, EventKind::TaskCompleted, "t3");
    auto const moved = events[completed];
    events.erase(events.begin() + static_cast<std::ptrdiff_t>(completed));
    events.insert(events.begin() + static_cast<std::ptrdiff_t>(dispatched), moved);
    renumber(events);
    auto const report = verify_trace(events);
    ASSERT_FALSE(report.ok());
    auto const& causal = check(report, "causal_order");
    EXPECT_FALSE(causal.passed);
    EXPECT_EQ(causal.first_bad_seq, dispatched + 1);
}

TEST(VerifyTrace, NonMonotonicSeq)
{
    auto events = blockchain_trace();
    std::swap(events[3].seq, events[4].seq);
    auto const& monotonic = check(verify_trace(events), "seq_monotonic");
    EXPECT_FALSE(monotonic.passed);
    EXPECT_EQ(monotonic.first_bad_seq, events[4].seq);
}

TEST(VerifyTrace, EarlyDispatchIsTopologicalViolation)
{
    auto events = blockchain_trace(1);
    auto const dispatched = index_of(events, EventKind::Dispatched, "t5");
    auto const moved = events[dispatched];
    events.erase(events.begin() + static_cast<std::ptrdiff_t>(dispatched));
    events.insert(events.begin() + 1, moved);
    renumber(events);
    auto const report = verify_trace(events);
    EXPECT_FALSE(check(report, "topological_safety").passed);
    EXPECT_FALSE(check(report, "slot_bound").passed);
}

TEST(VerifyTrace, DuplicateCompletionIsExactlyOnceViolation)
{
    auto events = blockchain_trace();
    auto const completed = index_of(events, EventKind::TaskCompleted, "t2");
    events.insert(events.begin() + static_cast<std::ptrdiff_t>(completed) + 1, events[completed]);
    renumber(events);
    EXPECT_FALSE(check(verify_trace(events), "exactly_once").passed);
}

TEST(VerifyTrace, MissingTerminalIsExactlyOnceViolation)
{
    auto events = blockchain_trace();
    events.erase(events.begin() + static_cast<std::ptrdiff_t>(index_of(events, EventKind::TaskCompleted, "t1")));
    renumber(events);
    EXPECT_FALSE(check(verify_trace(events), "exactly_once").passed);
}
