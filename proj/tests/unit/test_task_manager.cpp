// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace agc;
using namespace agc::testing;

namespace
{

Errc code_of(const std::function<void()>& fn)
{
    try
    {
        fn();
    }
    catch (const Error& e)
    {
        return e.code();
    }
    return Errc::InvariantViolation;
}

std::vector<std::string> dispatch_order(const std::vector<TraceEvent>& events)
{
    auto order = std::vector<std::string> {};
    for (auto const& event: events)
        if (event.kind == EventKind::Dispatched)
            order.push_back(event.payload.at("desc").get<std::string>());
    return order;
}

} // namespace

TEST(SchedulerConfig, RequiresOneSlot)
{
    EXPECT_EQ(code_of([] { TaskManager(SchedulerConfig { 0 }); }), Errc::InvalidConfig);
}

TEST(SubmitTree, RejectsNonWaitingAndMultiRootFragments)
{
    auto manager = TaskManager {};
    auto fresh = TaskForest {};
    fresh.new_task("not waiting");
    EXPECT_EQ(code_of([&] { manager.submit_tree(fresh); }), Errc::InvalidForest);

    auto two = TaskForest {};
    two.transition(two.new_task("a"), TaskState::Waiting);
    two.transition(two.new_task("b"), TaskState::Waiting);
    EXPECT_EQ(code_of([&] { manager.submit_tree(two); }), Errc::InvalidForest);

    auto const tree = plan_tree("blockchain/plan.json");
    manager.submit_tree(tree);
    EXPECT_EQ(code_of([&] { manager.submit_tree(tree); }), Errc::DuplicateIds);
    EXPECT_NO_THROW(manager.submit_tree(plan_tree("blockchain/plan.json", manager.next_counter())));
}

TEST(ScheduleStep, FillsFreeSlotsInIdOrder)
{
    auto trace = TraceWriter {};
    auto manager = TaskManager(SchedulerConfig { 2 }, &trace);
    manager.submit_tree(plan_tree("blockchain/plan.json"));
    auto const tickets = manager.schedule_step();
    ASSERT_EQ(tickets.size(), 2u);
    EXPECT_EQ(tickets[0].task_id, TaskId { 2 });
    EXPECT_EQ(tickets[1].task_id, TaskId { 3 });
    EXPECT_EQ(tickets[0].group_slot, 0u);
    EXPECT_EQ(tickets[1].group_slot, 1u);
    EXPECT_TRUE(tickets[0].context.empty());
    EXPECT_TRUE(manager.schedule_step().empty());
    EXPECT_EQ(manager.outstanding(), 2u);

    manager.on_task_complete(TaskId { 2 }, CompletionVerdict { true, "survey" });
    auto const next = manager.schedule_step();
    ASSERT_EQ(next.size(), 1u);
    EXPECT_EQ(next[0].task_id, TaskId { 4 });
    EXPECT_EQ(next[0].group_slot, 0u);
}

TEST(OnTaskComplete, ReturnsNewlyReadyAndEmitsTreeComplete)
{
    auto trace = TraceWriter {};
    auto manager = TaskManager(SchedulerConfig { 3 }, &trace);
    auto const root = manager.submit_tree(plan_tree("blockchain/plan.json"));
    EXPECT_EQ(code_of([&] { manager.on_task_complete(TaskId { 2 }, CompletionVerdict { true, "x" }); }),
              Errc::NotExecuting);

    manager.schedule_step();
    EXPECT_TRUE(manager.on_task_complete(TaskId { 2 }, CompletionVerdict { true, "a" }).empty());
    EXPECT_TRUE(manager.on_task_complete(TaskId { 3 }, FailureNotice { "no cases" }).empty());
    auto const ready = manager.on_task_complete(TaskId { 4 }, CompletionVerdict { true, "c" }, QualityFlag::LowQuality);
    EXPECT_EQ(ready, (std::vector<TaskId> { TaskId { 5 }, TaskId { 6 } }));

    EXPECT_EQ(manager.forest().task(TaskId { 3 }).state, TaskState::Failure);
    EXPECT_EQ(manager.forest().task(TaskId { 3 }).result, "no cases");
    EXPECT_EQ(code_of([&] { manager.on_task_complete(TaskId { 2 }, CompletionVerdict { true, "x" }); }),
              Errc::NotExecuting);

    manager.run_tree(root, echo_runner());
    auto completes = 0;
    for (auto const& event: trace.events())
        completes += event.kind == EventKind::TreeComplete ? 1 : 0;
    EXPECT_EQ(completes, 1);
    EXPECT_TRUE(manager.forest().tree_complete(root));
}

TEST(OnTaskComplete, IncompleteVerdictIsRejected)
{
    auto manager = TaskManager {};
    manager.submit_tree(plan_tree("blockchain/plan.json"));
    manager.schedule_step();
    EXPECT_EQ(code_of([&] { manager.on_task_complete(TaskId { 2 }, CompletionVerdict { false, {} }); }),
              Errc::InvalidInput);
}

TEST(Background, ContextListsEveryTerminalChild)
{
    auto manager = TaskManager(SchedulerConfig { 3 });
    manager.submit_tree(plan_tree("blockchain/plan.json"));
    manager.schedule_step();
    manager.on_task_complete(TaskId { 2 }, CompletionVerdict { true, "survey result" });
    manager.on_task_complete(TaskId { 3 }, CompletionVerdict { true, "case result" });
    manager.on_task_complete(TaskId { 4 }, CompletionVerdict { true, "market result" });
    auto const tickets = manager.schedule_step();
    ASSERT_EQ(tickets.size(), 2u);
    auto const expected = std::string("BACKGROUND KNOWLEDGE:\n- [Technology Survey]: survey result\n"
                                      "- [Case Collection]: case result\n- [Market Analysis]: market result");
    EXPECT_EQ(tickets[0].context, expected);
    EXPECT_EQ(tickets[1].context, expected);
    EXPECT_EQ(manager.ticket(tickets[0].task_id)->context, expected);
    EXPECT_EQ(render_background({}), "");
}

TEST(RunTree, SingleSlotRunsSerially)
{
    auto trace = TraceWriter {};
    auto manager = TaskManager(SchedulerConfig { 1 }, &trace);
    auto const root = manager.submit_tree(plan_tree("visualization/plan.json"));
    manager.run_tree(root, echo_runner());
    EXPECT_EQ(dispatch_order(trace.events()),
              (std::vector<std::string> { "Module Interface Design", "File Parsing Implementation",
                                          "Data Processing Implementation", "Data Display Implementation",
                                          "Interactive Function Implementation", "Testing and Verification",
                                          "Develop an interactive data visualization tool" }));
    auto const events = trace.events();
    for (std::size_t i = 1; i < events.size(); ++i)
    {
        if (events[i].kind != EventKind::Dispatched)
            continue;
        auto const& prev = events[i - 1];
        EXPECT_TRUE(prev.kind == EventKind::TreeSubmitted || prev.kind == EventKind::TaskCompleted);
    }
    EXPECT_TRUE(verify_trace(events).ok());
}

TEST(RunTree, RunnerExceptionsBecomeFailures)
{
    auto trace = TraceWriter {};
    auto manager = TaskManager(SchedulerConfig { 2 }, &trace);
    auto const root = manager.submit_tree(plan_tree("blockchain/plan.json"));
    manager.run_tree(root, [](const DispatchTicket&, const Task& task, EventSink&) -> GroupReport {
        if (task.desc == "Case Collection")
            throw Error(Errc::ScriptExhausted, "no script");
        return { CompletionVerdict { true, "ok" }, std::nullopt };
    });
    auto const& failed = manager.forest().task(find_task(manager.forest(), "Case Collection"));
    EXPECT_EQ(failed.state, TaskState::Failure);
    EXPECT_EQ(failed.result, "ScriptExhausted: no script");
    EXPECT_TRUE(manager.forest().tree_complete(root));
    EXPECT_TRUE(verify_trace(trace.events()).ok());
}

TEST(RunTree, DeadlockWhenSlotsAreHeldElsewhere)
{
    auto manager = TaskManager(SchedulerConfig { 1 });
    manager.submit_tree(plan_tree("blockchain/plan.json"));
    auto const second = manager.submit_tree(plan_tree("blockchain/plan.json", manager.next_counter()));
    manager.schedule_step();
    EXPECT_EQ(code_of([&] { manager.run_tree(second, echo_runner()); }), Errc::Deadlock);
    EXPECT_EQ(code_of([&] { manager.run_tree(TaskId { 2 }, echo_runner()); }), Errc::NotARoot);
}

TEST(RunTree, RandomTreesRespectTopologyAndSlots)
{
    auto rng = std::mt19937_64(99);
    for (auto round = 0; round < 100; ++round)
    {
        auto const slots = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
        auto trace = TraceWriter {};
        auto manager = TaskManager(SchedulerConfig { slots }, &trace);
        auto const plan = random_plan(rng, 14);
        auto const root = manager.submit_tree(plan_to_tree(plan, { "q", "q" }));
        manager.run_tree(root, echo_runner());
        ASSERT_EQ(topological_violation(trace.events()), "");
        ASSERT_TRUE(verify_trace(trace.events()).ok());
    }
}

TEST(ParseVerdict, Schema)
{
    EXPECT_EQ(parse_verdict(R"({"complete":true,"result":"r"})"), (CompletionVerdict { true, "r" }));
    EXPECT_EQ(parse_verdict(R"({"complete":false,"result":"ignored"})"), (CompletionVerdict { false, {} }));
    EXPECT_THROW(parse_verdict(R"({"complete":true})"), ParseError);
    EXPECT_THROW(parse_verdict(R"({"complete":true,"result":""})"), ParseError);
    EXPECT_THROW(parse_verdict(R"({"complete":"yes"})"), ParseError);
    EXPECT_THROW(parse_verdict("maybe"), ParseError);
}

TEST(CheckTaskCompletion, OneRepairThenUnparseable)
{
    auto calls = 0;
    auto gateway = Gateway {};
    gateway.register_engine("judge", std::make_shared<FunctionEngine>([&](auto) {
                                ++calls;
                                return std::string("not a verdict");
                            }));
    auto task = Task {};
    task.id = TaskId { 3 };
    task.desc = "judge me";
    EXPECT_EQ(code_of([&] {
                  check_task_completion(GroupEnv {}, task, { 1, 3, 2 }, gateway, EngineSpec::scripted("judge"));
              }),
              Errc::VerdictUnparseable);
    EXPECT_EQ(calls, 2);
}

TEST(CheckTaskCompletion, PromptCarriesRoundPosition)
{
    auto seen = std::string {};
    auto gateway = Gateway {};
    gateway.register_engine("judge", std::make_shared<FunctionEngine>([&](std::span<const ChatMessage> m) {
                                seen = canonical_prompt(m);
                                return std::string(R"({"complete":true,"result":"ok"})");
                            }));
    auto task = Task {};
    task.id = TaskId { 3 };
    task.desc = "judge me";
    auto env = GroupEnv {};
    env.summaries = { "first", "second" };
    auto const verdict = check_task_completion(env, task, { 2, 4, 5 }, gateway, EngineSpec::scripted("judge"));
    EXPECT_TRUE(verdict.complete);
    EXPECT_NE(seen.find("COMPLETION CHECK | TASK: judge me"), std::string::npos);
    EXPECT_NE(seen.find("ROUND 2 OF 4 | AGENTS 5"), std::string::npos);
    EXPECT_NE(seen.find("1. first\n2. second"), std::string::npos);
}
