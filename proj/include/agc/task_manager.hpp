// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <agc/group_env.hpp>
#include <agc/llm.hpp>
#include <agc/task.hpp>
#include <agc/trace.hpp>

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace agc
{

struct DispatchTicket
{
    TaskId task_id;
    std::string context; // rendered background knowledge
    std::size_t group_slot = 0;
};

struct SchedulerConfig
{
    std::size_t max_parallel_groups = 1;

    void validate() const;
};

struct FailureNotice
{
    std::string notice;
};

using TaskOutcome = std::variant<CompletionVerdict, FailureNotice>;

/// What a group execution hands back to the coordinator.
struct GroupReport
{
    TaskOutcome outcome;
    std::optional<QualityFlag> quality;
};

/// Runs one dispatched task to an outcome. Invoked on worker threads; it must
/// only touch its arguments. Exceptions become task failures.
using GroupRunner = std::function<GroupReport(const DispatchTicket&, const Task&, EventSink&)>;

inline constexpr std::string_view kBackgroundHeader = "BACKGROUND KNOWLEDGE:";

/// `BACKGROUND KNOWLEDGE:` followed by one `- [<desc>]: <result>` line per
/// child; empty when there are no children.
std::string render_background(const std::vector<ChildResult>& children);

/// Single coordinator owning every forest mutation.
class TaskManager
{
  public:
    explicit TaskManager(SchedulerConfig config = {}, EventSink* sink = nullptr);

    /// Registers a tree fragment whose tasks are all Waiting. `details` is merged
    /// into the tree_submitted event payload.
    TaskId submit_tree(const TaskForest& fragment, nlohmann::json details = nlohmann::json::object());

    /// Moves up to (free slots) ready tasks to Execution, ascending id. With
    /// `root`, only tasks of that tree are considered.
    std::vector<DispatchTicket> schedule_step(std::optional<TaskId> root = std::nullopt);

    /// Retires the task's ticket and records its terminal state. Returns the
    /// tasks that became ready as a consequence.
    std::vector<TaskId> on_task_complete(TaskId id, const TaskOutcome& outcome,
                                         std::optional<QualityFlag> quality = std::nullopt);

    /// Drives dispatch / group execution / completion until the tree is
    /// complete. Groups run concurrently up to max_parallel_groups; completions
    /// are applied in dispatch order so traces are reproducible.
    void run_tree(TaskId root, const GroupRunner& runner);

    const TaskForest& forest() const noexcept { return forest_; }
    const SchedulerConfig& config() const noexcept { return config_; }
    std::size_t outstanding() const noexcept { return tickets_.size(); }
    std::optional<DispatchTicket> ticket(TaskId id) const;

    /// Counter to use for the next fragment so ids never collide.
    std::uint64_t next_counter() const noexcept { return forest_.next_counter(); }

  private:
    std::size_t acquire_slot();

    SchedulerConfig config_;
    NullSink null_sink_;
    EventSink* sink_;
    TaskForest forest_;
    std::map<TaskId, DispatchTicket> tickets_;
    std::set<std::size_t> busy_slots_;
};

/// Parses `{"complete":bool,"result":string}`; complete=true requires a result.
CompletionVerdict parse_verdict(std::string_view reply);

/// Asks the engine whether the group has finished `task`, given the round
/// summaries. One repair retry; throws VerdictUnparseable afterwards.
CompletionVerdict check_task_completion(const GroupEnv& env, const Task& task, const RoundInfo& round,
                                        Gateway& gateway, const EngineSpec& engine);

} // namespace agc
