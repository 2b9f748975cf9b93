// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <agc/error.hpp>

#include <nlohmann/json_fwd.hpp>

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace agc
{

/// Forest-assigned task identifier, rendered as `t<counter>`. Ordering is by counter.
struct TaskId
{
    std::uint64_t value = 0;

    auto operator<=>(const TaskId&) const = default;

    std::string str() const;
    static TaskId parse(std::string_view text); // throws ParseError
};

/// Serialized value of a root task's father.
inline constexpr std::string_view kRootFatherSentinel = "Nan";

enum class TaskState
{
    Initialization,
    Waiting,
    Execution,
    Completion,
    Failure,
};

inline constexpr TaskState kAllTaskStates[] = {
    TaskState::Initialization, TaskState::Waiting, TaskState::Execution,
    TaskState::Completion,     TaskState::Failure,
};

std::string_view to_string(TaskState state) noexcept;
TaskState parse_task_state(std::string_view text);

constexpr bool is_terminal(TaskState state) noexcept
{
    return state == TaskState::Completion || state == TaskState::Failure;
}

/// Initialization→Waiting, Waiting→Execution, Execution→Completion, Execution→Failure.
constexpr bool is_legal_transition(TaskState from, TaskState to) noexcept
{
    switch (from)
    {
        case TaskState::Initialization: return to == TaskState::Waiting;
        case TaskState::Waiting: return to == TaskState::Execution;
        case TaskState::Execution: return to == TaskState::Completion || to == TaskState::Failure;
        default: return false;
    }
}

class IllegalTransitionError : public Error
{
  public:
    IllegalTransitionError(TaskState from, TaskState to);

    TaskState from() const noexcept { return from_; }
    TaskState to() const noexcept { return to_; }

  private:
    TaskState from_;
    TaskState to_;
};

struct Task
{
    TaskId id;
    std::string desc;
    std::optional<TaskId> father; // absent for roots
    std::vector<TaskId> sons;     // ascending; a task's prerequisites
    std::optional<std::string> result;
    TaskState state = TaskState::Initialization;

    bool is_root() const noexcept { return !father.has_value(); }
    bool is_leaf() const noexcept { return sons.empty(); }

    friend bool operator==(const Task&, const Task&) = default;
};

/// Returns a copy of `task` moved to `to`. Terminal states require `result`;
/// other states forbid it.
Task transition(Task task, TaskState to, std::optional<std::string> result = std::nullopt);

struct ChildResult
{
    TaskId id;
    std::string desc;
    std::string result;
};

/// All task trees plus the bidirectional parent/child index.
///
/// `father` is the spanning-tree parent of a task. `sons` lists every
/// prerequisite of a task: it always contains the children whose father is
/// this task, and may also contain shared prerequisites (tasks that feed more
/// than one parent inside the same tree). The sons relation is acyclic.
class TaskForest
{
  public:
    explicit TaskForest(std::uint64_t first_counter = 1);

    TaskId new_task(std::string desc, std::optional<TaskId> father = std::nullopt);

    /// Installs child as a tree child of parent.
    void link(TaskId parent, TaskId child);

    /// Adds `child` to `parent.sons` without changing child's father. Used for
    /// prerequisites shared by several tasks.
    void add_prerequisite(TaskId parent, TaskId child);

    void transition(TaskId id, TaskState to, std::optional<std::string> result = std::nullopt);

    bool contains(TaskId id) const { return tasks_.contains(id); }
    const Task& task(TaskId id) const;
    const std::map<TaskId, Task>& tasks() const noexcept { return tasks_; }
    const std::set<TaskId>& roots() const noexcept { return roots_; }
    std::size_t size() const noexcept { return tasks_.size(); }
    bool empty() const noexcept { return tasks_.empty(); }

    /// Next counter value new_task would use.
    std::uint64_t next_counter() const noexcept { return next_counter_; }

    /// Waiting tasks whose sons are all in Completion or Failure, ascending id.
    std::vector<TaskId> ready_tasks() const;

    bool tree_complete(TaskId root) const;

    /// Root of the tree containing `id` (follows father links).
    TaskId root_of(TaskId id) const;

    /// Every task of the tree rooted at `root`, ascending id.
    std::vector<TaskId> tree_members(TaskId root) const;

    /// (desc, result) of every terminal son, ascending id. Failed sons carry
    /// their failure notice as the result.
    std::vector<ChildResult> child_results(TaskId parent) const;

    /// True when `to` is reachable from `from` along sons edges.
    bool reaches(TaskId from, TaskId to) const;

    /// Copies every task of `fragment` into this forest.
    /// Throws DuplicateIds when an id is already present.
    void merge(const TaskForest& fragment);

    /// Checks every structural invariant; throws InvalidForest on the first violation.
    void validate() const;

    nlohmann::json to_json() const;
    static TaskForest from_json(const nlohmann::json& doc); // throws ParseError / InvalidForest

    friend bool operator==(const TaskForest& a, const TaskForest& b)
    {
        return a.tasks_ == b.tasks_ && a.roots_ == b.roots_;
    }

  private:
    Task& mutable_task(TaskId id);
    static void insert_sorted(std::vector<TaskId>& ids, TaskId id);

    std::map<TaskId, Task> tasks_;
    std::set<TaskId> roots_;
    std::uint64_t next_counter_;
};

nlohmann::json task_to_json(const Task& task);

} // namespace agc
