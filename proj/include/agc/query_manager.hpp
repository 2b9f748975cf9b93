// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <agc/llm.hpp>
#include <agc/task.hpp>

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace agc
{

struct UserQuery
{
    std::string text;
    std::string query_id;
};

struct PlanNode
{
    std::string local_id;
    std::string desc;
    std::vector<std::string> deps;

    friend bool operator==(const PlanNode&, const PlanNode&) = default;
};

/// Flat decomposition of a query: nodes with plan-local ids and explicit deps.
struct TaskPlan
{
    std::string root_desc;
    std::vector<PlanNode> nodes;

    /// Throws InvalidPlan (empty/duplicate ids, empty descriptions),
    /// DanglingDep or CyclicPlan.
    void validate() const;

    friend bool operator==(const TaskPlan&, const TaskPlan&) = default;
};

/// Parses `{"root":"...","tasks":[{"id":"a","desc":"...","deps":["b"]}]}` and
/// validates the result.
TaskPlan parse_plan(std::string_view reply);
nlohmann::json plan_to_json(const TaskPlan& plan);

class DecompositionFailed : public Error
{
  public:
    DecompositionFailed(const std::string& message, std::string last_reply);

    const std::string& last_reply() const noexcept { return last_reply_; }

  private:
    std::string last_reply_;
};

struct DecomposeOptions
{
    int max_repairs = 2;
    int max_nodes = 8;
    std::string run_tag; // appended to the prompt header when non-empty
};

struct Decomposition
{
    TaskPlan plan;
    int attempts = 0;
    std::vector<std::string> repair_errors; // one per repair round
};

/// Asks the engine for a plan; on parse failure re-prompts with the error
/// appended, at most max_repairs times.
Decomposition decompose(const UserQuery& query, Gateway& gateway, const EngineSpec& engine,
                        const DecomposeOptions& options = {});

/// Builds the task tree of a plan: a synthesized root plus one task per node,
/// where a node's deps become its sons and undepended nodes hang off the root.
/// Ids start at `first_counter`. All tasks end in Waiting.
TaskForest plan_to_tree(const TaskPlan& plan, const UserQuery& query, std::uint64_t first_counter = 1);

struct AnswerSource
{
    TaskId task;
    std::string excerpt;
};

struct FinalAnswer
{
    std::string query_id;
    std::string answer;
    std::vector<AnswerSource> sources;
};

inline constexpr std::size_t kSourceExcerptLength = 160;

/// Integrates a finished tree into the final answer. Throws TreeIncomplete.
FinalAnswer integrate(const TaskForest& forest, TaskId root, const UserQuery& query, Gateway& gateway,
                      const EngineSpec& engine);

} // namespace agc
