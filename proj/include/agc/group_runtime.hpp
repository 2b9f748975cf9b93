// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <agc/group_env.hpp>
#include <agc/llm.hpp>
#include <agc/task.hpp>
#include <agc/trace.hpp>

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace agc
{

struct Agent
{
    std::string agent_id;
    EngineSpec engine;
    std::string scratch; // identity text given to the engine
    std::string object;  // human-readable function description
    std::vector<std::string> history;
};

/// Work unit bound to one task. `used_agents` is the fixed speaking order.
struct Group
{
    std::string progress_id;
    TaskId task_id;
    std::string task_desc;
    std::vector<Agent> used_agents;
    std::vector<std::string> resources;

    const Agent* find(std::string_view agent_id) const;
};

struct ChatLimits
{
    int max_action_turn = 3;
    int max_chat_turn = 2;

    void validate() const; // InvalidConfig unless both >= 1
};

struct GeneralRole
{
    std::string role_text;
};

struct RosterEntry
{
    std::string object;
    std::string scratch;
};

struct SpecifiedRole
{
    std::vector<RosterEntry> roster;
};

using RolePolicy = std::variant<GeneralRole, SpecifiedRole>;

/// Roster file: `[{"object":"...","scratch":"..."}]`.
std::vector<RosterEntry> parse_roster(std::string_view text);
std::vector<RosterEntry> load_roster(const std::filesystem::path& path);

/// Creates the group for a task: n agents named a1..an, engines assigned
/// round-robin, scratch/object from the policy. Resources are the task
/// statement, the background context (when non-empty) and `extras`.
Group prepare_group(const Task& task, std::string_view context, const RolePolicy& policy,
                    std::span<const EngineSpec> engines, std::size_t n_agents,
                    std::vector<std::string> extras = {});

/// Returns `env` with `entries` appended under fresh seq numbers.
GroupEnv update_environment(GroupEnv env, std::vector<DialogueEntry> entries);

/// Returns `env` with `summary` appended.
GroupEnv update_environment(GroupEnv env, std::string summary);

inline constexpr std::size_t kDefaultPerceptionWindow = 20;

/// Resources, every summary, the last `window` dialogue entries and the
/// agent's own history, as one text block.
std::string perceive(const Agent& agent, const GroupEnv& env, std::size_t window = kDefaultPerceptionWindow);

/// The verdict's result when the group finished, otherwise the last summary.
/// Throws NoResult when neither exists.
std::string extract_task_result(const GroupEnv& env);

inline constexpr std::string_view kNoDiscussionSummary = "no discussion this round";

struct Decision
{
    std::string message;
    std::string target; // agent id or kAllGroupMembers
    bool degraded = false;
};

using CompletionChecker = std::function<CompletionVerdict(const GroupEnv&, const RoundInfo&)>;

struct ChatOutcome
{
    GroupEnv env;
    Group group;
    std::string result;
    int rounds = 0;
};

struct GroupRuntimeOptions
{
    std::size_t perception_window = kDefaultPerceptionWindow;
    /// Engine for summaries and quality checks; the first agent's engine when unnamed.
    EngineSpec manager_engine;
};

/// Executes group chats. One instance may serve several groups concurrently;
/// each call sequence for one group is single-threaded.
class GroupRuntime
{
  public:
    GroupRuntime(Gateway& gateway, GroupRuntimeOptions options = {}, EventSink* sink = nullptr);

    /// Action-turn loop: every agent perceives, decides and acts in speaking
    /// order; then the turn is summarized and the checker consulted, returning
    /// early on completion.
    ChatOutcome start_group_chat(Group group, GroupEnv env, const ChatLimits& limits,
                                 const CompletionChecker& checker);

    Decision decide_action(const Agent& agent, std::string_view perception, const Group& group,
                           const RoundInfo& round);

    /// Broadcast: one entry. Directed: the opener followed by alternating
    /// replies while turn_count < 2 * max_chat_turn, stopping at the first
    /// empty reply.
    std::vector<DialogueEntry> execute_action(const Agent& current, const GroupEnv& env, const Group& group,
                                              const std::string& message, const std::string& target,
                                              const ChatLimits& limits, int round);

    /// Summarizes the entries of `round`, appends the summary to the env and to
    /// every agent's history, and returns it.
    std::string summarize_group_messages(GroupEnv& env, Group& group, int round);

    QualityFlag assess_quality(const GroupEnv& env, const Group& group, const std::string& result);

  private:
    const EngineSpec& manager_engine(const Group& group) const;
    std::string generate_response(const Agent& receiver, const Agent& peer, const GroupEnv& env,
                                  const Group& group, const std::vector<DialogueEntry>& dialogue);

    Gateway& gateway_;
    GroupRuntimeOptions options_;
    NullSink null_sink_;
    EventSink* sink_;
};

} // namespace agc
