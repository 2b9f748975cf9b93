// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <agc/group_runtime.hpp>
#include <agc/llm.hpp>
#include <agc/query_manager.hpp>
#include <agc/task_manager.hpp>
#include <agc/trace.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace agc
{

struct BackendConfig
{
    EngineKind kind = EngineKind::Scripted;
    std::filesystem::path script_path;  // Scripted
    std::string endpoint;               // Remote
    std::vector<std::string> models;    // Remote; engines are assigned round-robin
    std::chrono::milliseconds scripted_delay {};

    /// `scripted:<path>` or `remote:<url>#<model>[,<model>...]`.
    static BackendConfig parse(std::string_view text);
};

inline constexpr std::string_view kDefaultGeneralRole =
    "You are a capable expert working with a small group of peers to solve the assigned task.";

struct RunConfig
{
    BackendConfig backend;
    int max_action_turn = 3;
    int max_chat_turn = 2;
    std::size_t n_agents = 3;
    std::size_t max_parallel_groups = 2;
    std::size_t perception_window = kDefaultPerceptionWindow;
    RolePolicy role_policy = GeneralRole { std::string(kDefaultGeneralRole) };
    int max_repairs = 2;
    std::string run_tag;

    /// Throws ConfigError when a limit is < 1, the roster size differs from
    /// n_agents, the script path is empty, or a remote backend lacks an
    /// endpoint/model.
    void validate() const;

    ChatLimits limits() const { return { max_action_turn, max_chat_turn }; }
    std::vector<EngineSpec> engines() const;
};

/// Builds the gateway for a config. Remote backends require AGC_API_KEY; a
/// missing script file raises ParseError(io).
std::unique_ptr<Gateway> make_gateway(const RunConfig& config);
std::unique_ptr<Gateway> make_gateway(const RunConfig& config, std::shared_ptr<ScriptBook> book);

/// Group execution for one dispatched task: prepare the group, run the chat
/// with the LLM completion judge, assess quality.
GroupRunner make_group_runner(Gateway& gateway, const RunConfig& config);

struct RunResult
{
    FinalAnswer answer;
    TaskId root;
    Decomposition decomposition;
    TaskForest forest;
};

/// decompose → plan_to_tree → submit_tree → run_tree → integrate.
RunResult run_pipeline(const UserQuery& query, const RunConfig& config, Gateway& gateway, EventSink& sink);

} // namespace agc
