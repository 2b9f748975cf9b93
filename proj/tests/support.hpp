// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <agc/evalkit.hpp>
#include <agc/group_runtime.hpp>
#include <agc/llm.hpp>
#include <agc/pipeline.hpp>
#include <agc/query_manager.hpp>
#include <agc/task.hpp>
#include <agc/task_manager.hpp>
#include <agc/trace.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace agc::testing
{

inline std::filesystem::path fixture_path(const std::string& relative)
{
    return std::filesystem::path(AGC_FIXTURE_DIR) / relative;
}

inline std::filesystem::path golden_path(const std::string& relative)
{
    return std::filesystem::path(AGC_GOLDEN_DIR) / relative;
}

inline std::string read_file(const std::filesystem::path& path)
{
    auto in = std::ifstream(path, std::ios::binary);
    auto buffer = std::ostringstream {};
    buffer << in.rdbuf();
    return buffer.str();
}

inline TaskPlan load_plan(const std::string& relative)
{
    return parse_plan(read_file(fixture_path(relative)));
}

inline TaskForest plan_tree(const std::string& relative, std::uint64_t first_counter = 1)
{
    auto const plan = load_plan(relative);
    return plan_to_tree(plan, UserQuery { plan.root_desc, "fixture" }, first_counter);
}

inline TaskId find_task(const TaskForest& forest, const std::string& desc)
{
    for (auto const& [id, task]: forest.tasks())
        if (task.desc == desc)
            return id;
    throw Error(Errc::UnknownTask, "no task named " + desc);
}

/// Random DAG-shaped plan: node i may depend on any earlier node.
inline TaskPlan random_plan(std::mt19937_64& rng, std::size_t max_nodes)
{
    auto plan = TaskPlan { "random root", {} };
    auto const count = std::uniform_int_distribution<std::size_t>(1, max_nodes)(rng);
    auto coin = std::bernoulli_distribution(0.3);
    for (auto i = std::size_t { 0 }; i < count; ++i)
    {
        auto node = PlanNode { "n" + std::to_string(i), "random task " + std::to_string(i), {} };
        for (auto j = std::size_t { 0 }; j < i; ++j)
            if (coin(rng))
                node.deps.push_back("n" + std::to_string(j));
        plan.nodes.push_back(std::move(node));
    }
    return plan;
}

/// Group runner that completes every task with a result derived from its
/// description, without touching an engine.
inline GroupRunner echo_runner()
{
    return [](const DispatchTicket&, const Task& task, EventSink&) {
        return GroupReport { CompletionVerdict { true, "done: " + task.desc }, QualityFlag::Pass };
    };
}

/// Independent oracle over a trace: returns the first violation of
/// "dispatched only after every son is terminal" or of the slot bound.
inline std::string topological_violation(const std::vector<TraceEvent>& events)
{
    auto sons = std::map<std::string, std::vector<std::string>> {};
    auto terminal = std::set<std::string> {};
    auto outstanding = std::set<std::string> {};
    auto slots = std::size_t { 0 };
    for (auto const& event: events)
    {
        auto const& p = event.payload;
        switch (event.kind)
        {
            case EventKind::TreeSubmitted:
                slots = p.at("slots").get<std::size_t>();
                for (auto const& task: p.at("tasks"))
                    sons[task.at("id").get<std::string>()] = task.at("sons").get<std::vector<std::string>>();
                break;
            case EventKind::Dispatched:
            {
                auto const id = p.at("task").get<std::string>();
                for (auto const& son: sons[id])
                    if (!terminal.contains(son))
                        return "seq " + std::to_string(event.seq) + ": " + id + " dispatched before " + son;
                outstanding.insert(id);
                if (outstanding.size() > slots)
                    return "seq " + std::to_string(event.seq) + ": slot bound exceeded";
                break;
            }
            case EventKind::TaskCompleted:
            case EventKind::TaskFailed:
            {
                auto const id = p.at("task").get<std::string>();
                terminal.insert(id);
                outstanding.erase(id);
                break;
            }
            default: break;
        }
    }
    return {};
}

} // namespace agc::testing
