// SPDX-License-Identifier: Apache-2.0
#include <agc/prompts.hpp>
#include <agc/query_manager.hpp>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include <map>
#include <set>

namespace agc
{

void TaskPlan::validate() const
{
    if (nodes.empty())
        throw Error(Errc::InvalidPlan, "plan has no tasks");

    auto index = std::map<std::string, std::size_t> {};
    for (auto i = std::size_t { 0 }; i < nodes.size(); ++i)
    {
        auto const& node = nodes[i];
        if (node.local_id.empty())
            throw Error(Errc::InvalidPlan, fmt::format("task #{} has an empty id", i));
        if (node.desc.empty())
            throw Error(Errc::InvalidPlan, fmt::format("task '{}' has an empty description", node.local_id));
        if (!index.emplace(node.local_id, i).second)
            throw Error(Errc::InvalidPlan, fmt::format("duplicate task id '{}'", node.local_id));
    }
    for (auto const& node: nodes)
        for (auto const& dep: node.deps)
            if (!index.contains(dep))
                throw Error(Errc::DanglingDep, fmt::format("task '{}' depends on unknown '{}'", node.local_id, dep));

    // Kahn's algorithm over dep edges.
    auto pending = std::vector<std::size_t>(nodes.size());
    auto dependents = std::vector<std::vector<std::size_t>>(nodes.size());
    for (auto i = std::size_t { 0 }; i < nodes.size(); ++i)
    {
        auto unique = std::set<std::string>(nodes[i].deps.begin(), nodes[i].deps.end());
        pending[i] = unique.size();
        for (auto const& dep: unique)
            dependents[index.at(dep)].push_back(i);
    }
    auto queue = std::vector<std::size_t> {};
    for (auto i = std::size_t { 0 }; i < nodes.size(); ++i)
        if (pending[i] == 0)
            queue.push_back(i);
    auto visited = std::size_t { 0 };
    while (!queue.empty())
    {
        auto current = queue.back();
        queue.pop_back();
        ++visited;
        for (auto next: dependents[current])
            if (--pending[next] == 0)
                queue.push_back(next);
    }
    if (visited != nodes.size())
        throw Error(Errc::CyclicPlan, "plan dependencies contain a cycle");
}

TaskPlan parse_plan(std::string_view reply)
{
    auto const doc = prompts::parse_object_reply(reply);
    auto plan = TaskPlan {};
    try
    {
        if (doc.contains("root") && !doc["root"].is_null())
            plan.root_desc = doc["root"].get<std::string>();
        for (auto const& entry: doc.at("tasks"))
        {
            auto node = PlanNode {};
            node.local_id = entry.at("id").get<std::string>();
            node.desc = entry.at("desc").get<std::string>();
            if (entry.contains("deps") && !entry["deps"].is_null())
                node.deps = entry["deps"].get<std::vector<std::string>>();
            plan.nodes.push_back(std::move(node));
        }
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ParseError(fmt::format("plan does not match the schema: {}", e.what()));
    }
    plan.validate();
    return plan;
}

nlohmann::json plan_to_json(const TaskPlan& plan)
{
    auto tasks = nlohmann::json::array();
    for (auto const& node: plan.nodes)
        tasks.push_back({ { "id", node.local_id }, { "desc", node.desc }, { "deps", node.deps } });
    return { { "root", plan.root_desc }, { "tasks", std::move(tasks) } };
}

DecompositionFailed::DecompositionFailed(const std::string& message, std::string last_reply):
    Error(Errc::DecompositionFailed, message), last_reply_(std::move(last_reply))
{
}

Decomposition decompose(const UserQuery& query, Gateway& gateway, const EngineSpec& engine,
                        const DecomposeOptions& options)
{
    if (options.max_repairs < 0)
        throw Error(Errc::InvalidConfig, "max_repairs must be >= 0");
    if (query.text.empty())
        throw Error(Errc::InvalidInput, "query text must not be empty");

    auto const tag = options.run_tag.empty() ? std::string {} : " | RUN " + options.run_tag;
    auto const max_nodes = std::to_string(options.max_nodes);
    auto messages = std::vector<ChatMessage> {
        { Role::System, std::string(prompts::kDecomposeSystem) },
        { Role::User,
          prompts::render(prompts::kDecompose, { { "tag", tag }, { "query", query.text }, { "max_nodes", max_nodes } }) },
    };

    auto result = Decomposition {};
    auto last_reply = std::string {};
    auto last_error = std::string {};
    for (auto attempt = 0; attempt <= options.max_repairs; ++attempt)
    {
        ++result.attempts;
        last_reply = gateway.complete(engine, messages).content;
        try
        {
            result.plan = parse_plan(last_reply);
            return result;
        }
        catch (const Error& e)
        {
            last_error = e.what();
        }
        if (attempt == options.max_repairs)
            break;
        result.repair_errors.push_back(last_error);
        messages.push_back({ Role::Assistant, last_reply });
        messages.push_back({ Role::User, prompts::render(prompts::kRepair, { { "error", last_error } }) });
    }
    throw DecompositionFailed(fmt::format("no valid plan after {} attempts: {}", result.attempts, last_error),
                              last_reply);
}

TaskForest plan_to_tree(const TaskPlan& plan, const UserQuery& query, std::uint64_t first_counter)
{
    plan.validate();

    auto forest = TaskForest(first_counter);
    auto const root = forest.new_task(plan.root_desc.empty() ? query.text : plan.root_desc);
    auto ids = std::map<std::string, TaskId> {};
    for (auto const& node: plan.nodes)
        ids.emplace(node.local_id, forest.new_task(node.desc));

    for (auto const& node: plan.nodes)
    {
        auto const parent = ids.at(node.local_id);
        for (auto const& dep: node.deps)
        {
            auto const child = ids.at(dep);
            if (!forest.task(child).father)
                forest.link(parent, child);
            else if (*forest.task(child).father != parent)
                forest.add_prerequisite(parent, child);
        }
    }
    for (auto const& node: plan.nodes)
    {
        auto const id = ids.at(node.local_id);
        if (!forest.task(id).father)
            forest.link(root, id);
    }
    for (auto const& [id, task]: forest.tasks())
        forest.transition(id, TaskState::Waiting);
    forest.validate();
    return forest;
}

FinalAnswer integrate(const TaskForest& forest, TaskId root, const UserQuery& query, Gateway& gateway,
                      const EngineSpec& engine)
{
    if (!forest.tree_complete(root))
        throw Error(Errc::TreeIncomplete, fmt::format("tree {} still has unfinished tasks", root.str()));

    auto answer = FinalAnswer {};
    answer.query_id = query.query_id;
    auto lines = std::string {};
    for (auto id: forest.tree_members(root))
    {
        auto const& task = forest.task(id);
        if (!lines.empty())
            lines += '\n';
        lines += fmt::format("- [{}] {} => {}", id.str(), task.desc, task.result.value_or(""));
        if (task.state == TaskState::Completion)
            answer.sources.push_back({ id, task.result->substr(0, kSourceExcerptLength) });
    }

    auto const& root_task = forest.task(root);
    auto const messages = std::vector<ChatMessage> {
        { Role::System, std::string(prompts::kDecomposeSystem) },
        { Role::User, prompts::render(prompts::kIntegrate, { { "query", query.text },
                                                             { "root_result", root_task.result.value_or("") },
                                                             { "results", lines } }) },
    };
    answer.answer = gateway.complete(engine, messages).content;
    return answer;
}

} // namespace agc
