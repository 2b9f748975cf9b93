// SPDX-License-Identifier: Apache-2.0
#include <agc/prompts.hpp>
#include <agc/task_manager.hpp>

#include <fmt/core.h>

#include <algorithm>
#include <deque>
#include <future>
#include <memory>

namespace agc
{

std::string_view to_string(QualityFlag flag) noexcept
{
    return flag == QualityFlag::Pass ? "pass" : "low_quality";
}

void SchedulerConfig::validate() const
{
    if (max_parallel_groups < 1)
        throw Error(Errc::InvalidConfig, "max_parallel_groups must be >= 1");
}

std::string render_background(const std::vector<ChildResult>& children)
{
    if (children.empty())
        return {};
    auto out = std::string(kBackgroundHeader);
    for (auto const& child: children)
        out += fmt::format("\n- [{}]: {}", child.desc, child.result);
    return out;
}

TaskManager::TaskManager(SchedulerConfig config, EventSink* sink):
    config_(config), sink_(sink ? sink : &null_sink_)
{
    config_.validate();
}

TaskId TaskManager::submit_tree(const TaskForest& fragment, nlohmann::json details)
{
    fragment.validate();
    if (fragment.roots().size() != 1)
        throw Error(Errc::InvalidForest,
                    fmt::format("a tree fragment needs exactly one root, got {}", fragment.roots().size()));
    for (auto const& [id, task]: fragment.tasks())
        if (task.state != TaskState::Waiting)
            throw Error(Errc::InvalidForest,
                        fmt::format("submitted task {} is {}, expected waiting", id.str(), to_string(task.state)));

    forest_.merge(fragment);
    auto const root = *fragment.roots().begin();

    auto tasks = nlohmann::json::array();
    for (auto const& [id, task]: fragment.tasks())
        tasks.push_back(task_to_json(task));
    auto payload = details.is_object() ? std::move(details) : nlohmann::json::object();
    payload["root"] = root.str();
    payload["slots"] = config_.max_parallel_groups;
    payload["tasks"] = std::move(tasks);
    sink_->emit(EventKind::TreeSubmitted, std::move(payload));
    return root;
}

std::size_t TaskManager::acquire_slot()
{
    auto slot = std::size_t { 0 };
    while (busy_slots_.contains(slot))
        ++slot;
    busy_slots_.insert(slot);
    return slot;
}

std::optional<DispatchTicket> TaskManager::ticket(TaskId id) const
{
    if (auto it = tickets_.find(id); it != tickets_.end())
        return it->second;
    return std::nullopt;
}

std::vector<DispatchTicket> TaskManager::schedule_step(std::optional<TaskId> root)
{
    auto tickets = std::vector<DispatchTicket> {};
    if (tickets_.size() >= config_.max_parallel_groups)
        return tickets;
    auto free = config_.max_parallel_groups - tickets_.size();

    for (auto id: forest_.ready_tasks())
    {
        if (free == 0)
            break;
        if (root && forest_.root_of(id) != *root)
            continue;
        forest_.transition(id, TaskState::Execution);
        auto ticket = DispatchTicket { id, render_background(forest_.child_results(id)), acquire_slot() };
        tickets_.emplace(id, ticket);
        sink_->emit(EventKind::Dispatched, { { "task", id.str() },
                                             { "desc", forest_.task(id).desc },
                                             { "slot", ticket.group_slot },
                                             { "context", ticket.context } });
        tickets.push_back(std::move(ticket));
        --free;
    }
    return tickets;
}

std::vector<TaskId> TaskManager::on_task_complete(TaskId id, const TaskOutcome& outcome,
                                                  std::optional<QualityFlag> quality)
{
    auto it = tickets_.find(id);
    if (it == tickets_.end() || forest_.task(id).state != TaskState::Execution)
        throw Error(Errc::NotExecuting, fmt::format("{} has no outstanding ticket", id.str()));

    auto ready_before = forest_.ready_tasks();

    if (auto const* verdict = std::get_if<CompletionVerdict>(&outcome))
    {
        if (!verdict->complete || !verdict->result)
            throw Error(Errc::InvalidInput, fmt::format("verdict for {} is not a completion", id.str()));
        forest_.transition(id, TaskState::Completion, verdict->result);
        auto payload = nlohmann::json { { "task", id.str() }, { "result", *verdict->result } };
        payload["quality"] = std::string(to_string(quality.value_or(QualityFlag::Pass)));
        sink_->emit(EventKind::TaskCompleted, std::move(payload));
    }
    else
    {
        auto const& failure = std::get<FailureNotice>(outcome);
        forest_.transition(id, TaskState::Failure, failure.notice);
        sink_->emit(EventKind::TaskFailed, { { "task", id.str() }, { "notice", failure.notice } });
    }

    busy_slots_.erase(it->second.group_slot);
    tickets_.erase(it);

    auto const root = forest_.root_of(id);
    if (forest_.tree_complete(root))
        sink_->emit(EventKind::TreeComplete, { { "root", root.str() } });

    auto newly_ready = std::vector<TaskId> {};
    for (auto ready: forest_.ready_tasks())
        if (!std::binary_search(ready_before.begin(), ready_before.end(), ready))
            newly_ready.push_back(ready);
    return newly_ready;
}

void TaskManager::run_tree(TaskId root, const GroupRunner& runner)
{
    if (!forest_.task(root).is_root())
        throw Error(Errc::NotARoot, fmt::format("{} is not a root", root.str()));

    struct InFlight
    {
        TaskId id;
        std::unique_ptr<BufferedSink> buffer;
        std::future<GroupReport> report;
    };
    auto in_flight = std::deque<InFlight> {};

    while (true)
    {
        for (auto& ticket: schedule_step(root))
        {
            auto buffer = std::make_unique<BufferedSink>();
            auto task = forest_.task(ticket.task_id);
            auto report = std::async(std::launch::async,
                                     [&runner, ticket, task = std::move(task), sink = buffer.get()] {
                                         return runner(ticket, task, *sink);
                                     });
            in_flight.push_back({ ticket.task_id, std::move(buffer), std::move(report) });
        }

        if (in_flight.empty())
        {
            if (forest_.tree_complete(root))
                return;
            auto states = std::string {};
            for (auto id: forest_.tree_members(root))
                states += fmt::format(" {}={}", id.str(), to_string(forest_.task(id).state));
            throw Error(Errc::Deadlock, fmt::format("tree {} cannot make progress:{}", root.str(), states));
        }

        auto head = std::move(in_flight.front());
        in_flight.pop_front();
        auto report = GroupReport {};
        try
        {
            report = head.report.get();
        }
        catch (const Error& e)
        {
            report.outcome = FailureNotice { fmt::format("{}: {}", e.name(), e.what()) };
        }
        catch (const std::exception& e)
        {
            report.outcome = FailureNotice { fmt::format("error: {}", e.what()) };
        }
        head.buffer->flush_into(*sink_);
        on_task_complete(head.id, report.outcome, report.quality);
    }
}

CompletionVerdict parse_verdict(std::string_view reply)
{
    auto const doc = prompts::parse_object_reply(reply);
    auto verdict = CompletionVerdict {};
    auto complete = doc.find("complete");
    if (complete == doc.end() || !complete->is_boolean())
        throw ParseError("verdict needs a boolean \"complete\"");
    verdict.complete = complete->get<bool>();
    if (auto result = doc.find("result"); result != doc.end() && !result->is_null())
    {
        if (!result->is_string())
            throw ParseError("verdict \"result\" must be a string");
        verdict.result = result->get<std::string>();
    }
    if (verdict.complete && (!verdict.result || verdict.result->empty()))
        throw ParseError("a complete verdict needs a non-empty \"result\"");
    if (!verdict.complete)
        verdict.result.reset();
    return verdict;
}

namespace
{

    std::string numbered(const std::vector<std::string>& items)
    {
        if (items.empty())
            return "(none)";
        auto out = std::string {};
        for (auto i = std::size_t { 0 }; i < items.size(); ++i)
        {
            if (i > 0)
                out += '\n';
            out += fmt::format("{}. {}", i + 1, items[i]);
        }
        return out;
    }

} // namespace

CompletionVerdict check_task_completion(const GroupEnv& env, const Task& task, const RoundInfo& round,
                                        Gateway& gateway, const EngineSpec& engine)
{
    auto const round_text = std::to_string(round.round);
    auto const rounds_text = std::to_string(round.max_rounds);
    auto const agents_text = std::to_string(round.agents);
    auto const summaries = numbered(env.summaries);
    auto messages = std::vector<ChatMessage> {
        { Role::System, std::string(prompts::kCheckSystem) },
        { Role::User, prompts::render(prompts::kCheck, { { "task", task.desc },
                                                         { "round", round_text },
                                                         { "rounds", rounds_text },
                                                         { "agents", agents_text },
                                                         { "summaries", summaries } }) },
    };

    auto last_error = std::string {};
    for (auto attempt = 0; attempt < 2; ++attempt)
    {
        auto reply = gateway.complete(engine, messages).content;
        try
        {
            return parse_verdict(reply);
        }
        catch (const ParseError& e)
        {
            last_error = e.what();
            messages.push_back({ Role::Assistant, reply });
            messages.push_back({ Role::User, prompts::render(prompts::kRepair, { { "error", last_error } }) });
        }
    }
    throw Error(Errc::VerdictUnparseable, fmt::format("completion verdict for {}: {}", task.id.str(), last_error));
}

} // namespace agc
