// SPDX-License-Identifier: Apache-2.0
#include <agc/group_runtime.hpp>
#include <agc/prompts.hpp>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace agc
{

const Agent* Group::find(std::string_view agent_id) const
{
    auto it = std::find_if(used_agents.begin(), used_agents.end(),
                           [&](const Agent& agent) { return agent.agent_id == agent_id; });
    return it == used_agents.end() ? nullptr : &*it;
}

void ChatLimits::validate() const
{
    if (max_action_turn < 1)
        throw Error(Errc::InvalidConfig, fmt::format("max_action_turn must be >= 1, got {}", max_action_turn));
    if (max_chat_turn < 1)
        throw Error(Errc::InvalidConfig, fmt::format("max_chat_turn must be >= 1, got {}", max_chat_turn));
}

std::vector<RosterEntry> parse_roster(std::string_view text)
{
    auto roster = std::vector<RosterEntry> {};
    try
    {
        auto const doc = nlohmann::json::parse(text);
        if (!doc.is_array())
            throw ParseError("roster must be a JSON array");
        for (auto const& entry: doc)
        {
            auto item = RosterEntry { entry.at("object").get<std::string>(), entry.at("scratch").get<std::string>() };
            if (item.scratch.empty())
                throw ParseError("roster scratch must not be empty");
            roster.push_back(std::move(item));
        }
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ParseError(fmt::format("invalid roster: {}", e.what()));
    }
    return roster;
}

std::vector<RosterEntry> load_roster(const std::filesystem::path& path)
{
    auto in = std::ifstream(path, std::ios::binary);
    if (!in)
        throw ParseError(fmt::format("io: cannot open roster '{}'", path.string()));
    auto buffer = std::ostringstream {};
    buffer << in.rdbuf();
    return parse_roster(buffer.str());
}

Group prepare_group(const Task& task, std::string_view context, const RolePolicy& policy,
                    std::span<const EngineSpec> engines, std::size_t n_agents, std::vector<std::string> extras)
{
    if (n_agents < 1)
        throw Error(Errc::InvalidConfig, "a group needs at least one agent");
    if (engines.empty())
        throw Error(Errc::NoEngines, "no inference engines configured");
    if (auto const* specified = std::get_if<SpecifiedRole>(&policy); specified && specified->roster.size() != n_agents)
        throw Error(Errc::RosterMismatch, fmt::format("roster has {} entries for {} agents",
                                                      specified->roster.size(), n_agents));
    if (auto const* general = std::get_if<GeneralRole>(&policy); general && general->role_text.empty())
        throw Error(Errc::InvalidConfig, "general role text must not be empty");

    auto group = Group {};
    group.progress_id = fmt::format("g-{}", task.id.str());
    group.task_id = task.id;
    group.task_desc = task.desc;
    for (auto i = std::size_t { 0 }; i < n_agents; ++i)
    {
        auto agent = Agent {};
        agent.agent_id = fmt::format("a{}", i + 1);
        agent.engine = engines[i % engines.size()];
        if (auto const* general = std::get_if<GeneralRole>(&policy))
        {
            agent.scratch = general->role_text;
            agent.object = general->role_text;
        }
        else
        {
            auto const& entry = std::get<SpecifiedRole>(policy).roster[i];
            agent.scratch = entry.scratch;
            agent.object = entry.object;
        }
        group.used_agents.push_back(std::move(agent));
    }
    group.resources.push_back(fmt::format("Task: {}", task.desc));
    if (!context.empty())
        group.resources.emplace_back(context);
    for (auto& extra: extras)
        group.resources.push_back(std::move(extra));
    return group;
}

GroupEnv update_environment(GroupEnv env, std::vector<DialogueEntry> entries)
{
    auto seq = env.entries.empty() ? std::uint64_t { 0 } : env.entries.back().seq;
    for (auto& entry: entries)
    {
        entry.seq = ++seq;
        env.entries.push_back(std::move(entry));
    }
    return env;
}

GroupEnv update_environment(GroupEnv env, std::string summary)
{
    env.summaries.push_back(std::move(summary));
    return env;
}

namespace
{

    std::string render_entry(const DialogueEntry& entry)
    {
        return fmt::format("[#{} turn {}] {} -> {}: {}", entry.seq, entry.round, entry.sender, entry.receiver,
                           entry.content);
    }

    std::string render_roster(const Group& group)
    {
        auto out = std::string {};
        for (auto const& agent: group.used_agents)
        {
            if (!out.empty())
                out += '\n';
            out += fmt::format("- {}: {}", agent.agent_id, agent.object);
        }
        return out;
    }

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

    bool is_blank(std::string_view text)
    {
        return text.find_first_not_of(" \t\r\n") == std::string_view::npos;
    }

    nlohmann::json entry_payload(const Group& group, const DialogueEntry& entry)
    {
        return { { "task", group.task_id.str() }, { "round", entry.round },       { "entry_seq", entry.seq },
                 { "sender", entry.sender },      { "receiver", entry.receiver }, { "content", entry.content } };
    }

} // namespace

std::string perceive(const Agent& agent, const GroupEnv& env, std::size_t window)
{
    auto out = std::string("RESOURCES:");
    if (env.resources.empty())
        out += "\n(none)";
    for (auto const& resource: env.resources)
        out += "\n- " + resource;

    if (!env.summaries.empty())
        out += "\nROUND SUMMARIES:\n" + numbered(env.summaries);

    if (!env.entries.empty())
    {
        out += "\nRECENT MESSAGES:";
        auto const skip = env.entries.size() > window ? env.entries.size() - window : 0;
        for (auto i = skip; i < env.entries.size(); ++i)
            out += "\n" + render_entry(env.entries[i]);
    }

    if (!agent.history.empty())
    {
        out += "\nYOUR HISTORY:";
        for (auto const& item: agent.history)
            out += "\n- " + item;
    }
    return out;
}

std::string extract_task_result(const GroupEnv& env)
{
    if (env.verdict && env.verdict->complete && env.verdict->result)
        return *env.verdict->result;
    if (!env.summaries.empty())
        return env.summaries.back();
    throw Error(Errc::NoResult, "the group produced neither a verdict nor a summary");
}

GroupRuntime::GroupRuntime(Gateway& gateway, GroupRuntimeOptions options, EventSink* sink):
    gateway_(gateway), options_(std::move(options)), sink_(sink ? sink : &null_sink_)
{
}

const EngineSpec& GroupRuntime::manager_engine(const Group& group) const
{
    if (!options_.manager_engine.name.empty() || group.used_agents.empty())
        return options_.manager_engine;
    return group.used_agents.front().engine;
}

Decision GroupRuntime::decide_action(const Agent& agent, std::string_view perception, const Group& group,
                                     const RoundInfo& round)
{
    auto const round_text = std::to_string(round.round);
    auto const rounds_text = std::to_string(round.max_rounds);
    auto const roster = render_roster(group);
    auto messages = std::vector<ChatMessage> {
        { Role::System, agent.scratch },
        { Role::User, prompts::render(prompts::kDecide, { { "task", group.task_desc },
                                                          { "agent", agent.agent_id },
                                                          { "object", agent.object },
                                                          { "round", round_text },
                                                          { "rounds", rounds_text },
                                                          { "perception", perception },
                                                          { "roster", roster } }) },
    };

    auto reply = std::string {};
    for (auto attempt = 0; attempt < 2; ++attempt)
    {
        reply = gateway_.complete(agent.engine, messages).content;
        auto error = std::string {};
        try
        {
            auto const doc = prompts::parse_object_reply(reply);
            auto target = doc.find("target");
            auto message = doc.find("message");
            if (target == doc.end() || !target->is_string() || message == doc.end() || !message->is_string())
                throw ParseError("decision needs string fields \"target\" and \"message\"");
            auto decision = Decision { message->get<std::string>(), target->get<std::string>(), false };
            if (decision.target == kAllGroupMembers)
                return decision;
            if (decision.target != agent.agent_id && group.find(decision.target))
                return decision;
            if (attempt == 1)
                return Decision { decision.message, std::string(kAllGroupMembers), true };
            error = fmt::format("unknown target '{}'", decision.target);
        }
        catch (const ParseError& e)
        {
            error = e.what();
        }
        messages.push_back({ Role::Assistant, reply });
        messages.push_back({ Role::User, prompts::render(prompts::kRepair, { { "error", error } }) });
    }
    return Decision { reply, std::string(kAllGroupMembers), true };
}

std::string GroupRuntime::generate_response(const Agent& receiver, const Agent& peer, const GroupEnv& env,
                                            const Group& group, const std::vector<DialogueEntry>& dialogue)
{
    auto transcript = std::string {};
    for (auto const& entry: dialogue)
    {
        if (!transcript.empty())
            transcript += '\n';
        transcript += fmt::format("{} -> {}: {}", entry.sender, entry.receiver, entry.content);
    }
    auto const perception = perceive(receiver, env, options_.perception_window);
    auto const messages = std::vector<ChatMessage> {
        { Role::System, receiver.scratch },
        { Role::User, prompts::render(prompts::kRespond, { { "task", group.task_desc },
                                                           { "agent", receiver.agent_id },
                                                           { "object", receiver.object },
                                                           { "peer", peer.agent_id },
                                                           { "perception", perception },
                                                           { "dialogue", transcript } }) },
    };
    return gateway_.complete(receiver.engine, messages).content;
}

std::vector<DialogueEntry> GroupRuntime::execute_action(const Agent& current, const GroupEnv& env, const Group& group,
                                                        const std::string& message, const std::string& target,
                                                        const ChatLimits& limits, int round)
{
    auto history = std::vector<DialogueEntry> {};
    if (target == kAllGroupMembers)
    {
        history.push_back({ current.agent_id, target, message, round, 0 });
        return history;
    }

    auto const* target_agent = group.find(target);
    if (!target_agent || target == current.agent_id)
        throw Error(Errc::UnknownTarget, fmt::format("'{}' is not another member of group {}", target,
                                                     group.progress_id));

    history.push_back({ current.agent_id, target, message, round, 0 });
    auto const* sender = &current;
    auto const* receiver = target_agent;
    auto turn_count = 1;
    while (turn_count < 2 * limits.max_chat_turn)
    {
        auto response = generate_response(*receiver, *sender, env, group, history);
        if (is_blank(response))
            return history;
        history.push_back({ receiver->agent_id, sender->agent_id, std::move(response), round, 0 });
        std::swap(sender, receiver);
        ++turn_count;
    }
    return history;
}

std::string GroupRuntime::summarize_group_messages(GroupEnv& env, Group& group, int round)
{
    auto lines = std::string {};
    for (auto const& entry: env.entries)
    {
        if (entry.round != round)
            continue;
        if (!lines.empty())
            lines += '\n';
        lines += fmt::format("{} -> {}: {}", entry.sender, entry.receiver, entry.content);
    }

    auto summary = std::string(kNoDiscussionSummary);
    if (!lines.empty())
    {
        auto const round_text = std::to_string(round);
        auto const messages = std::vector<ChatMessage> {
            { Role::System, std::string(prompts::kSummarizeSystem) },
            { Role::User, prompts::render(prompts::kSummarize, { { "task", group.task_desc },
                                                                 { "round", round_text },
                                                                 { "messages", lines } }) },
        };
        summary = gateway_.complete(manager_engine(group), messages).content;
        if (is_blank(summary))
            summary = std::string(kNoDiscussionSummary);
    }

    env = update_environment(std::move(env), summary);
    for (auto& agent: group.used_agents)
        agent.history.push_back(summary);
    return summary;
}

QualityFlag GroupRuntime::assess_quality(const GroupEnv& env, const Group& group, const std::string& result)
{
    auto messages = std::vector<ChatMessage> {
        { Role::System, std::string(prompts::kCheckSystem) },
        { Role::User, prompts::render(prompts::kQuality, { { "task", group.task_desc },
                                                           { "result", result },
                                                           { "summaries", numbered(env.summaries) } }) },
    };
    for (auto attempt = 0; attempt < 2; ++attempt)
    {
        auto reply = gateway_.complete(manager_engine(group), messages).content;
        auto error = std::string {};
        try
        {
            auto const doc = prompts::parse_object_reply(reply);
            auto effective = doc.find("effective");
            if (effective != doc.end() && effective->is_boolean())
                return effective->get<bool>() ? QualityFlag::Pass : QualityFlag::LowQuality;
            error = "quality verdict needs a boolean \"effective\"";
        }
        catch (const ParseError& e)
        {
            error = e.what();
        }
        messages.push_back({ Role::Assistant, reply });
        messages.push_back({ Role::User, prompts::render(prompts::kRepair, { { "error", error } }) });
    }
    return QualityFlag::Pass;
}

ChatOutcome GroupRuntime::start_group_chat(Group group, GroupEnv env, const ChatLimits& limits,
                                           const CompletionChecker& checker)
{
    limits.validate();
    if (group.used_agents.empty())
        throw Error(Errc::InvalidConfig, fmt::format("group {} has no agents", group.progress_id));
    if (!checker)
        throw Error(Errc::InvalidConfig, "a completion checker is required");
    if (env.resources.empty())
        env.resources = group.resources;

    auto const task = group.task_id.str();
    auto info = RoundInfo { 0, limits.max_action_turn, group.used_agents.size() };

    for (auto turn = 1; turn <= limits.max_action_turn; ++turn)
    {
        info.round = turn;
        for (auto index = std::size_t { 0 }; index < group.used_agents.size(); ++index)
        {
            auto const& agent = group.used_agents[index];
            auto const perception = perceive(agent, env, options_.perception_window);
            auto decision = decide_action(agent, perception, group, info);
            sink_->emit(EventKind::AgentAction, { { "task", task },
                                                  { "round", turn },
                                                  { "agent", agent.agent_id },
                                                  { "target", decision.target },
                                                  { "message", decision.message },
                                                  { "degraded", decision.degraded } });
            if (is_blank(decision.message))
                continue;
            auto history = execute_action(agent, env, group, decision.message, decision.target, limits, turn);
            auto const first_new = env.entries.size();
            env = update_environment(std::move(env), std::move(history));
            for (auto i = first_new; i < env.entries.size(); ++i)
                sink_->emit(EventKind::DialogueEntry, entry_payload(group, env.entries[i]));
        }

        auto summary = summarize_group_messages(env, group, turn);
        sink_->emit(EventKind::RoundSummary, { { "task", task },
                                               { "round", turn },
                                               { "agents", group.used_agents.size() },
                                               { "summary", summary } });

        auto verdict = CompletionVerdict {};
        try
        {
            verdict = checker(env, info);
        }
        catch (const Error& e)
        {
            if (e.code() != Errc::VerdictUnparseable)
                throw;
        }
        sink_->emit(EventKind::CompletionCheck,
                    { { "task", task },
                      { "round", turn },
                      { "complete", verdict.complete },
                      { "result", verdict.result ? nlohmann::json(*verdict.result) : nlohmann::json(nullptr) } });
        if (verdict.complete)
        {
            env.verdict = verdict;
            auto result = extract_task_result(env);
            return { std::move(env), std::move(group), std::move(result), turn };
        }
    }
    auto result = extract_task_result(env);
    return { std::move(env), std::move(group), std::move(result), limits.max_action_turn };
}

} // namespace agc
