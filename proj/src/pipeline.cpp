// SPDX-License-Identifier: Apache-2.0
#include <agc/pipeline.hpp>
#include <agc/prompts.hpp>

#include <fmt/core.h>

namespace agc
{

BackendConfig BackendConfig::parse(std::string_view text)
{
    auto backend = BackendConfig {};
    if (text.starts_with("scripted:"))
    {
        backend.kind = EngineKind::Scripted;
        backend.script_path = std::string(text.substr(9));
        if (backend.script_path.empty())
            throw Error(Errc::ConfigError, "scripted backend needs a script path");
        return backend;
    }
    if (text.starts_with("remote:"))
    {
        auto rest = text.substr(7);
        auto const hash = rest.rfind('#');
        if (hash == std::string_view::npos || hash == 0 || hash + 1 == rest.size())
            throw Error(Errc::ConfigError, "remote backend must look like remote:<url>#<model>");
        backend.kind = EngineKind::Remote;
        backend.endpoint = std::string(rest.substr(0, hash));
        auto models = rest.substr(hash + 1);
        while (!models.empty())
        {
            auto const comma = models.find(',');
            auto model = models.substr(0, comma);
            if (!model.empty())
                backend.models.emplace_back(model);
            if (comma == std::string_view::npos)
                break;
            models.remove_prefix(comma + 1);
        }
        if (backend.models.empty())
            throw Error(Errc::ConfigError, "remote backend needs at least one model");
        return backend;
    }
    throw Error(Errc::ConfigError, fmt::format("unknown backend '{}'", text));
}

void RunConfig::validate() const
{
    if (max_action_turn < 1 || max_chat_turn < 1)
        throw Error(Errc::ConfigError, "turn limits must be >= 1");
    if (n_agents < 1 || max_parallel_groups < 1 || perception_window < 1)
        throw Error(Errc::ConfigError, "agents, slots and perception window must be >= 1");
    if (max_repairs < 0)
        throw Error(Errc::ConfigError, "max_repairs must be >= 0");
    if (auto const* specified = std::get_if<SpecifiedRole>(&role_policy);
        specified && specified->roster.size() != n_agents)
        throw Error(Errc::ConfigError,
                    fmt::format("roster has {} entries but {} agents were requested", specified->roster.size(), n_agents));
    if (backend.kind == EngineKind::Scripted)
    {
        if (backend.script_path.empty())
            throw Error(Errc::ConfigError, "scripted backend needs a script path");
    }
    else if (backend.endpoint.empty() || backend.models.empty())
    {
        throw Error(Errc::ConfigError, "remote backend needs an endpoint and a model");
    }
}

std::vector<EngineSpec> RunConfig::engines() const
{
    if (backend.kind == EngineKind::Scripted)
        return { EngineSpec::scripted("scripted") };
    auto specs = std::vector<EngineSpec> {};
    for (auto const& model: backend.models)
        specs.push_back(EngineSpec::remote(model, backend.endpoint));
    return specs;
}

std::unique_ptr<Gateway> make_gateway(const RunConfig& config, std::shared_ptr<ScriptBook> book)
{
    if (config.backend.kind == EngineKind::Remote)
    {
        auto remote = RemoteOptions::from_env();
        if (!remote.api_key)
            throw Error(Errc::ConfigError, "remote backend requires AGC_API_KEY");
        return std::make_unique<Gateway>(nullptr, std::move(remote));
    }
    return std::make_unique<Gateway>(std::move(book), RemoteOptions {}, config.backend.scripted_delay);
}

std::unique_ptr<Gateway> make_gateway(const RunConfig& config)
{
    if (config.backend.kind == EngineKind::Remote)
        return make_gateway(config, nullptr);
    return make_gateway(config, std::make_shared<ScriptBook>(load_script_book(config.backend.script_path)));
}

GroupRunner make_group_runner(Gateway& gateway, const RunConfig& config)
{
    return [&gateway, config](const DispatchTicket& ticket, const Task& task, EventSink& sink) {
        auto const engines = config.engines();
        auto const manager = engines.front();
        auto runtime = GroupRuntime(gateway, GroupRuntimeOptions { config.perception_window, manager }, &sink);
        auto group = prepare_group(task, ticket.context, config.role_policy, engines, config.n_agents);
        auto checker = [&](const GroupEnv& env, const RoundInfo& round) {
            return check_task_completion(env, task, round, gateway, manager);
        };
        auto outcome = runtime.start_group_chat(std::move(group), GroupEnv {}, config.limits(), checker);
        auto quality = runtime.assess_quality(outcome.env, outcome.group, outcome.result);
        return GroupReport { CompletionVerdict { true, outcome.result }, quality };
    };
}

RunResult run_pipeline(const UserQuery& query, const RunConfig& config, Gateway& gateway, EventSink& sink)
{
    config.validate();
    auto const engines = config.engines();
    auto const& planner = engines.front();

    auto decomposition = decompose(query, gateway, planner,
                                   DecomposeOptions { config.max_repairs, 8, config.run_tag });

    auto manager = TaskManager(SchedulerConfig { config.max_parallel_groups }, &sink);
    auto fragment = plan_to_tree(decomposition.plan, query, manager.next_counter());
    auto const root = manager.submit_tree(fragment, { { "query_id", query.query_id },
                                                      { "prompts", std::string(prompts::kVersion) },
                                                      { "decompose_attempts", decomposition.attempts },
                                                      { "repair_errors", decomposition.repair_errors } });

    manager.run_tree(root, make_group_runner(gateway, config));

    auto answer = integrate(manager.forest(), root, query, gateway, planner);
    auto sources = nlohmann::json::array();
    for (auto const& source: answer.sources)
        sources.push_back({ { "task", source.task.str() }, { "excerpt", source.excerpt } });
    sink.emit(EventKind::FinalAnswer, { { "query_id", answer.query_id },
                                        { "root", root.str() },
                                        { "answer", answer.answer },
                                        { "sources", std::move(sources) } });

    return { std::move(answer), root, std::move(decomposition), manager.forest() };
}

} // namespace agc
