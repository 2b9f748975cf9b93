// SPDX-License-Identifier: Apache-2.0
#include <agc/cli.hpp>
#include <agc/evalkit.hpp>
#include <agc/pipeline.hpp>
#include <agc/trace.hpp>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <ostream>
#include <sstream>

namespace agc::cli
{

int exit_code_for(const Error& error) noexcept
{
    switch (error.code())
    {
        case Errc::ConfigError:
        case Errc::ParseError:
        case Errc::InvalidConfig:
        case Errc::InvalidInput:
        case Errc::RosterMismatch:
        case Errc::NoEngines: return kConfigError;
        case Errc::InvariantViolation: return kInvariantViolation;
        default: return kPipelineError;
    }
}

namespace
{

    RolePolicy parse_role_policy(const std::string& text)
    {
        if (text.starts_with("general:"))
        {
            auto role = text.substr(8);
            if (role.empty())
                throw Error(Errc::ConfigError, "general role text must not be empty");
            return GeneralRole { role };
        }
        if (text.starts_with("specified:"))
            return SpecifiedRole { load_roster(text.substr(10)) };
        throw Error(Errc::ConfigError, fmt::format("role policy must be general:<text> or specified:<path>, got '{}'",
                                                   text));
    }

    struct RunOptions
    {
        std::string query;
        std::string query_id = "q1";
        std::string config_path;
        std::string backend;
        std::string role_policy;
        std::string trace_path = "trace.jsonl";
        int max_action_turn = 0;
        int max_chat_turn = 0;
        std::size_t agents = 0;
        std::size_t slots = 0;
        std::size_t perception_window = 0;
        bool json = false;
    };

    /// Config file keys mirror the long flags; flags given on the command line win.
    RunConfig build_run_config(const RunOptions& options)
    {
        auto config = RunConfig {};
        auto backend = std::string {};
        auto policy = std::string {};
        if (!options.config_path.empty())
        {
            auto in = std::ifstream(options.config_path);
            if (!in)
                throw ParseError(fmt::format("io: cannot open config '{}'", options.config_path));
            try
            {
                auto const doc = nlohmann::json::parse(in);
                backend = doc.value("backend", std::string {});
                policy = doc.value("role_policy", std::string {});
                config.max_action_turn = doc.value("max_action_turn", config.max_action_turn);
                config.max_chat_turn = doc.value("max_chat_turn", config.max_chat_turn);
                config.n_agents = doc.value("agents", config.n_agents);
                config.max_parallel_groups = doc.value("slots", config.max_parallel_groups);
                config.perception_window = doc.value("perception_window", config.perception_window);
                config.max_repairs = doc.value("max_repairs", config.max_repairs);
            }
            catch (const nlohmann::json::exception& e)
            {
                throw ParseError(fmt::format("invalid config '{}': {}", options.config_path, e.what()));
            }
        }
        if (!options.backend.empty())
            backend = options.backend;
        if (!options.role_policy.empty())
            policy = options.role_policy;
        if (options.max_action_turn != 0)
            config.max_action_turn = options.max_action_turn;
        if (options.max_chat_turn != 0)
            config.max_chat_turn = options.max_chat_turn;
        if (options.agents != 0)
            config.n_agents = options.agents;
        if (options.slots != 0)
            config.max_parallel_groups = options.slots;
        if (options.perception_window != 0)
            config.perception_window = options.perception_window;

        if (backend.empty())
            throw Error(Errc::ConfigError, "no backend given (--backend scripted:<path>|remote:<url>#<model>)");
        config.backend = BackendConfig::parse(backend);
        if (!policy.empty())
            config.role_policy = parse_role_policy(policy);
        config.validate();
        return config;
    }

    int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err)
    {
        auto const config = build_run_config(options);
        auto gateway = make_gateway(config);
        auto trace = TraceWriter(options.trace_path);
        try
        {
            auto const result = run_pipeline(UserQuery { options.query, options.query_id }, config, *gateway, trace);
            if (options.json)
            {
                auto sources = nlohmann::json::array();
                for (auto const& source: result.answer.sources)
                    sources.push_back({ { "task", source.task.str() }, { "excerpt", source.excerpt } });
                out << nlohmann::json { { "query_id", result.answer.query_id },
                                        { "answer", result.answer.answer },
                                        { "sources", std::move(sources) } }
                           .dump(2)
                    << '\n';
            }
            else
            {
                out << result.answer.answer << '\n';
            }
            return kSuccess;
        }
        catch (const Error& e)
        {
            auto const events = trace.events();
            err << fmt::format("{}: {} (trace: {}, last seq {})\n", e.name(), e.what(), options.trace_path,
                               events.empty() ? 0 : events.back().seq);
            return exit_code_for(e);
        }
    }

    int cmd_replay(const std::string& path, std::ostream& out, std::ostream& err)
    {
        auto const events = read_trace(path);
        auto const report = verify_trace(events);
        for (auto const& check: report.checks)
        {
            if (check.passed)
                out << fmt::format("PASS {}\n", check.name);
            else
                out << fmt::format("FAIL {} at seq {}: {}\n", check.name, check.first_bad_seq.value_or(0),
                                   check.detail);
        }
        if (auto const* failure = report.first_failure())
        {
            err << fmt::format("InvariantViolation: {} first violated at seq {}\n", failure->name,
                               failure->first_bad_seq.value_or(0));
            return kInvariantViolation;
        }
        out << fmt::format("{} events verified\n", events.size());
        return kSuccess;
    }

    int cmd_passk(std::uint64_t n, std::int64_t c, std::uint64_t k, std::ostream& out)
    {
        if (c < 0)
            throw Error(Errc::InvalidInput, "c must be >= 0");
        out << fmt::format("{:.6f}\n", pass_at_k({ n, static_cast<std::uint64_t>(c), k }));
        return kSuccess;
    }

    /// Input CSV: `n,c` per line, optional header.
    int cmd_passrates(const std::string& path, const std::vector<std::uint64_t>& ks, std::ostream& out)
    {
        auto in = std::ifstream(path);
        if (!in)
            throw ParseError(fmt::format("io: cannot open '{}'", path));
        auto problems = std::vector<ProblemSamples> {};
        auto line = std::string {};
        auto line_number = std::size_t { 0 };
        while (std::getline(in, line))
        {
            ++line_number;
            if (line.empty() || line.starts_with("n,"))
                continue;
            auto fields = std::istringstream(line);
            auto sample = ProblemSamples {};
            auto comma = char {};
            if (!(fields >> sample.n >> comma >> sample.c) || comma != ',')
                throw ParseError("expected `n,c`", line_number, 1);
            problems.push_back(sample);
        }
        out << pass_rates_csv(ks, aggregate_pass_rates(problems, ks));
        return kSuccess;
    }

    struct AblateOptions
    {
        std::string fixture;
        std::string book;
        std::string agents = "2-5";
        std::string rounds = "2-5";
        std::string role_policy;
        std::string out_path = "ablation.csv";
        int max_chat_turn = 2;
        std::size_t slots = 2;
    };

    int cmd_ablate(const AblateOptions& options, std::ostream& out)
    {
        auto const fixture = load_query_fixture(options.fixture);
        auto const book = load_script_book(options.book);
        auto const policy = options.role_policy.empty() ? RolePolicy { GeneralRole { std::string(kDefaultGeneralRole) } }
                                                        : parse_role_policy(options.role_policy);
        auto base = RunConfig {};
        base.max_chat_turn = options.max_chat_turn;
        base.max_parallel_groups = options.slots;
        auto const grid = run_ablation_grid(fixture, book, IntRange::parse(options.agents),
                                            IntRange::parse(options.rounds), policy, base);

        auto const csv = grid.to_csv();
        auto csv_file = std::ofstream(options.out_path, std::ios::binary);
        if (!csv_file)
            throw Error(Errc::ConfigError, fmt::format("cannot write '{}'", options.out_path));
        csv_file << csv;
        auto json_path = std::filesystem::path(options.out_path).replace_extension(".json");
        auto json_file = std::ofstream(json_path, std::ios::binary);
        if (!json_file)
            throw Error(Errc::ConfigError, fmt::format("cannot write '{}'", json_path.string()));
        json_file << grid.to_json().dump(2) << '\n';
        out << csv;
        return kSuccess;
    }

} // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    auto app = CLI::App("Multi-agent group-chat orchestration engine", "agc");
    app.require_subcommand(1);

    auto run = RunOptions {};
    auto* run_cmd = app.add_subcommand("run", "Decompose a query, solve it with agent groups, print the answer");
    run_cmd->add_option("--query", run.query, "User query")->required();
    run_cmd->add_option("--query-id", run.query_id, "Query identifier");
    run_cmd->add_option("--config", run.config_path, "JSON config file (flags override it)");
    run_cmd->add_option("--backend", run.backend, "scripted:<path> | remote:<url>#<model>[,<model>...]");
    run_cmd->add_option("--max-action-turn", run.max_action_turn, "Action turns per group chat");
    run_cmd->add_option("--max-chat-turn", run.max_chat_turn, "Chat turns per directed dialogue");
    run_cmd->add_option("--agents", run.agents, "Agents per group");
    run_cmd->add_option("--slots", run.slots, "Parallel group slots");
    run_cmd->add_option("--perception-window", run.perception_window, "Recent messages each agent perceives");
    run_cmd->add_option("--role-policy", run.role_policy, "general:<text> | specified:<roster.json>");
    run_cmd->add_option("--trace", run.trace_path, "JSONL trace output path");
    run_cmd->add_flag("--json", run.json, "Print the answer with its sources as JSON");

    auto trace_path = std::string {};
    auto* replay_cmd = app.add_subcommand("replay", "Verify the invariants of a recorded trace");
    replay_cmd->add_option("trace", trace_path, "Trace file")->required();

    auto n = std::uint64_t { 0 };
    auto c = std::int64_t { 0 };
    auto k = std::uint64_t { 0 };
    auto* passk_cmd = app.add_subcommand("passk", "Print pass@k for n solutions with c correct");
    passk_cmd->add_option("n", n)->required();
    passk_cmd->add_option("c", c)->required();
    passk_cmd->add_option("k", k)->required();

    auto rates_input = std::string {};
    auto ks = std::vector<std::uint64_t> { 1, 3, 5 };
    auto* rates_cmd = app.add_subcommand("passrates", "Mean pass@k table from an `n,c` CSV");
    rates_cmd->add_option("input", rates_input)->required();
    rates_cmd->add_option("--ks", ks, "k values")->delimiter(',');

    auto ablate = AblateOptions {};
    auto* ablate_cmd = app.add_subcommand("ablate", "Run the agents x rounds grid on a scripted fixture");
    ablate_cmd->add_option("--fixture", ablate.fixture, "Query fixture JSON")->required();
    ablate_cmd->add_option("--book", ablate.book, "Script book JSON")->required();
    ablate_cmd->add_option("--agents", ablate.agents, "Agent range, e.g. 2-5");
    ablate_cmd->add_option("--rounds", ablate.rounds, "Action-turn range, e.g. 2-5");
    ablate_cmd->add_option("--role-policy", ablate.role_policy, "general:<text> | specified:<roster.json>");
    ablate_cmd->add_option("--max-chat-turn", ablate.max_chat_turn);
    ablate_cmd->add_option("--slots", ablate.slots);
    ablate_cmd->add_option("--out", ablate.out_path, "CSV output; a .json mirror is written next to it");

    auto argv = std::vector<std::string>(args.rbegin(), args.rend());
    try
    {
        app.parse(std::move(argv));
    }
    catch (const CLI::ParseError& e)
    {
        if (e.get_exit_code() == 0)
        {
            out << app.help();
            return kSuccess;
        }
        err << "ConfigError: " << e.what() << '\n';
        return kConfigError;
    }

    try
    {
        if (*run_cmd)
            return cmd_run(run, out, err);
        if (*replay_cmd)
            return cmd_replay(trace_path, out, err);
        if (*passk_cmd)
            return cmd_passk(n, c, k, out);
        if (*rates_cmd)
            return cmd_passrates(rates_input, ks, out);
        if (*ablate_cmd)
            return cmd_ablate(ablate, out);
    }
    catch (const Error& e)
    {
        err << e.name() << ": " << e.what() << '\n';
        return exit_code_for(e);
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return kPipelineError;
    }
    return kConfigError;
}

} // namespace agc::cli
