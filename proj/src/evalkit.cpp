// SPDX-License-Identifier: Apache-2.0
#include <agc/evalkit.hpp>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include <charconv>
#include <optional>
#include <fstream>
#include <sstream>

namespace agc
{

void PassAtKInput::validate() const
{
    if (n < 1)
        throw Error(Errc::InvalidInput, "pass@k needs n >= 1");
    if (c > n)
        throw Error(Errc::InvalidInput, fmt::format("c={} exceeds n={}", c, n));
    if (k < 1 || k > n)
        throw Error(Errc::InvalidInput, fmt::format("k={} outside 1..{}", k, n));
}

namespace
{

    /// C(n, k) when it fits in 64 bits.
    std::optional<std::uint64_t> exact_binomial(std::uint64_t n, std::uint64_t k)
    {
        auto result = std::uint64_t { 1 };
        for (auto i = std::uint64_t { 0 }; i < k; ++i)
        {
            // result * (n - i) is divisible by (i + 1) at every step.
            auto product = std::uint64_t {};
            if (__builtin_mul_overflow(result, n - i, &product))
                return std::nullopt;
            result = product / (i + 1);
        }
        return result;
    }

} // namespace

double pass_at_k(const PassAtKInput& input)
{
    input.validate();
    auto const [n, c, k] = input;
    if (n - c < k)
        return 1.0;
    if (auto const total = exact_binomial(n, k))
    {
        auto const misses = *exact_binomial(n - c, k);
        return static_cast<double>(*total - misses) / static_cast<double>(*total);
    }
    // C(n-c, k) / C(n, k) = prod_{i<k} (n-c-i) / (n-i)
    auto none_correct = 1.0;
    for (auto i = std::uint64_t { 0 }; i < k; ++i)
        none_correct *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
    return 1.0 - none_correct;
}

std::vector<double> aggregate_pass_rates(std::span<const ProblemSamples> problems, std::span<const std::uint64_t> ks)
{
    if (problems.empty())
        throw Error(Errc::InvalidInput, "no problems to aggregate");
    if (ks.empty())
        throw Error(Errc::InvalidInput, "no k values requested");
    auto rates = std::vector<double> {};
    for (auto k: ks)
    {
        auto sum = 0.0;
        for (auto const& problem: problems)
            sum += pass_at_k({ problem.n, problem.c, k });
        rates.push_back(sum / static_cast<double>(problems.size()));
    }
    return rates;
}

std::string pass_rates_csv(std::span<const std::uint64_t> ks, std::span<const double> rates)
{
    auto out = std::string("k,mean_pass\n");
    for (auto i = std::size_t { 0 }; i < ks.size() && i < rates.size(); ++i)
        out += fmt::format("{},{:.6f}\n", ks[i], rates[i]);
    return out;
}

IntRange IntRange::parse(std::string_view text)
{
    auto parse_int = [&](std::string_view part) {
        auto value = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
        if (ec != std::errc {} || ptr != part.data() + part.size())
            throw Error(Errc::InvalidInput, fmt::format("invalid range '{}'", text));
        return value;
    };
    auto range = IntRange {};
    if (auto dash = text.find('-'); dash != std::string_view::npos)
    {
        range.first = parse_int(text.substr(0, dash));
        range.last = parse_int(text.substr(dash + 1));
    }
    else
    {
        range.first = range.last = parse_int(text);
    }
    if (range.first < 1 || range.last < range.first)
        throw Error(Errc::InvalidInput, fmt::format("range '{}' must be non-empty and positive", text));
    return range;
}

std::string AblationGrid::to_csv() const
{
    auto out = std::string("agents,rounds,accuracy\n");
    for (auto const& [cell, accuracy]: cells)
        out += fmt::format("{},{},{:.6f}\n", cell.first, cell.second, accuracy);
    return out;
}

nlohmann::json AblationGrid::to_json() const
{
    auto rows = nlohmann::json::array();
    for (auto const& [cell, accuracy]: cells)
        rows.push_back({ { "agents", cell.first }, { "rounds", cell.second }, { "accuracy", accuracy } });
    return {
        { "agents_range", { agents_range.first, agents_range.last } },
        { "rounds_range", { rounds_range.first, rounds_range.last } },
        { "cells", std::move(rows) },
    };
}

QueryFixture load_query_fixture(const std::filesystem::path& path)
{
    auto in = std::ifstream(path, std::ios::binary);
    if (!in)
        throw ParseError(fmt::format("io: cannot open fixture '{}'", path.string()));
    auto buffer = std::ostringstream {};
    buffer << in.rdbuf();
    try
    {
        auto const doc = nlohmann::json::parse(buffer.str());
        return { doc.at("query").get<std::string>(), doc.at("expected_answer").get<std::string>() };
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ParseError(fmt::format("invalid fixture '{}': {}", path.string(), e.what()));
    }
}

std::string ablation_cell_tag(int agents, int rounds)
{
    return fmt::format("agents={} rounds={}", agents, rounds);
}

namespace
{

    std::string trimmed(std::string_view text)
    {
        auto const first = text.find_first_not_of(" \t\r\n");
        if (first == std::string_view::npos)
            return {};
        auto const last = text.find_last_not_of(" \t\r\n");
        return std::string(text.substr(first, last - first + 1));
    }

} // namespace

AblationGrid run_ablation_grid(const QueryFixture& fixture, const ScriptBook& book, IntRange agents_range,
                               IntRange rounds_range, const RolePolicy& policy, RunConfig base)
{
    if (agents_range.size() < 1 || rounds_range.size() < 1)
        throw Error(Errc::InvalidInput, "ablation ranges must be non-empty");

    for (auto agents = agents_range.first; agents <= agents_range.last; ++agents)
        for (auto rounds = rounds_range.first; rounds <= rounds_range.last; ++rounds)
            if (!book.mentions(ablation_cell_tag(agents, rounds)))
                throw Error(Errc::ScriptExhausted,
                            fmt::format("script book has no entries for cell ({}, {}) [{}]", agents, rounds,
                                        ablation_cell_tag(agents, rounds)));

    auto grid = AblationGrid { agents_range, rounds_range, {} };
    auto const expected = trimmed(fixture.expected_answer);
    for (auto agents = agents_range.first; agents <= agents_range.last; ++agents)
    {
        for (auto rounds = rounds_range.first; rounds <= rounds_range.last; ++rounds)
        {
            auto config = base;
            config.backend.kind = EngineKind::Scripted;
            config.backend.script_path = "<in-memory>";
            config.n_agents = static_cast<std::size_t>(agents);
            config.max_action_turn = rounds;
            config.run_tag = ablation_cell_tag(agents, rounds);
            config.role_policy = policy;
            if (auto* specified = std::get_if<SpecifiedRole>(&config.role_policy))
            {
                if (specified->roster.size() < config.n_agents)
                    throw Error(Errc::RosterMismatch, fmt::format("roster has {} entries, cell ({}, {}) needs {}",
                                                                  specified->roster.size(), agents, rounds, agents));
                specified->roster.resize(config.n_agents);
            }

            auto gateway = make_gateway(config, std::make_shared<ScriptBook>(book));
            auto sink = NullSink {};
            auto const query = UserQuery { fixture.query, fmt::format("ablation-a{}-r{}", agents, rounds) };
            auto accuracy = 0.0;
            try
            {
                auto const run = run_pipeline(query, config, *gateway, sink);
                accuracy = trimmed(run.answer.answer) == expected ? 1.0 : 0.0;
            }
            catch (const Error& e)
            {
                if (e.code() == Errc::ScriptExhausted)
                    throw Error(Errc::ScriptExhausted,
                                fmt::format("cell ({}, {}): {}", agents, rounds, e.what()));
                if (e.code() == Errc::ConfigError || e.code() == Errc::InvalidConfig)
                    throw;
                // Any other pipeline failure scores the cell as incorrect.
            }
            grid.cells[{ agents, rounds }] = accuracy;
        }
    }
    return grid;
}

} // namespace agc
