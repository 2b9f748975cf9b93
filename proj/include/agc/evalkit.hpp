// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <agc/group_runtime.hpp>
#include <agc/llm.hpp>
#include <agc/pipeline.hpp>

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace agc
{

struct PassAtKInput
{
    std::uint64_t n = 0; // generated solutions
    std::uint64_t c = 0; // correct solutions
    std::uint64_t k = 0; // sample size

    void validate() const; // InvalidInput unless n >= 1, c <= n, 1 <= k <= n
};

/// Probability that a k-subset of n solutions (c correct) contains a correct
/// one: 1 - C(n-c, k) / C(n, k). Exact integer binomials are used while they
/// fit in 64 bits, a running product beyond that.
double pass_at_k(const PassAtKInput& input);

struct ProblemSamples
{
    std::uint64_t n = 0;
    std::uint64_t c = 0;
};

/// Mean pass@k over problems, one value per entry of `ks`.
std::vector<double> aggregate_pass_rates(std::span<const ProblemSamples> problems, std::span<const std::uint64_t> ks);

/// CSV `k,mean_pass`.
std::string pass_rates_csv(std::span<const std::uint64_t> ks, std::span<const double> rates);

/// Inclusive integer range written as `a-b` or `a`.
struct IntRange
{
    int first = 1;
    int last = 1;

    static IntRange parse(std::string_view text);
    int size() const { return last - first + 1; }
};

struct AblationGrid
{
    IntRange agents_range;
    IntRange rounds_range;
    std::map<std::pair<int, int>, double> cells; // (agents, rounds) -> accuracy

    /// CSV `agents,rounds,accuracy`, agents-major order.
    std::string to_csv() const;
    nlohmann::json to_json() const;
};

/// A query with its reference answer.
struct QueryFixture
{
    std::string query;
    std::string expected_answer;
};

QueryFixture load_query_fixture(const std::filesystem::path& path);

/// Tag placed in the decomposition prompt of each grid cell.
std::string ablation_cell_tag(int agents, int rounds);

/// Runs the full pipeline once per (agents, rounds) cell on an isolated copy
/// of `book`, scoring 1 when the final answer equals the expected answer.
/// Throws ScriptExhausted naming the first cell the book does not mention.
AblationGrid run_ablation_grid(const QueryFixture& fixture, const ScriptBook& book, IntRange agents_range,
                               IntRange rounds_range, const RolePolicy& policy, RunConfig base = {});

} // namespace agc
