// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace agc::prompts
{

/// Bumped whenever a template changes; golden traces depend on the exact text.
inline constexpr std::string_view kVersion = "agc-prompts/1";

// Each user prompt starts with a stage header line so scripted fixtures can
// key responses by stage (and by task, where one is involved).

inline constexpr std::string_view kDecomposeSystem =
    "You are the Query Manager of a multi-agent system. You split user requests into tasks that "
    "specialised agent groups can solve.";

inline constexpr std::string_view kDecompose = R"(QUERY DECOMPOSITION{{tag}}
User query: {{query}}

Split the query into at most {{max_nodes}} tasks. Reply with only a JSON object of this form:
{"root":"<description of the overall task>","tasks":[{"id":"a","desc":"...","deps":["b","c"]}]}
Rules: ids are short unique strings; "deps" lists the ids of tasks whose results this task needs; there must be no cycles.)";

inline constexpr std::string_view kRepair =
    R"(Your previous reply could not be used: {{error}}
Reply again with only the JSON object.)";

inline constexpr std::string_view kDecide = R"(ACTION DECISION | TASK: {{task}}
You are {{agent}} ({{object}}). Action turn {{round}} of {{rounds}}.
{{perception}}
GROUP MEMBERS:
{{roster}}
Decide your next action. Reply with only JSON: {"target":"ALL" or an agent id,"message":"..."}
Use "ALL" to address the whole group or an agent id to open a direct dialogue.)";

inline constexpr std::string_view kRespond = R"(DIRECT DIALOGUE | TASK: {{task}}
You are {{agent}} ({{object}}) in a direct dialogue with {{peer}}.
{{perception}}
DIALOGUE SO FAR:
{{dialogue}}
Reply to {{peer}}. Reply with an empty message to end the dialogue.)";

inline constexpr std::string_view kSummarizeSystem =
    "You are the Group Manager. You keep concise records of group discussions.";

inline constexpr std::string_view kSummarize = R"(ROUND SUMMARY | TASK: {{task}}
Messages of action turn {{round}}:
{{messages}}
Summarize the key information and conclusions of this turn.)";

inline constexpr std::string_view kCheckSystem =
    "You are the Task Manager. You judge whether a group has finished its task.";

inline constexpr std::string_view kCheck = R"(COMPLETION CHECK | TASK: {{task}}
ROUND {{round}} OF {{rounds}} | AGENTS {{agents}}
Round summaries:
{{summaries}}
Reply with only JSON: {"complete":true or false,"result":"<the task output when complete>"})";

inline constexpr std::string_view kQuality = R"(QUALITY ASSESSMENT | TASK: {{task}}
Proposed result: {{result}}
Round summaries:
{{summaries}}
Has the discussion reached an effective conclusion that meets the task requirements?
Reply with only JSON: {"effective":true or false})";

inline constexpr std::string_view kIntegrate = R"(FINAL ANSWER INTEGRATION
User query: {{query}}
Overall result: {{root_result}}
Task results:
{{results}}
Write the final answer to the user query.)";

/// Replaces every `{{name}}` with its value. Unknown placeholders are left as-is.
std::string render(std::string_view tmpl, std::initializer_list<std::pair<std::string_view, std::string_view>> values);

/// Parses the first JSON object embedded in an LLM reply (tolerates code fences
/// and surrounding prose). Throws ParseError.
nlohmann::json parse_object_reply(std::string_view reply);

} // namespace agc::prompts
