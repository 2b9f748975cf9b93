// SPDX-License-Identifier: Apache-2.0
#include <agc/trace.hpp>

#include <fmt/core.h>

#include <chrono>
#include <ctime>
#include <map>
#include <set>
#include <sstream>

namespace agc
{

namespace
{

    constexpr std::pair<EventKind, std::string_view> kEventNames[] = {
        { EventKind::TreeSubmitted, "tree_submitted" },
        { EventKind::Dispatched, "dispatched" },
        { EventKind::AgentAction, "agent_action" },
        { EventKind::DialogueEntry, "dialogue_entry" },
        { EventKind::RoundSummary, "round_summary" },
        { EventKind::CompletionCheck, "completion_check" },
        { EventKind::TaskCompleted, "task_completed" },
        { EventKind::TaskFailed, "task_failed" },
        { EventKind::TreeComplete, "tree_complete" },
        { EventKind::FinalAnswer, "final_answer" },
    };

} // namespace

std::string_view to_string(EventKind kind) noexcept
{
    for (auto const& [k, name]: kEventNames)
        if (k == kind)
            return name;
    return "unknown";
}

EventKind parse_event_kind(std::string_view text)
{
    for (auto const& [kind, name]: kEventNames)
        if (name == text)
            return kind;
    throw ParseError(fmt::format("unknown event kind '{}'", text));
}

std::string current_timestamp()
{
    using namespace std::chrono;
    auto const now = system_clock::now();
    auto const secs = system_clock::to_time_t(now);
    auto const millis = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    auto tm = std::tm {};
    gmtime_r(&secs, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%S", &tm);
    return fmt::format("{}.{:03}Z", buffer, millis);
}

TraceWriter::TraceWriter(const std::filesystem::path& path)
{
    file_.emplace(path, std::ios::binary | std::ios::trunc);
    if (!*file_)
        throw Error(Errc::ConfigError, fmt::format("cannot open trace file '{}'", path.string()));
}

void TraceWriter::emit(EventKind kind, nlohmann::json payload)
{
    auto lock = std::lock_guard(mutex_);
    auto event = TraceEvent {};
    event.seq = events_.size() + 1;
    event.ts = current_timestamp();
    event.kind = kind;
    event.payload = std::move(payload);
    if (file_)
    {
        *file_ << to_jsonl_line(event) << '\n';
        file_->flush();
    }
    events_.push_back(std::move(event));
}

std::vector<TraceEvent> TraceWriter::events() const
{
    auto lock = std::lock_guard(mutex_);
    return events_;
}

void BufferedSink::emit(EventKind kind, nlohmann::json payload)
{
    auto lock = std::lock_guard(mutex_);
    pending_.emplace_back(kind, std::move(payload));
}

void BufferedSink::flush_into(EventSink& target)
{
    auto pending = decltype(pending_) {};
    {
        auto lock = std::lock_guard(mutex_);
        pending.swap(pending_);
    }
    for (auto& [kind, payload]: pending)
        target.emit(kind, std::move(payload));
}

std::string to_jsonl_line(const TraceEvent& event)
{
    auto line = nlohmann::ordered_json {};
    line["seq"] = event.seq;
    line["ts"] = event.ts;
    line["kind"] = std::string(to_string(event.kind));
    line["payload"] = event.payload;
    return line.dump();
}

TraceEvent parse_trace_line(std::string_view line, std::size_t line_number)
{
    auto doc = nlohmann::json {};
    try
    {
        doc = nlohmann::json::parse(line);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ParseError("malformed trace line", line_number, e.byte);
    }
    try
    {
        auto event = TraceEvent {};
        event.seq = doc.at("seq").get<std::uint64_t>();
        event.ts = doc.value("ts", std::string {});
        event.kind = parse_event_kind(doc.at("kind").get<std::string>());
        event.payload = doc.at("payload");
        if (!event.payload.is_object())
            throw ParseError("payload must be an object", line_number, 1);
        return event;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ParseError(fmt::format("trace line is missing fields: {}", e.what()), line_number, 1);
    }
}

std::vector<TraceEvent> parse_trace(std::string_view text)
{
    auto events = std::vector<TraceEvent> {};
    auto line_number = std::size_t { 0 };
    auto start = std::size_t { 0 };
    while (start <= text.size())
    {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        ++line_number;
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.find_first_not_of(" \t") != std::string_view::npos)
            events.push_back(parse_trace_line(line, line_number));
        start = end + 1;
    }
    if (events.empty())
        throw ParseError("trace is empty");
    return events;
}

std::vector<TraceEvent> read_trace(const std::filesystem::path& path)
{
    auto in = std::ifstream(path, std::ios::binary);
    if (!in)
        throw ParseError(fmt::format("io: cannot open trace '{}'", path.string()));
    auto buffer = std::ostringstream {};
    buffer << in.rdbuf();
    return parse_trace(buffer.str());
}

std::string strip_timestamps(const std::vector<TraceEvent>& events)
{
    auto out = std::string {};
    for (auto const& event: events)
    {
        auto line = nlohmann::ordered_json {};
        line["seq"] = event.seq;
        line["kind"] = std::string(to_string(event.kind));
        line["payload"] = event.payload;
        out += line.dump();
        out += '\n';
    }
    return out;
}

bool ReplayReport::ok() const
{
    return first_failure() == nullptr;
}

const InvariantCheck* ReplayReport::first_failure() const
{
    for (auto const& check: checks)
        if (!check.passed)
            return &check;
    return nullptr;
}

namespace
{

    class CheckRecorder
    {
      public:
        explicit CheckRecorder(std::string name) { check_.name = std::move(name); }

        void fail(std::uint64_t seq, std::string detail)
        {
            if (!check_.passed)
                return;
            check_.passed = false;
            check_.first_bad_seq = seq;
            check_.detail = std::move(detail);
        }

        bool failed() const { return !check_.passed; }
        InvariantCheck take() { return std::move(check_); }

      private:
        InvariantCheck check_;
    };

    std::string task_field(const nlohmann::json& payload)
    {
        if (auto it = payload.find("task"); it != payload.end() && it->is_string())
            return it->get<std::string>();
        return {};
    }

} // namespace

ReplayReport verify_trace(const std::vector<TraceEvent>& events)
{
    auto monotonic = CheckRecorder("seq_monotonic");
    auto causal = CheckRecorder("causal_order");
    auto slots = CheckRecorder("slot_bound");
    auto topo = CheckRecorder("topological_safety");
    auto exactly_once = CheckRecorder("exactly_once");

    struct TaskInfo
    {
        std::string root;
        std::vector<std::string> sons;
        bool dispatched = false;
        int terminal_events = 0;
    };
    auto tasks = std::map<std::string, TaskInfo> {};
    auto tree_members = std::map<std::string, std::vector<std::string>> {};
    auto completed_trees = std::set<std::string> {};
    auto slot_limit = std::optional<std::uint64_t> {};
    auto outstanding = std::uint64_t { 0 };
    auto actions = std::map<std::pair<std::string, std::int64_t>, std::int64_t> {};
    auto previous_seq = std::optional<std::uint64_t> {};

    auto is_terminal = [&](const std::string& id) {
        auto it = tasks.find(id);
        return it != tasks.end() && it->second.terminal_events > 0;
    };

    for (auto const& event: events)
    {
        auto const seq = event.seq;
        if (previous_seq && seq <= *previous_seq)
            monotonic.fail(seq, fmt::format("seq {} follows {}", seq, *previous_seq));
        previous_seq = seq;

        auto const& payload = event.payload;
        auto const task = task_field(payload);

        switch (event.kind)
        {
            case EventKind::TreeSubmitted: {
                auto const root = payload.value("root", std::string {});
                if (auto limit = payload.find("slots"); limit != payload.end() && limit->is_number_unsigned())
                    slot_limit = slot_limit ? std::min(*slot_limit, limit->get<std::uint64_t>())
                                            : limit->get<std::uint64_t>();
                for (auto const& entry: payload.value("tasks", nlohmann::json::array()))
                {
                    auto const id = entry.value("id", std::string {});
                    if (tasks.contains(id))
                        causal.fail(seq, fmt::format("task {} submitted twice", id));
                    auto info = TaskInfo {};
                    info.root = root;
                    for (auto const& son: entry.value("sons", nlohmann::json::array()))
                        info.sons.push_back(son.get<std::string>());
                    tasks[id] = std::move(info);
                    tree_members[root].push_back(id);
                }
                break;
            }
            case EventKind::Dispatched: {
                auto it = tasks.find(task);
                if (it == tasks.end())
                {
                    causal.fail(seq, fmt::format("{} dispatched before submission", task));
                    break;
                }
                if (it->second.dispatched)
                    causal.fail(seq, fmt::format("{} dispatched twice", task));
                it->second.dispatched = true;
                for (auto const& son: it->second.sons)
                    if (!is_terminal(son))
                        topo.fail(seq, fmt::format("{} dispatched before its son {} finished", task, son));
                ++outstanding;
                if (slot_limit && outstanding > *slot_limit)
                    slots.fail(seq, fmt::format("{} outstanding tickets exceed {} slots", outstanding, *slot_limit));
                break;
            }
            case EventKind::AgentAction:
            case EventKind::DialogueEntry:
            case EventKind::RoundSummary:
            case EventKind::CompletionCheck: {
                auto it = tasks.find(task);
                if (it == tasks.end() || !it->second.dispatched || it->second.terminal_events > 0)
                {
                    causal.fail(seq, fmt::format("{} event for task {} outside its execution", to_string(event.kind),
                                                 task));
                    break;
                }
                auto const round = payload.value("round", std::int64_t { 0 });
                if (event.kind == EventKind::AgentAction)
                    ++actions[{ task, round }];
                if (event.kind == EventKind::RoundSummary)
                {
                    auto const agents = payload.value("agents", std::int64_t { -1 });
                    if (agents >= 0 && actions[{ task, round }] > agents)
                        causal.fail(seq, fmt::format("round {} of {} has more actions than agents", round, task));
                }
                break;
            }
            case EventKind::TaskCompleted:
            case EventKind::TaskFailed: {
                auto it = tasks.find(task);
                if (it == tasks.end() || !it->second.dispatched)
                {
                    causal.fail(seq, fmt::format("{} for {} before its dispatch", to_string(event.kind), task));
                    break;
                }
                if (++it->second.terminal_events > 1)
                    exactly_once.fail(seq, fmt::format("{} terminated more than once", task));
                else if (outstanding > 0)
                    --outstanding;
                break;
            }
            case EventKind::TreeComplete: {
                auto const root = payload.value("root", std::string {});
                auto members = tree_members.find(root);
                if (members == tree_members.end())
                {
                    causal.fail(seq, fmt::format("tree_complete for unknown root {}", root));
                    break;
                }
                for (auto const& id: members->second)
                    if (!is_terminal(id))
                    {
                        causal.fail(seq, fmt::format("tree {} complete while {} is unfinished", root, id));
                        break;
                    }
                if (!completed_trees.insert(root).second)
                    causal.fail(seq, fmt::format("tree {} completed twice", root));
                break;
            }
            case EventKind::FinalAnswer: {
                auto const root = payload.value("root", std::string {});
                if (!completed_trees.contains(root))
                    causal.fail(seq, fmt::format("final answer for {} before tree_complete", root));
                break;
            }
        }
    }

    auto const last_seq = previous_seq.value_or(0);
    for (auto const& [id, info]: tasks)
        if (info.dispatched && info.terminal_events == 0)
            exactly_once.fail(last_seq, fmt::format("{} was dispatched but never finished", id));

    auto report = ReplayReport {};
    report.checks.push_back(monotonic.take());
    report.checks.push_back(causal.take());
    report.checks.push_back(slots.take());
    report.checks.push_back(topo.take());
    report.checks.push_back(exactly_once.take());
    return report;
}

} // namespace agc
