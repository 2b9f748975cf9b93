// SPDX-License-Identifier: Apache-2.0
#include <agc/task.hpp>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>

namespace agc
{

std::string TaskId::str() const
{
    return fmt::format("t{}", value);
}

TaskId TaskId::parse(std::string_view text)
{
    if (text.size() < 2 || text.front() != 't')
        throw ParseError(fmt::format("invalid task id '{}'", text));
    auto id = TaskId {};
    auto const* first = text.data() + 1;
    auto const* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, id.value);
    if (ec != std::errc {} || ptr != last)
        throw ParseError(fmt::format("invalid task id '{}'", text));
    return id;
}

std::string_view to_string(TaskState state) noexcept
{
    switch (state)
    {
        case TaskState::Initialization: return "initialization";
        case TaskState::Waiting: return "waiting";
        case TaskState::Execution: return "execution";
        case TaskState::Completion: return "completion";
        case TaskState::Failure: return "failure";
    }
    return "unknown";
}

TaskState parse_task_state(std::string_view text)
{
    for (auto state: kAllTaskStates)
        if (to_string(state) == text)
            return state;
    throw ParseError(fmt::format("unknown task state '{}'", text));
}

IllegalTransitionError::IllegalTransitionError(TaskState from, TaskState to):
    Error(Errc::IllegalTransition, fmt::format("illegal transition {} -> {}", to_string(from), to_string(to))),
    from_(from),
    to_(to)
{
}

Task transition(Task task, TaskState to, std::optional<std::string> result)
{
    if (!is_legal_transition(task.state, to))
        throw IllegalTransitionError(task.state, to);
    if (is_terminal(to) && !result)
        throw Error(Errc::IllegalTransition,
                    fmt::format("transition of {} to {} requires a result", task.id.str(), to_string(to)));
    if (!is_terminal(to) && result)
        throw Error(Errc::IllegalTransition,
                    fmt::format("transition of {} to {} must not carry a result", task.id.str(), to_string(to)));
    task.state = to;
    task.result = std::move(result);
    return task;
}

TaskForest::TaskForest(std::uint64_t first_counter): next_counter_(first_counter)
{
}

void TaskForest::insert_sorted(std::vector<TaskId>& ids, TaskId id)
{
    auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id)
        ids.insert(it, id);
}

const Task& TaskForest::task(TaskId id) const
{
    auto it = tasks_.find(id);
    if (it == tasks_.end())
        throw Error(Errc::UnknownTask, fmt::format("unknown task {}", id.str()));
    return it->second;
}

Task& TaskForest::mutable_task(TaskId id)
{
    auto it = tasks_.find(id);
    if (it == tasks_.end())
        throw Error(Errc::UnknownTask, fmt::format("unknown task {}", id.str()));
    return it->second;
}

TaskId TaskForest::new_task(std::string desc, std::optional<TaskId> father)
{
    if (desc.empty())
        throw Error(Errc::EmptyDescription, "task description must not be empty");
    if (father && !contains(*father))
        throw Error(Errc::UnknownParent, fmt::format("unknown parent {}", father->str()));

    auto const id = TaskId { next_counter_++ };
    auto task = Task {};
    task.id = id;
    task.desc = std::move(desc);
    task.father = father;
    tasks_.emplace(id, std::move(task));
    if (father)
        insert_sorted(mutable_task(*father).sons, id);
    else
        roots_.insert(id);
    return id;
}

bool TaskForest::reaches(TaskId from, TaskId to) const
{
    auto visited = std::set<TaskId> {};
    auto stack = std::vector<TaskId> { from };
    while (!stack.empty())
    {
        auto current = stack.back();
        stack.pop_back();
        if (current == to)
            return true;
        if (!visited.insert(current).second)
            continue;
        for (auto son: task(current).sons)
            stack.push_back(son);
    }
    return false;
}

void TaskForest::link(TaskId parent, TaskId child)
{
    if (parent == child)
        throw Error(Errc::SelfLink, fmt::format("cannot link {} to itself", parent.str()));
    auto& child_task = mutable_task(child);
    auto& parent_task = mutable_task(parent);
    if (child_task.father == parent)
        return;
    if (child_task.father)
        throw Error(Errc::Reparent,
                    fmt::format("{} already has father {}", child.str(), child_task.father->str()));
    if (reaches(child, parent))
        throw Error(Errc::CycleDetected,
                    fmt::format("linking {} -> {} would create a cycle", parent.str(), child.str()));
    child_task.father = parent;
    insert_sorted(parent_task.sons, child);
    roots_.erase(child);
}

void TaskForest::add_prerequisite(TaskId parent, TaskId child)
{
    if (parent == child)
        throw Error(Errc::SelfLink, fmt::format("cannot link {} to itself", parent.str()));
    auto const& child_task = task(child);
    auto& parent_task = mutable_task(parent);
    if (!child_task.father)
        throw Error(Errc::InvalidForest,
                    fmt::format("shared prerequisite {} must already have a father", child.str()));
    if (reaches(child, parent))
        throw Error(Errc::CycleDetected,
                    fmt::format("linking {} -> {} would create a cycle", parent.str(), child.str()));
    insert_sorted(parent_task.sons, child);
}

void TaskForest::transition(TaskId id, TaskState to, std::optional<std::string> result)
{
    auto& slot = mutable_task(id);
    slot = agc::transition(slot, to, std::move(result));
}

std::vector<TaskId> TaskForest::ready_tasks() const
{
    auto ready = std::vector<TaskId> {};
    for (auto const& [id, task]: tasks_)
    {
        if (task.state != TaskState::Waiting)
            continue;
        auto const prerequisites_done = std::all_of(task.sons.begin(), task.sons.end(), [&](TaskId son) {
            return is_terminal(this->task(son).state);
        });
        if (prerequisites_done)
            ready.push_back(id);
    }
    return ready;
}

TaskId TaskForest::root_of(TaskId id) const
{
    auto current = &task(id);
    auto steps = std::size_t { 0 };
    while (current->father)
    {
        if (++steps > tasks_.size())
            throw Error(Errc::InvalidForest, fmt::format("father chain of {} does not terminate", id.str()));
        current = &task(*current->father);
    }
    return current->id;
}

std::vector<TaskId> TaskForest::tree_members(TaskId root) const
{
    if (!task(root).is_root())
        throw Error(Errc::NotARoot, fmt::format("{} is not a root", root.str()));
    auto members = std::set<TaskId> {};
    auto stack = std::vector<TaskId> { root };
    while (!stack.empty())
    {
        auto current = stack.back();
        stack.pop_back();
        if (!members.insert(current).second)
            continue;
        for (auto son: task(current).sons)
            stack.push_back(son);
    }
    return { members.begin(), members.end() };
}

bool TaskForest::tree_complete(TaskId root) const
{
    auto members = tree_members(root);
    return std::all_of(members.begin(), members.end(), [&](TaskId id) { return is_terminal(task(id).state); });
}

std::vector<ChildResult> TaskForest::child_results(TaskId parent) const
{
    auto results = std::vector<ChildResult> {};
    for (auto son: task(parent).sons)
    {
        auto const& child = task(son);
        if (is_terminal(child.state))
            results.push_back({ child.id, child.desc, child.result.value_or("") });
    }
    return results;
}

void TaskForest::merge(const TaskForest& fragment)
{
    for (auto const& [id, task]: fragment.tasks_)
        if (contains(id))
            throw Error(Errc::DuplicateIds, fmt::format("task id {} already present in the forest", id.str()));
    for (auto const& [id, task]: fragment.tasks_)
        tasks_.emplace(id, task);
    roots_.insert(fragment.roots_.begin(), fragment.roots_.end());
    next_counter_ = std::max(next_counter_, fragment.next_counter_);
}

void TaskForest::validate() const
{
    auto fail = [](std::string message) { throw Error(Errc::InvalidForest, std::move(message)); };

    for (auto const& [id, task]: tasks_)
    {
        if (task.id != id)
            fail(fmt::format("task keyed {} carries id {}", id.str(), task.id.str()));
        if (task.desc.empty())
            fail(fmt::format("{} has an empty description", id.str()));
        if (task.result.has_value() != is_terminal(task.state))
            fail(fmt::format("{} result presence does not match state {}", id.str(), to_string(task.state)));
        if (!std::is_sorted(task.sons.begin(), task.sons.end())
            || std::adjacent_find(task.sons.begin(), task.sons.end()) != task.sons.end())
            fail(fmt::format("{} sons are not an ascending set", id.str()));
        if (task.father)
        {
            if (!contains(*task.father))
                fail(fmt::format("{} has unknown father {}", id.str(), task.father->str()));
            auto const& sons = this->task(*task.father).sons;
            if (!std::binary_search(sons.begin(), sons.end(), id))
                fail(fmt::format("{} is missing from the sons of its father {}", id.str(), task.father->str()));
            if (roots_.contains(id))
                fail(fmt::format("{} has a father but is listed as a root", id.str()));
        }
        else if (!roots_.contains(id))
        {
            fail(fmt::format("{} has no father but is not listed as a root", id.str()));
        }
        for (auto son: task.sons)
            if (!contains(son))
                fail(fmt::format("{} lists unknown son {}", id.str(), son.str()));
        if (id.value >= next_counter_)
            fail(fmt::format("{} is not below the id counter", id.str()));
    }
    for (auto root: roots_)
        if (!contains(root))
            fail(fmt::format("unknown root {}", root.str()));

    // Acyclicity of the sons relation (iterative three-colour DFS).
    enum class Mark { White, Grey, Black };
    auto marks = std::map<TaskId, Mark> {};
    for (auto const& [start, unused]: tasks_)
    {
        if (marks[start] != Mark::White)
            continue;
        auto stack = std::vector<std::pair<TaskId, std::size_t>> { { start, 0 } };
        marks[start] = Mark::Grey;
        while (!stack.empty())
        {
            auto& [current, next_son] = stack.back();
            auto const& sons = task(current).sons;
            if (next_son == sons.size())
            {
                marks[current] = Mark::Black;
                stack.pop_back();
                continue;
            }
            auto son = sons[next_son++];
            if (marks[son] == Mark::Grey)
                fail(fmt::format("cycle through {}", son.str()));
            if (marks[son] == Mark::White)
            {
                marks[son] = Mark::Grey;
                stack.emplace_back(son, 0);
            }
        }
    }

    // Father chains terminate and every prerequisite edge stays inside one tree.
    for (auto const& [id, task]: tasks_)
    {
        auto const root = root_of(id);
        for (auto son: task.sons)
            if (root_of(son) != root)
                fail(fmt::format("{} -> {} crosses trees", id.str(), son.str()));
    }
}

nlohmann::json task_to_json(const Task& task)
{
    auto sons = nlohmann::json::array();
    for (auto son: task.sons)
        sons.push_back(son.str());
    return {
        { "id", task.id.str() },
        { "desc", task.desc },
        { "father", task.father ? task.father->str() : std::string(kRootFatherSentinel) },
        { "sons", std::move(sons) },
        { "state", std::string(to_string(task.state)) },
        { "result", task.result ? nlohmann::json(*task.result) : nlohmann::json(nullptr) },
    };
}

nlohmann::json TaskForest::to_json() const
{
    auto tasks = nlohmann::json::array();
    for (auto const& [id, task]: tasks_)
        tasks.push_back(task_to_json(task));
    return { { "tasks", std::move(tasks) } };
}

TaskForest TaskForest::from_json(const nlohmann::json& doc)
{
    if (!doc.is_object() || !doc.contains("tasks") || !doc["tasks"].is_array())
        throw ParseError("forest document must be an object with a \"tasks\" array");

    auto forest = TaskForest {};
    auto max_counter = std::uint64_t { 0 };
    try
    {
        for (auto const& entry: doc["tasks"])
        {
            auto task = Task {};
            task.id = TaskId::parse(entry.at("id").get<std::string>());
            task.desc = entry.at("desc").get<std::string>();
            auto const father = entry.at("father").get<std::string>();
            if (father != kRootFatherSentinel)
                task.father = TaskId::parse(father);
            for (auto const& son: entry.at("sons"))
                task.sons.push_back(TaskId::parse(son.get<std::string>()));
            task.state = parse_task_state(entry.at("state").get<std::string>());
            if (auto const& result = entry.at("result"); !result.is_null())
                task.result = result.get<std::string>();

            max_counter = std::max(max_counter, task.id.value);
            if (!task.father)
                forest.roots_.insert(task.id);
            auto const id = task.id;
            if (!forest.tasks_.emplace(id, std::move(task)).second)
                throw Error(Errc::DuplicateIds, fmt::format("duplicate task id {}", id.str()));
        }
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ParseError(fmt::format("malformed task entry: {}", e.what()));
    }
    forest.next_counter_ = forest.tasks_.empty() ? 1 : max_counter + 1;
    forest.validate();
    return forest;
}

} // namespace agc
