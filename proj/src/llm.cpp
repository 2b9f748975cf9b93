// SPDX-License-Identifier: Apache-2.0
#include <agc/llm.hpp>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

namespace agc
{

void EngineSpec::validate() const
{
    if (name.empty())
        throw Error(Errc::InvalidConfig, "engine name must not be empty");
    if (kind == EngineKind::Remote && (!endpoint || endpoint->empty()))
        throw Error(Errc::InvalidConfig, fmt::format("remote engine '{}' requires an endpoint", name));
    if (kind == EngineKind::Scripted && endpoint)
        throw Error(Errc::InvalidConfig, fmt::format("scripted engine '{}' must not have an endpoint", name));
    if (!(params.temperature >= 0.0))
        throw Error(Errc::InvalidConfig, "temperature must be >= 0");
    if (params.max_tokens <= 0)
        throw Error(Errc::InvalidConfig, "max_tokens must be positive");
}

EngineSpec EngineSpec::scripted(std::string name)
{
    return EngineSpec { .name = std::move(name), .kind = EngineKind::Scripted, .endpoint = {}, .params = {} };
}

EngineSpec EngineSpec::remote(std::string name, std::string endpoint)
{
    return EngineSpec { .name = std::move(name),
                        .kind = EngineKind::Remote,
                        .endpoint = std::move(endpoint),
                        .params = {} };
}

std::string_view to_string(Role role) noexcept
{
    switch (role)
    {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

std::string canonical_prompt(std::span<const ChatMessage> messages)
{
    auto out = std::string {};
    for (auto const& message: messages)
    {
        if (!out.empty())
            out += '\n';
        out += to_string(message.role);
        out += ": ";
        out += message.content;
    }
    return out;
}

std::string prompt_hash(std::span<const ChatMessage> messages)
{
    auto hash = std::uint64_t { 0xcbf29ce484222325ULL };
    for (unsigned char byte: canonical_prompt(messages))
    {
        hash ^= byte;
        hash *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", hash);
}

// ---------------------------------------------------------------------------
// ScriptBook

ScriptBook::ScriptBook(std::vector<Entry> entries)
{
    for (auto& entry: entries)
        add(entry.kind, std::move(entry.value), { entry.responses.begin(), entry.responses.end() });
}

ScriptBook::ScriptBook(const ScriptBook& other)
{
    auto lock = std::lock_guard(other.mutex_);
    entries_ = other.entries_;
    exact_index_ = other.exact_index_;
    wildcard_last_ = other.wildcard_last_;
}

ScriptBook& ScriptBook::operator=(const ScriptBook& other)
{
    if (this == &other)
        return *this;
    auto lock = std::scoped_lock(mutex_, other.mutex_);
    entries_ = other.entries_;
    exact_index_ = other.exact_index_;
    wildcard_last_ = other.wildcard_last_;
    return *this;
}

void ScriptBook::add(MatchKind kind, std::string value, std::vector<std::string> responses)
{
    auto lock = std::lock_guard(mutex_);
    if (kind == MatchKind::Exact)
    {
        if (exact_index_.contains(value))
            throw ParseError(fmt::format("duplicate exact key '{}'", value));
        exact_index_.emplace(value, entries_.size());
    }
    entries_.push_back(Entry { kind, std::move(value), { responses.begin(), responses.end() } });
}

std::optional<std::string> ScriptBook::next(std::span<const ChatMessage> messages)
{
    auto const prompt = canonical_prompt(messages);
    auto lock = std::lock_guard(mutex_);

    auto pop = [](Entry& entry) {
        auto response = std::move(entry.responses.front());
        entry.responses.pop_front();
        return response;
    };

    if (!exact_index_.empty())
    {
        if (auto it = exact_index_.find(prompt_hash(messages)); it != exact_index_.end())
        {
            auto& entry = entries_[it->second];
            if (!entry.responses.empty())
                return pop(entry);
        }
    }
    for (auto& entry: entries_)
        if (entry.kind == MatchKind::Substring && !entry.responses.empty()
            && prompt.find(entry.value) != std::string::npos)
            return pop(entry);
    for (auto& entry: entries_)
    {
        if (entry.kind != MatchKind::Any)
            continue;
        if (!entry.responses.empty())
        {
            wildcard_last_ = pop(entry);
            return wildcard_last_;
        }
        if (wildcard_last_)
            return wildcard_last_;
    }
    return std::nullopt;
}

std::size_t ScriptBook::size() const
{
    auto lock = std::lock_guard(mutex_);
    return entries_.size();
}

std::vector<ScriptBook::Entry> ScriptBook::entries() const
{
    auto lock = std::lock_guard(mutex_);
    return entries_;
}

bool ScriptBook::mentions(std::string_view tag) const
{
    auto lock = std::lock_guard(mutex_);
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const Entry& entry) { return entry.value.find(tag) != std::string::npos; });
}

namespace
{

    std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte)
    {
        auto line = std::size_t { 1 };
        auto column = std::size_t { 1 };
        for (auto i = std::size_t { 0 }; i < std::min(byte, text.size()); ++i)
        {
            if (text[i] == '\n')
            {
                ++line;
                column = 1;
            }
            else
            {
                ++column;
            }
        }
        return { line, column };
    }

    MatchKind parse_match_kind(const std::string& kind)
    {
        if (kind == "exact")
            return MatchKind::Exact;
        if (kind == "substring")
            return MatchKind::Substring;
        if (kind == "any")
            return MatchKind::Any;
        throw ParseError(fmt::format("unknown match kind '{}'", kind));
    }

} // namespace

ScriptBook parse_script_book(std::string_view text)
{
    auto doc = nlohmann::json {};
    try
    {
        doc = nlohmann::json::parse(text);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        // byte is 1-based and points one past the offending character.
        auto [line, column] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError("invalid script book JSON", line, column);
    }

    if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array())
        throw ParseError("script book must be an object with an \"entries\" array");

    auto book = ScriptBook {};
    auto index = std::size_t { 0 };
    for (auto const& entry: doc["entries"])
    {
        try
        {
            auto const& match = entry.at("match");
            auto const kind = parse_match_kind(match.at("kind").get<std::string>());
            auto value = match.value("value", std::string {});
            if (kind != MatchKind::Any && value.empty())
                throw ParseError("match value must not be empty");
            auto responses = entry.at("responses").get<std::vector<std::string>>();
            book.add(kind, std::move(value), std::move(responses));
        }
        catch (const nlohmann::json::exception& e)
        {
            throw ParseError(fmt::format("script entry {}: {}", index, e.what()));
        }
        catch (const ParseError& e)
        {
            throw ParseError(fmt::format("script entry {}: {}", index, e.what()));
        }
        ++index;
    }
    return book;
}

ScriptBook load_script_book(const std::filesystem::path& path)
{
    auto in = std::ifstream(path, std::ios::binary);
    if (!in)
        throw ParseError(fmt::format("io: cannot open script book '{}'", path.string()));
    auto buffer = std::ostringstream {};
    buffer << in.rdbuf();
    return parse_script_book(buffer.str());
}

// ---------------------------------------------------------------------------
// Engines

ScriptedEngine::ScriptedEngine(std::shared_ptr<ScriptBook> book, std::chrono::milliseconds delay):
    book_(std::move(book)), delay_(delay)
{
}

ChatMessage ScriptedEngine::complete(std::span<const ChatMessage> messages)
{
    if (delay_.count() > 0)
        std::this_thread::sleep_for(delay_);
    auto response = book_ ? book_->next(messages) : std::nullopt;
    if (!response)
        throw Error(Errc::ScriptExhausted,
                    fmt::format("no scripted response for prompt {}", prompt_hash(messages)));
    return { Role::Assistant, std::move(*response) };
}

FunctionEngine::FunctionEngine(Fn fn): fn_(std::move(fn))
{
}

ChatMessage FunctionEngine::complete(std::span<const ChatMessage> messages)
{
    return { Role::Assistant, fn_(messages) };
}

RemoteOptions RemoteOptions::from_env()
{
    auto options = RemoteOptions {};
    if (auto const* key = std::getenv("AGC_API_KEY"); key && *key)
        options.api_key = key;
    if (auto const* secs = std::getenv("AGC_TIMEOUT_SECS"); secs && *secs)
    {
        try
        {
            options.timeout = std::chrono::seconds(std::stol(secs));
        }
        catch (const std::exception&)
        {
            throw Error(Errc::ConfigError, fmt::format("AGC_TIMEOUT_SECS is not an integer: '{}'", secs));
        }
    }
    return options;
}

std::string chat_request_body(const EngineSpec& spec, std::span<const ChatMessage> messages)
{
    auto wire = nlohmann::json::array();
    for (auto const& message: messages)
        wire.push_back({ { "role", std::string(to_string(message.role)) }, { "content", message.content } });
    auto body = nlohmann::json {
        { "model", spec.name },
        { "messages", std::move(wire) },
        { "temperature", spec.params.temperature },
        { "max_tokens", spec.params.max_tokens },
    };
    if (spec.params.seed)
        body["seed"] = *spec.params.seed;
    return body.dump();
}

std::string parse_chat_response(std::string_view body)
{
    try
    {
        auto doc = nlohmann::json::parse(body);
        auto const& content = doc.at("choices").at(0).at("message").at("content");
        if (content.is_null())
            return {};
        return content.get<std::string>();
    }
    catch (const nlohmann::json::exception& e)
    {
        throw Error(Errc::MalformedResponse, fmt::format("cannot read choices[0].message.content: {}", e.what()));
    }
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::shared_ptr<ScriptBook> book, RemoteOptions remote, std::chrono::milliseconds scripted_delay):
    book_(book), scripted_(std::make_shared<ScriptedEngine>(std::move(book), scripted_delay)), remote_(std::move(remote))
{
}

void Gateway::register_engine(std::string name, std::shared_ptr<Engine> engine)
{
    auto lock = std::lock_guard(mutex_);
    named_[std::move(name)] = std::move(engine);
}

std::shared_ptr<Engine> Gateway::resolve(const EngineSpec& engine)
{
    auto lock = std::lock_guard(mutex_);
    if (auto it = named_.find(engine.name); it != named_.end())
        return it->second;
    if (engine.kind == EngineKind::Scripted)
    {
        if (!scripted_)
            scripted_ = std::make_shared<ScriptedEngine>(book_);
        return scripted_;
    }
    auto key = engine.name + '\n' + engine.endpoint.value_or("");
    auto& slot = remotes_[key];
    if (!slot)
        slot = std::make_shared<RemoteEngine>(engine, remote_);
    return slot;
}

ChatMessage Gateway::complete(const EngineSpec& engine, std::span<const ChatMessage> messages)
{
    if (messages.empty())
        throw Error(Errc::InvalidMessages, "complete() needs at least one message");
    if (messages.front().role == Role::Assistant)
        throw Error(Errc::InvalidMessages, "the first message must be a system or user message");
    for (auto const& message: messages)
        if (message.role != Role::Assistant && message.content.empty())
            throw Error(Errc::InvalidMessages, "only assistant messages may be empty");
    engine.validate();
    auto reply = resolve(engine)->complete(messages);
    reply.role = Role::Assistant;
    return reply;
}

} // namespace agc
