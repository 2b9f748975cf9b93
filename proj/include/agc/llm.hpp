// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <agc/error.hpp>

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agc
{

enum class EngineKind
{
    Scripted,
    Remote,
};

struct SamplingParams
{
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::int64_t> seed;
};

/// Binding of an agent (or manager) to an inference engine.
struct EngineSpec
{
    std::string name;
    EngineKind kind = EngineKind::Scripted;
    std::optional<std::string> endpoint; // Remote only
    SamplingParams params;

    /// Throws InvalidConfig when the kind/endpoint pairing or the sampling
    /// parameters are invalid.
    void validate() const;

    static EngineSpec scripted(std::string name);
    static EngineSpec remote(std::string name, std::string endpoint);
};

enum class Role
{
    System,
    User,
    Assistant,
};

std::string_view to_string(Role role) noexcept;

struct ChatMessage
{
    Role role = Role::User;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// `role: content` lines joined by newlines; substring keys match against it.
std::string canonical_prompt(std::span<const ChatMessage> messages);

/// 16 lowercase hex digits of FNV-1a-64 over canonical_prompt(messages).
std::string prompt_hash(std::span<const ChatMessage> messages);

/// Inference engine interface. An empty assistant reply means "declines to respond".
class Engine
{
  public:
    virtual ~Engine() = default;
    virtual ChatMessage complete(std::span<const ChatMessage> messages) = 0;
};

enum class MatchKind
{
    Exact,
    Substring,
    Any,
};

/// Deterministic canned-response store.
///
/// Lookup order: exact hash, then the first substring entry (insertion order)
/// contained in the prompt, then the wildcard. Each queue is consumed FIFO and
/// drained entries are skipped; the wildcard repeats its last response once
/// drained. Copies get an independent cursor.
class ScriptBook
{
  public:
    struct Entry
    {
        MatchKind kind = MatchKind::Any;
        std::string value;
        std::deque<std::string> responses;
    };

    ScriptBook() = default;
    explicit ScriptBook(std::vector<Entry> entries);
    ScriptBook(const ScriptBook& other);
    ScriptBook& operator=(const ScriptBook& other);

    void add(MatchKind kind, std::string value, std::vector<std::string> responses);

    /// Next response for the prompt, or nullopt when nothing matches.
    std::optional<std::string> next(std::span<const ChatMessage> messages);

    std::size_t size() const;
    std::vector<Entry> entries() const;

    /// True when some entry's match value contains `tag`.
    bool mentions(std::string_view tag) const;

  private:
    mutable std::mutex mutex_;
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> exact_index_;
    std::optional<std::string> wildcard_last_;
};

/// Parses the ScriptBook JSON schema
/// `{"entries":[{"match":{"kind":"exact|substring|any","value":"..."},"responses":[...]}]}`.
ScriptBook parse_script_book(std::string_view text);
ScriptBook load_script_book(const std::filesystem::path& path);

class ScriptedEngine final : public Engine
{
  public:
    explicit ScriptedEngine(std::shared_ptr<ScriptBook> book, std::chrono::milliseconds delay = {});

    ChatMessage complete(std::span<const ChatMessage> messages) override;

  private:
    std::shared_ptr<ScriptBook> book_;
    std::chrono::milliseconds delay_;
};

/// Wraps a callable; handy for tests and custom backends.
class FunctionEngine final : public Engine
{
  public:
    using Fn = std::function<std::string(std::span<const ChatMessage>)>;

    explicit FunctionEngine(Fn fn);

    ChatMessage complete(std::span<const ChatMessage> messages) override;

  private:
    Fn fn_;
};

struct RemoteOptions
{
    std::optional<std::string> api_key;
    std::chrono::milliseconds timeout { std::chrono::seconds(30) };
    int retries = 3;
    std::chrono::milliseconds backoff_base { 500 };
    std::size_t max_in_flight = 16;

    /// Reads AGC_API_KEY and AGC_TIMEOUT_SECS.
    static RemoteOptions from_env();
};

/// Chat-completions client: POST {endpoint}/chat/completions.
class RemoteEngine final : public Engine
{
  public:
    RemoteEngine(EngineSpec spec, RemoteOptions options);
    ~RemoteEngine() override;

    ChatMessage complete(std::span<const ChatMessage> messages) override;

    /// Request attempts made so far (including retries).
    std::size_t attempts() const noexcept;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Request body sent to a chat-completions server.
std::string chat_request_body(const EngineSpec& spec, std::span<const ChatMessage> messages);

/// Extracts choices[0].message.content; throws MalformedResponse.
std::string parse_chat_response(std::string_view body);

/// Routes complete() calls to engines by EngineSpec. Scripted specs share the
/// gateway's ScriptBook; Remote specs get one client per (name, endpoint).
/// Engines registered by name take precedence over both.
class Gateway
{
  public:
    Gateway() = default;
    explicit Gateway(std::shared_ptr<ScriptBook> book, RemoteOptions remote = {},
                     std::chrono::milliseconds scripted_delay = {});

    void register_engine(std::string name, std::shared_ptr<Engine> engine);

    /// Requires non-empty messages whose first role is system or user.
    ChatMessage complete(const EngineSpec& engine, std::span<const ChatMessage> messages);

  private:
    std::shared_ptr<Engine> resolve(const EngineSpec& engine);

    std::mutex mutex_;
    std::shared_ptr<ScriptBook> book_;
    std::shared_ptr<Engine> scripted_;
    RemoteOptions remote_;
    std::map<std::string, std::shared_ptr<Engine>> named_;
    std::map<std::string, std::shared_ptr<Engine>> remotes_;
};

} // namespace agc
