// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <thread>

using namespace agc;
using namespace agc::testing;
using namespace std::chrono_literals;

namespace
{

std::vector<ChatMessage> user(std::string text)
{
    return { { Role::User, std::move(text) } };
}

std::string next(ScriptBook& book, const std::string& prompt)
{
    auto const messages = user(prompt);
    auto reply = book.next(messages);
    if (!reply)
        throw std::runtime_error("no reply for " + prompt);
    return *reply;
}

/// Local chat-completions server on an ephemeral port.
class FakeServer
{
  public:
    explicit FakeServer(httplib::Server::Handler handler)
    {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer()
    {
        server_.stop();
        thread_.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

RemoteOptions fast_options()
{
    auto options = RemoteOptions {};
    options.api_key = "test-key";
    options.timeout = 200ms;
    options.retries = 2;
    options.backoff_base = 1ms;
    return options;
}

} // namespace

TEST(CanonicalPrompt, JoinsRoleLines)
{
    auto const messages = std::vector<ChatMessage> { { Role::System, "be brief" }, { Role::User, "hi" } };
    EXPECT_EQ(canonical_prompt(messages), "system: be brief\nuser: hi");
    EXPECT_EQ(prompt_hash(messages).size(), 16u);
    EXPECT_EQ(prompt_hash(messages), prompt_hash(messages));
    EXPECT_NE(prompt_hash(messages), prompt_hash(user("hi")));
}

TEST(ScriptBook, ExactBeatsSubstringBeatsWildcard)
{
    auto book = ScriptBook {};
    book.add(MatchKind::Any, "", { "fallback" });
    book.add(MatchKind::Substring, "alpha", { "sub" });
    book.add(MatchKind::Exact, prompt_hash(user("alpha exact")), { "exact" });
    EXPECT_EQ(next(book, "alpha exact"), "exact");
    EXPECT_EQ(next(book, "the alpha"), "sub");
    EXPECT_EQ(next(book, "beta"), "fallback");
}

TEST(ScriptBook, QueuesAreFifoAndDrainedEntriesAreSkipped)
{
    auto book = ScriptBook {};
    book.add(MatchKind::Substring, "x", { "1", "2" });
    book.add(MatchKind::Substring, "xy", { "3" });
    EXPECT_EQ(next(book, "xy"), "1");
    EXPECT_EQ(next(book, "xy"), "2");
    EXPECT_EQ(next(book, "xy"), "3");
    EXPECT_FALSE(book.next(user("xy")).has_value());
}

TEST(ScriptBook, WildcardRepeatsLastResponse)
{
    auto book = ScriptBook {};
    book.add(MatchKind::Any, "", { "a", "b" });
    EXPECT_EQ(next(book, "q"), "a");
    EXPECT_EQ(next(book, "q"), "b");
    EXPECT_EQ(next(book, "q"), "b");
}

TEST(ScriptBook, CopiesHaveIndependentCursors)
{
    auto book = ScriptBook {};
    book.add(MatchKind::Substring, "k", { "1", "2" });
    EXPECT_EQ(next(book, "k"), "1");
    auto copy = book;
    EXPECT_EQ(next(copy, "k"), "2");
    EXPECT_EQ(next(book, "k"), "2");
    EXPECT_TRUE(book.mentions("k"));
    EXPECT_FALSE(book.mentions("z"));
}

TEST(ScriptBook, ParsesJsonSchema)
{
    auto book = parse_script_book(R"({"entries":[
        {"match":{"kind":"substring","value":"hello"},"responses":["hi"]},
        {"match":{"kind":"any"},"responses":["?"]}]})");
    EXPECT_EQ(book.size(), 2u);
    EXPECT_EQ(next(book, "hello there"), "hi");
    EXPECT_EQ(next(book, "other"), "?");
}

TEST(ScriptBook, RejectsMalformedInput)
{
    EXPECT_THROW(parse_script_book("{"), ParseError);
    EXPECT_THROW(parse_script_book(R"({"entries":{}})"), ParseError);
    EXPECT_THROW(parse_script_book(R"({"entries":[{"match":{"kind":"regex","value":"a"},"responses":[]}]})"),
                 ParseError);
    EXPECT_THROW(parse_script_book(R"({"entries":[{"match":{"kind":"substring","value":""},"responses":[]}]})"),
                 ParseError);
    EXPECT_THROW(parse_script_book(R"({"entries":[
        {"match":{"kind":"exact","value":"abc"},"responses":["1"]},
        {"match":{"kind":"exact","value":"abc"},"responses":["2"]}]})"),
                 ParseError);
}

TEST(ScriptBook, MissingFileIsIoParseError)
{
    try
    {
        load_script_book("/nonexistent/book.json");
        FAIL();
    }
    catch (const ParseError& e)
    {
        EXPECT_NE(std::string(e.what()).find("io:"), std::string::npos);
    }
}

TEST(ScriptedEngine, ThrowsScriptExhausted)
{
    auto book = std::make_shared<ScriptBook>();
    book->add(MatchKind::Substring, "known", { "ok" });
    auto engine = ScriptedEngine(book);
    EXPECT_EQ(engine.complete(user("known")).content, "ok");
    try
    {
        engine.complete(user("known"));
        FAIL();
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), Errc::ScriptExhausted);
    }
}

TEST(ScriptedEngine, AppliesDelay)
{
    auto book = std::make_shared<ScriptBook>();
    book->add(MatchKind::Any, "", { "ok" });
    auto engine = ScriptedEngine(book, 30ms);
    auto const start = std::chrono::steady_clock::now();
    engine.complete(user("x"));
    EXPECT_GE(std::chrono::steady_clock::now() - start, 30ms);
}

TEST(Gateway, ValidatesMessagesAndRoutesByName)
{
    auto book = std::make_shared<ScriptBook>();
    book->add(MatchKind::Any, "", { "scripted" });
    auto gateway = Gateway(book);
    auto const spec = EngineSpec::scripted("m");
    EXPECT_EQ(gateway.complete(spec, user("x")).content, "scripted");
    EXPECT_THROW(gateway.complete(spec, {}), Error);
    auto const assistant_first = std::vector<ChatMessage> { { Role::Assistant, "x" } };
    EXPECT_THROW(gateway.complete(spec, assistant_first), Error);

    gateway.register_engine("m", std::make_shared<FunctionEngine>([](auto) { return std::string("custom"); }));
    EXPECT_EQ(gateway.complete(spec, user("x")).content, "custom");
}

TEST(EngineSpec, Validation)
{
    EXPECT_NO_THROW(EngineSpec::scripted("a").validate());
    EXPECT_THROW(EngineSpec::remote("a", "").validate(), Error);
    auto spec = EngineSpec::scripted("a");
    spec.params.temperature = -1;
    EXPECT_THROW(spec.validate(), Error);
}

TEST(ChatProtocol, RequestBodyAndResponseParsing)
{
    auto spec = EngineSpec::remote("gpt-test", "http://localhost/v1");
    spec.params.seed = 7;
    auto const body = nlohmann::json::parse(chat_request_body(spec, user("hello")));
    EXPECT_EQ(body.at("model"), "gpt-test");
    EXPECT_EQ(body.at("messages").at(0).at("role"), "user");
    EXPECT_EQ(body.at("messages").at(0).at("content"), "hello");
    EXPECT_EQ(body.at("seed"), 7);

    EXPECT_EQ(parse_chat_response(R"({"choices":[{"message":{"role":"assistant","content":"hey"}}]})"), "hey");
    EXPECT_THROW(parse_chat_response("not json"), Error);
    EXPECT_THROW(parse_chat_response(R"({"choices":[]})"), Error);
}

TEST(RemoteEngine, CompletesAgainstLocalServer)
{
    auto seen_auth = std::string {};
    auto server = FakeServer([&](const httplib::Request& request, httplib::Response& response) {
        seen_auth = request.get_header_value("Authorization");
        response.set_content(R"({"choices":[{"message":{"role":"assistant","content":"pong"}}]})",
                             "application/json");
    });
    auto engine = RemoteEngine(EngineSpec::remote("m", server.endpoint()), fast_options());
    EXPECT_EQ(engine.complete(user("ping")).content, "pong");
    EXPECT_EQ(seen_auth, "Bearer test-key");
    EXPECT_EQ(engine.attempts(), 1u);
}

TEST(RemoteEngine, RetriesTimeoutsThenFails)
{
    auto hits = std::atomic<int> { 0 };
    auto server = FakeServer([&](const httplib::Request&, httplib::Response& response) {
        ++hits;
        std::this_thread::sleep_for(500ms);
        response.set_content("{}", "application/json");
    });
    auto options = fast_options();
    auto engine = RemoteEngine(EngineSpec::remote("m", server.endpoint()), options);
    try
    {
        engine.complete(user("ping"));
        FAIL();
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), Errc::TransportError);
    }
    EXPECT_EQ(engine.attempts(), static_cast<std::size_t>(options.retries + 1));
}

TEST(RemoteEngine, MalformedBodyIsNotRetried)
{
    auto server = FakeServer([](const httplib::Request&, httplib::Response& response) {
        response.set_content(R"({"unexpected":true})", "application/json");
    });
    auto engine = RemoteEngine(EngineSpec::remote("m", server.endpoint()), fast_options());
    try
    {
        engine.complete(user("ping"));
        FAIL();
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), Errc::MalformedResponse);
    }
    EXPECT_EQ(engine.attempts(), 1u);
}

TEST(RemoteEngine, UnreachableEndpointIsTransportError)
{
    auto options = fast_options();
    options.retries = 0;
    auto engine = RemoteEngine(EngineSpec::remote("m", "http://127.0.0.1:1/v1"), options);
    EXPECT_THROW(engine.complete(user("ping")), Error);
    EXPECT_EQ(engine.attempts(), 1u);
}
