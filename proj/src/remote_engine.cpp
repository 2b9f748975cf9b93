// SPDX-License-Identifier: Apache-2.0
#include <agc/llm.hpp>

#include <fmt/core.h>
#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <thread>

namespace agc
{

namespace
{

    struct SplitEndpoint
    {
        std::string origin; // scheme://host[:port]
        std::string base_path;
    };

    SplitEndpoint split_endpoint(const std::string& endpoint)
    {
        auto const scheme_end = endpoint.find("://");
        if (scheme_end == std::string::npos)
            throw Error(Errc::InvalidConfig, fmt::format("endpoint '{}' lacks a scheme", endpoint));
        auto const path_start = endpoint.find('/', scheme_end + 3);
        if (path_start == std::string::npos)
            return { endpoint, "" };
        auto base = endpoint.substr(path_start);
        while (!base.empty() && base.back() == '/')
            base.pop_back();
        return { endpoint.substr(0, path_start), base };
    }

    /// Counting gate limiting concurrent in-flight requests.
    class InFlightGate
    {
      public:
        explicit InFlightGate(std::size_t cap): cap_(cap == 0 ? 1 : cap) {}

        void acquire()
        {
            auto lock = std::unique_lock(mutex_);
            cv_.wait(lock, [&] { return in_flight_ < cap_; });
            ++in_flight_;
        }

        void release()
        {
            {
                auto lock = std::lock_guard(mutex_);
                --in_flight_;
            }
            cv_.notify_one();
        }

      private:
        std::mutex mutex_;
        std::condition_variable cv_;
        std::size_t cap_;
        std::size_t in_flight_ = 0;
    };

} // namespace

struct RemoteEngine::Impl
{
    EngineSpec spec;
    RemoteOptions options;
    SplitEndpoint endpoint;
    InFlightGate gate;
    std::atomic<std::size_t> attempts { 0 };

    Impl(EngineSpec s, RemoteOptions o):
        spec(std::move(s)),
        options(std::move(o)),
        endpoint(split_endpoint(spec.endpoint.value_or(""))),
        gate(options.max_in_flight)
    {
    }
};

RemoteEngine::RemoteEngine(EngineSpec spec, RemoteOptions options)
{
    spec.validate();
    if (spec.kind != EngineKind::Remote)
        throw Error(Errc::InvalidConfig, "RemoteEngine needs a remote EngineSpec");
    if (options.retries < 0)
        throw Error(Errc::InvalidConfig, "retries must be >= 0");
    impl_ = std::make_unique<Impl>(std::move(spec), std::move(options));
}

RemoteEngine::~RemoteEngine() = default;

std::size_t RemoteEngine::attempts() const noexcept
{
    return impl_->attempts.load();
}

ChatMessage RemoteEngine::complete(std::span<const ChatMessage> messages)
{
    auto& impl = *impl_;
    auto const body = chat_request_body(impl.spec, messages);
    auto const path = impl.endpoint.base_path + "/chat/completions";

    impl.gate.acquire();
    struct Release
    {
        InFlightGate& gate;
        ~Release() { gate.release(); }
    } release { impl.gate };

    auto client = httplib::Client(impl.endpoint.origin);
    auto const timeout = impl.options.timeout;
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    if (impl.options.api_key)
        client.set_bearer_token_auth(*impl.options.api_key);

    auto last_error = std::string {};
    auto const attempts = impl.options.retries + 1;
    for (auto attempt = 0; attempt < attempts; ++attempt)
    {
        if (attempt > 0)
            std::this_thread::sleep_for(impl.options.backoff_base * (1 << (attempt - 1)));
        ++impl.attempts;
        auto response = client.Post(path, body, "application/json");
        if (!response)
        {
            last_error = httplib::to_string(response.error());
            continue;
        }
        if (response->status < 200 || response->status >= 300)
            throw Error(Errc::MalformedResponse,
                        fmt::format("{} returned HTTP {}", impl.spec.endpoint.value_or(""), response->status));
        return { Role::Assistant, parse_chat_response(response->body) };
    }
    throw Error(Errc::TransportError,
                fmt::format("{} unreachable after {} attempts: {}", impl.spec.endpoint.value_or(""), attempts,
                            last_error));
}

} // namespace agc
