#pragma once

// Chat-completion gateway: a backend interface, the deterministic scripted
// backend, retry/backoff and an optional global rate limiter.

#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "dpot/prompting.hpp"
#include "dpot/tokens.hpp"

namespace dpot {

struct DecodingConfig {
    std::string model_name = "gpt-4-vision-preview";
    int max_tokens = 300;
    double temperature = 0.0;
};

struct UsageStats {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    bool estimated = false;

    std::int64_t total() const { return prompt_tokens + completion_tokens; }

    UsageStats& operator+=(const UsageStats& o) {
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        estimated = estimated || o.estimated;
        return *this;
    }

    friend bool operator==(const UsageStats&, const UsageStats&) = default;
};

struct CompletionResult {
    std::string text;
    UsageStats usage;
    double latency_s = 0.0;
    int attempts = 1;
};

class GatewayError : public Error {
public:
    using Error::Error;
};

/// Transport failure, HTTP 5xx or 429. The only retryable failure.
class TransientError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class AuthError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class ScriptExhaustedError : public GatewayError {
public:
    ScriptExhaustedError() : GatewayError("scripted backend: queue empty") {}
};

class RetriesExhaustedError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

/// What a backend hands back for one request. `usage` is absent when the
/// backend does not report token counts.
struct RawCompletion {
    std::string text;
    std::optional<std::pair<std::int64_t, std::int64_t>> usage;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual RawCompletion send(const PromptBundle& bundle, const DecodingConfig& cfg) = 0;
    virtual std::string identity() const = 0;
    virtual bool multimodal() const { return false; }
};

/// Replays canned responses in FIFO order. An empty queue is a test
/// configuration bug and fails loudly.
class ScriptedBackend final : public ChatBackend {
public:
    ScriptedBackend() = default;
    explicit ScriptedBackend(std::vector<std::string> responses) : queue_(responses.begin(), responses.end()) {}

    void push(std::string response) {
        std::lock_guard lock(mu_);
        queue_.push_back(std::move(response));
    }

    std::size_t remaining() const {
        std::lock_guard lock(mu_);
        return queue_.size();
    }

    RawCompletion send(const PromptBundle&, const DecodingConfig&) override {
        std::lock_guard lock(mu_);
        if (queue_.empty()) throw ScriptExhaustedError();
        RawCompletion out{std::move(queue_.front()), std::nullopt};
        queue_.pop_front();
        return out;
    }

    std::string identity() const override { return "scripted"; }

private:
    mutable std::mutex mu_;
    std::deque<std::string> queue_;
};

/// Serializes dispatch to at most `requests_per_minute` across all callers.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_minute)
        : interval_(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(60.0 / requests_per_minute))) {
        if (!(requests_per_minute > 0)) throw Error("rate limit must be positive");
    }

    void acquire() {
        Clock::time_point slot;
        {
            std::lock_guard lock(mu_);
            const auto now = Clock::now();
            slot = std::max(now, next_);
            next_ = slot + interval_;
        }
        std::this_thread::sleep_until(slot);
    }

private:
    using Clock = std::chrono::steady_clock;
    std::mutex mu_;
    Clock::duration interval_;
    Clock::time_point next_{};
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{1000};  // doubles after every retry: 1s, 2s, 4s
};

struct GatewayOptions {
    RetryPolicy retry;
    RateLimiter* rate_limiter = nullptr;
    std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };
};

inline UsageStats estimate_usage(const PromptBundle& bundle, std::string_view completion) {
    return {bundle.estimated_tokens(), estimate_tokens(completion), true};
}

/// Sends one prompt. Transient failures are retried with exponential backoff;
/// anything else propagates immediately. Latency covers the whole call,
/// backoff included.
inline CompletionResult complete(const PromptBundle& bundle, const DecodingConfig& cfg, ChatBackend& backend,
                                 const GatewayOptions& opts = {}) {
    const auto start = std::chrono::steady_clock::now();
    auto backoff = opts.retry.initial_backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            if (opts.rate_limiter) opts.rate_limiter->acquire();
            RawCompletion raw = backend.send(bundle, cfg);
            CompletionResult out;
            out.usage = raw.usage ? UsageStats{raw.usage->first, raw.usage->second, false}
                                  : estimate_usage(bundle, raw.text);
            out.text = std::move(raw.text);
            out.attempts = attempt + 1;
            out.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            return out;
        } catch (const TransientError& e) {
            if (attempt >= opts.retry.max_retries)
                throw RetriesExhaustedError("gave up after " + std::to_string(attempt + 1) + " attempts: " + e.what());
            opts.sleep(backoff);
            backoff *= 2;
        }
    }
}

}  // namespace dpot
