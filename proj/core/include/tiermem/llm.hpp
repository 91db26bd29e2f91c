#pragma once

#include <atomic>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace tiermem {

struct ChatRequest {
    std::string system;
    std::string user;
};

struct ChatResult {
    std::string text;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    bool matched = true;  // mock provider: false when the default reply fired
};

/// Aggregate usage counters. Internally synchronized; safe to share
/// across threads.
class TokenLedger {
public:
    void record(std::size_t prompt_tokens, std::size_t completion_tokens);
    void reset();

    std::size_t prompt_tokens() const { return prompt_.load(); }
    std::size_t completion_tokens() const { return completion_.load(); }
    std::size_t total_tokens() const { return prompt_.load() + completion_.load(); }
    std::size_t calls() const { return calls_.load(); }

private:
    std::atomic<std::size_t> prompt_{0};
    std::atomic<std::size_t> completion_{0};
    std::atomic<std::size_t> calls_{0};
};

/// Chat transport. Implementations must be safe for concurrent calls.
class ChatProvider {
public:
    virtual ~ChatProvider() = default;

    /// Completes a prompt. Throws TransportError when the backend is
    /// unreachable. Usage is recorded on `ledger` when one is attached.
    virtual ChatResult complete(const ChatRequest& request) = 0;

    void attach_ledger(std::shared_ptr<TokenLedger> ledger) { ledger_ = std::move(ledger); }
    std::shared_ptr<TokenLedger> ledger() const { return ledger_; }

protected:
    void record_usage(const ChatResult& result) const;

private:
    std::shared_ptr<TokenLedger> ledger_;
};

/// One scripted reply: fires when every needle occurs in the prompt
/// (system + "\n" + user). An empty needle list matches everything.
struct MockRule {
    std::vector<std::string> contains_all;
    std::string reply;
};

struct MockExchange {
    ChatRequest request;
    std::string reply;
    bool matched = true;
};

/// Deterministic scripted provider. Rules are checked in order; the
/// first match wins. With no match the provider answers
/// kUnmatchedReply and flags the exchange so tests can assert the
/// script covered every call.
class MockChatProvider : public ChatProvider {
public:
    static constexpr const char* kUnmatchedReply = "UNMATCHED";

    MockChatProvider() = default;
    explicit MockChatProvider(std::vector<MockRule> rules);
    MockChatProvider(std::initializer_list<MockRule> rules)
        : MockChatProvider(std::vector<MockRule>(rules)) {}

    void add_rule(std::vector<std::string> contains_all, std::string reply);

    ChatResult complete(const ChatRequest& request) override;

    std::vector<MockExchange> transcript() const;
    std::size_t unmatched_count() const;
    void clear_transcript();

private:
    std::vector<MockRule> rules_;
    mutable std::mutex mutex_;
    std::vector<MockExchange> transcript_;
    std::size_t unmatched_{0};
};

struct RemoteChatConfig {
    std::string endpoint;      // e.g. "http://localhost:8081"
    std::string path = "/v1/chat/completions";
    std::string model = "default";
    std::string api_key_env;   // env var holding the bearer token, optional
    int timeout_seconds = 60;
    int max_retries = 1;       // additional attempts after the first
};

/// OpenAI-style HTTP chat client. Retries transient failures with the
/// configured budget, then throws TransportError.
class RemoteChatProvider : public ChatProvider {
public:
    explicit RemoteChatProvider(RemoteChatConfig config);
    ChatResult complete(const ChatRequest& request) override;

private:
    RemoteChatConfig config_;
};

}  // namespace tiermem
