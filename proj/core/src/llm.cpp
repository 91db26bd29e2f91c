#include "tiermem/llm.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "tiermem/errors.hpp"
#include "tiermem/prompts.hpp"

namespace tiermem {

void TokenLedger::record(std::size_t prompt_tokens, std::size_t completion_tokens) {
    prompt_.fetch_add(prompt_tokens);
    completion_.fetch_add(completion_tokens);
    calls_.fetch_add(1);
}

void TokenLedger::reset() {
    prompt_.store(0);
    completion_.store(0);
    calls_.store(0);
}

void ChatProvider::record_usage(const ChatResult& result) const {
    if (ledger_) ledger_->record(result.prompt_tokens, result.completion_tokens);
}

MockChatProvider::MockChatProvider(std::vector<MockRule> rules) : rules_(std::move(rules)) {}

void MockChatProvider::add_rule(std::vector<std::string> contains_all, std::string reply) {
    rules_.push_back(MockRule{std::move(contains_all), std::move(reply)});
}

ChatResult MockChatProvider::complete(const ChatRequest& request) {
    const std::string haystack = request.system + "\n" + request.user;
    const MockRule* hit = nullptr;
    for (const auto& rule : rules_) {
        bool all = true;
        for (const auto& needle : rule.contains_all) {
            if (haystack.find(needle) == std::string::npos) {
                all = false;
                break;
            }
        }
        if (all) {
            hit = &rule;
            break;
        }
    }
    ChatResult result;
    result.text = hit ? hit->reply : kUnmatchedReply;
    result.matched = hit != nullptr;
    result.prompt_tokens = proxy_token_count(haystack);
    result.completion_tokens = proxy_token_count(result.text);
    record_usage(result);
    {
        std::lock_guard lock(mutex_);
        transcript_.push_back(MockExchange{request, result.text, result.matched});
        if (!result.matched) ++unmatched_;
    }
    return result;
}

std::vector<MockExchange> MockChatProvider::transcript() const {
    std::lock_guard lock(mutex_);
    return transcript_;
}

std::size_t MockChatProvider::unmatched_count() const {
    std::lock_guard lock(mutex_);
    return unmatched_;
}

void MockChatProvider::clear_transcript() {
    std::lock_guard lock(mutex_);
    transcript_.clear();
    unmatched_ = 0;
}

RemoteChatProvider::RemoteChatProvider(RemoteChatConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("remote chat provider requires an endpoint");
}

ChatResult RemoteChatProvider::complete(const ChatRequest& request) {
    using nlohmann::json;
    const json payload{
        {"model", config_.model},
        {"messages", json::array({json{{"role", "system"}, {"content", request.system}},
                                  json{{"role", "user"}, {"content", request.user}}})}};
    const std::string body = payload.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        httplib::Client client(config_.endpoint);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        httplib::Headers headers;
        if (!config_.api_key_env.empty()) {
            if (const char* key = std::getenv(config_.api_key_env.c_str())) {
                headers.emplace("Authorization", std::string("Bearer ") + key);
            }
        }
        auto res = client.Post(config_.path, headers, body, "application/json");
        if (!res) {
            last_error = "chat endpoint unreachable: " + config_.endpoint;
            continue;
        }
        if (res->status != 200) {
            last_error = "chat endpoint returned status " + std::to_string(res->status);
            continue;
        }
        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded()) {
            last_error = "chat endpoint returned malformed JSON";
            continue;
        }
        ChatResult result;
        if (reply.contains("content") && reply["content"].is_string()) {
            result.text = reply["content"].get<std::string>();
        } else if (reply.contains("choices") && reply["choices"].is_array() &&
                   !reply["choices"].empty() &&
                   reply["choices"][0].contains("message")) {
            result.text = reply["choices"][0]["message"].value("content", "");
        } else {
            last_error = "chat reply carries no content";
            continue;
        }
        if (reply.contains("usage") && reply["usage"].is_object()) {
            result.prompt_tokens = reply["usage"].value("prompt_tokens", std::size_t{0});
            result.completion_tokens = reply["usage"].value("completion_tokens", std::size_t{0});
        }
        if (result.prompt_tokens == 0 && result.completion_tokens == 0) {
            result.prompt_tokens =
                proxy_token_count(request.system) + proxy_token_count(request.user);
            result.completion_tokens = proxy_token_count(result.text);
        }
        record_usage(result);
        return result;
    }
    throw TransportError(last_error);
}

}  // namespace tiermem
