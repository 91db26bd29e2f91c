#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "tiermem/embedding.hpp"
#include "tiermem/llm.hpp"
#include "tiermem/retrieval.hpp"
#include "tiermem/update.hpp"

namespace tiermem {

enum class ChatKind { Mock, Remote };

struct ChatConfig {
    ChatKind kind = ChatKind::Mock;
    RemoteChatConfig remote;
    std::string script_path;  // mock: optional JSON rule file
};

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8700;
};

struct EngineConfig {
    std::filesystem::path store_path = "memory_store.json";
    EmbedderConfig embedder;
    ChatConfig chat;
    RetrievalConfig retrieval;
    UpdateConfig update;
    std::optional<ServiceConfig> service;
};

/// Parses the key/value config text: one `section.key = value` pair per
/// line, `#` comments, `${ENV_VAR}` interpolation in values. Unknown
/// keys are rejected so typos fail loudly.
EngineConfig parse_config_text(const std::string& text);

/// Loads and parses a config file. Missing file → NotFoundError.
EngineConfig load_config(const std::filesystem::path& path);

/// The built-in defaults rendered as config text (what `init` writes
/// next to a new store when asked).
std::string default_config_text();

/// Builds the configured chat provider: remote HTTP, or the scripted
/// mock (loading rules from `script_path` when set).
std::unique_ptr<ChatProvider> make_chat_provider(const ChatConfig& config);

}  // namespace tiermem
