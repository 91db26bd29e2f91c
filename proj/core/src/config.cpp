#include "tiermem/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tiermem/errors.hpp"
#include "tiermem/serde.hpp"

namespace tiermem {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

std::string interpolate_env(const std::string& value, std::size_t line_no) {
    std::string out;
    std::size_t pos = 0;
    while (pos < value.size()) {
        const std::size_t open = value.find("${", pos);
        if (open == std::string::npos) {
            out.append(value, pos, std::string::npos);
            break;
        }
        const std::size_t close = value.find('}', open + 2);
        if (close == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": unterminated ${...}");
        }
        out.append(value, pos, open - pos);
        const std::string name = value.substr(open + 2, close - open - 2);
        const char* resolved = std::getenv(name.c_str());
        if (!resolved) {
            throw ConfigError("line " + std::to_string(line_no) + ": environment variable \"" +
                              name + "\" is not set");
        }
        out.append(resolved);
        pos = close + 1;
    }
    return out;
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("key \"" + key + "\": expected a boolean, got \"" + value + "\"");
}

long parse_int(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        const long parsed = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError("key \"" + key + "\": expected an integer, got \"" + value + "\"");
    }
}

long parse_positive(const std::string& value, const std::string& key) {
    const long parsed = parse_int(value, key);
    if (parsed < 1) throw ConfigError("key \"" + key + "\" must be positive");
    return parsed;
}

}  // namespace

EngineConfig parse_config_text(const std::string& text) {
    EngineConfig config;
    bool service_touched = false;
    ServiceConfig service;

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = interpolate_env(trim(stripped.substr(eq + 1)), line_no);

        if (key == "store_path") {
            config.store_path = value;
        } else if (key == "embedder.provider") {
            if (value == "fallback") config.embedder.provider = EmbedderProvider::Fallback;
            else if (value == "remote") config.embedder.provider = EmbedderProvider::Remote;
            else throw ConfigError("embedder.provider must be fallback or remote");
        } else if (key == "embedder.dim") {
            config.embedder.dim = static_cast<std::size_t>(parse_positive(value, key));
        } else if (key == "embedder.normalize") {
            config.embedder.normalize = parse_bool(value, key);
        } else if (key == "embedder.endpoint") {
            config.embedder.endpoint = value;
        } else if (key == "embedder.api_key_env") {
            config.embedder.api_key_env = value;
        } else if (key == "embedder.recompute_on_load") {
            config.embedder.recompute_on_load = parse_bool(value, key);
        } else if (key == "chat.kind") {
            if (value == "mock") config.chat.kind = ChatKind::Mock;
            else if (value == "remote") config.chat.kind = ChatKind::Remote;
            else throw ConfigError("chat.kind must be mock or remote");
        } else if (key == "chat.endpoint") {
            config.chat.remote.endpoint = value;
        } else if (key == "chat.path") {
            config.chat.remote.path = value;
        } else if (key == "chat.model") {
            config.chat.remote.model = value;
        } else if (key == "chat.api_key_env") {
            config.chat.remote.api_key_env = value;
        } else if (key == "chat.timeout_seconds") {
            config.chat.remote.timeout_seconds = static_cast<int>(parse_positive(value, key));
        } else if (key == "chat.max_retries") {
            config.chat.remote.max_retries = static_cast<int>(parse_int(value, key));
        } else if (key == "chat.script_path") {
            config.chat.script_path = value;
        } else if (key == "retrieval.k") {
            config.retrieval.k = static_cast<std::size_t>(parse_positive(value, key));
        } else if (key == "retrieval.hops") {
            const long hops = parse_int(value, key);
            if (hops < 0) throw ConfigError("retrieval.hops must be non-negative");
            config.retrieval.hops = static_cast<std::size_t>(hops);
        } else if (key == "retrieval.m") {
            config.retrieval.m = static_cast<std::size_t>(parse_positive(value, key));
        } else if (key == "retrieval.concurrent_ratings") {
            config.retrieval.concurrent_ratings = parse_bool(value, key);
        } else if (key == "update.insight_cap") {
            config.update.insight_cap = static_cast<std::size_t>(parse_positive(value, key));
        } else if (key == "update.merge_target") {
            config.update.merge_target = static_cast<std::size_t>(parse_positive(value, key));
        } else if (key == "update.generate_insights") {
            config.update.generate_insights = parse_bool(value, key);
        } else if (key == "service.host") {
            service.host = value;
            service_touched = true;
        } else if (key == "service.port") {
            service.port = static_cast<int>(parse_positive(value, key));
            service_touched = true;
        } else {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
        }
    }
    if (service_touched) config.service = service;

    validate_config(config.retrieval);
    validate_config(config.update);
    return config;
}

EngineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("config file not found: \"" + path.string() + "\"");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

std::string default_config_text() {
    return "# engine configuration\n"
           "store_path = memory_store.json\n"
           "\n"
           "embedder.provider = fallback\n"
           "embedder.dim = 256\n"
           "embedder.normalize = true\n"
           "# embedder.endpoint = http://localhost:8081\n"
           "# embedder.api_key_env = EMBED_API_KEY\n"
           "\n"
           "chat.kind = mock\n"
           "# chat.script_path = script.json\n"
           "# chat.endpoint = http://localhost:8080\n"
           "# chat.api_key_env = CHAT_API_KEY\n"
           "\n"
           "retrieval.k = 2\n"
           "retrieval.hops = 1\n"
           "retrieval.m = 3\n"
           "retrieval.concurrent_ratings = false\n"
           "\n"
           "update.insight_cap = 20\n"
           "update.merge_target = 10\n"
           "update.generate_insights = true\n"
           "\n"
           "# service.host = 127.0.0.1\n"
           "# service.port = 8700\n";
}

std::unique_ptr<ChatProvider> make_chat_provider(const ChatConfig& config) {
    if (config.kind == ChatKind::Remote) {
        return std::make_unique<RemoteChatProvider>(config.remote);
    }
    std::vector<MockRule> rules;
    if (!config.script_path.empty()) {
        std::ifstream in(config.script_path, std::ios::binary);
        if (!in) throw NotFoundError("mock script not found: \"" + config.script_path + "\"");
        std::ostringstream buffer;
        buffer << in.rdbuf();
        rules = mock_rules_from_json(parse_json(buffer.str()));
    }
    return std::make_unique<MockChatProvider>(std::move(rules));
}

}  // namespace tiermem
