#include "tiermem/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "tiermem/errors.hpp"
#include "tiermem/ids.hpp"

namespace tiermem {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = kFnvOffset;
    for (unsigned char b : data) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

bool is_token_char(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (is_token_char(c)) {
            current.push_back(static_cast<char>(
                c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

double norm(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

void check_finite(const EmbeddingVector& v) {
    for (double x : v.values) {
        if (!std::isfinite(x)) throw DomainError("embedding contains a non-finite entry");
    }
}

}  // namespace

FallbackEmbedder::FallbackEmbedder(std::size_t dim, bool normalize)
    : dim_(dim), normalize_(normalize) {
    if (dim == 0) throw ConfigError("embedder dimension must be positive");
}

EmbeddingVector FallbackEmbedder::embed(const std::string& text) const {
    EmbeddingVector out;
    out.values.assign(dim_, 0.0);
    const auto tokens = tokenize(text);
    if (tokens.empty()) {
        out.values[0] = 1.0;  // reserved direction for token-free text
        return out;
    }
    for (const auto& token : tokens) {
        out.values[fnv1a64(token) % dim_] += 1.0;
    }
    if (normalize_) {
        const double n = norm(out.values);
        for (double& v : out.values) v /= n;
    }
    return out;
}

RemoteEmbedder::RemoteEmbedder(EmbedderConfig config) : config_(std::move(config)) {
    if (config_.dim == 0) throw ConfigError("embedder dimension must be positive");
    if (config_.endpoint.empty()) {
        throw ConfigError("remote embedder requires an endpoint");
    }
}

EmbeddingVector RemoteEmbedder::embed(const std::string& text) const {
    nlohmann::json payload{{"input", nlohmann::json::array({text})}};
    const std::string body = payload.dump();

    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        httplib::Client client(config_.endpoint);
        client.set_connection_timeout(10);
        client.set_read_timeout(60);
        httplib::Headers headers;
        if (!config_.api_key_env.empty()) {
            if (const char* key = std::getenv(config_.api_key_env.c_str())) {
                headers.emplace("Authorization", std::string("Bearer ") + key);
            }
        }
        auto res = client.Post("/embeddings", headers, body, "application/json");
        if (!res) {
            last_error = "embedding endpoint unreachable: " + config_.endpoint;
            continue;
        }
        if (res->status != 200) {
            last_error = "embedding endpoint returned status " + std::to_string(res->status);
            continue;
        }
        nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("embeddings") ||
            !reply["embeddings"].is_array() || reply["embeddings"].empty()) {
            throw TransportError("malformed embedding response");
        }
        EmbeddingVector out;
        out.values = reply["embeddings"][0].get<std::vector<double>>();
        if (out.values.size() != config_.dim) {
            throw ConfigError("embedding dimension drift: expected " +
                              std::to_string(config_.dim) + ", got " +
                              std::to_string(out.values.size()));
        }
        check_finite(out);
        if (config_.normalize) {
            const double n = norm(out.values);
            if (n > 0.0) {
                for (double& v : out.values) v /= n;
            } else {
                out.values.assign(config_.dim, 0.0);
                out.values[0] = 1.0;
            }
        }
        return out;
    }
    throw TransportError(last_error);
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config) {
    if (config.provider == EmbedderProvider::Fallback) {
        return std::make_unique<FallbackEmbedder>(config.dim, config.normalize);
    }
    return std::make_unique<RemoteEmbedder>(config);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw DomainError("cosine: dimension mismatch (" + std::to_string(a.dim()) +
                          " vs " + std::to_string(b.dim()) + ")");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
    const double na = norm(a.values);
    const double nb = norm(b.values);
    if (na == 0.0 || nb == 0.0) throw DomainError("cosine: zero vector");
    return dot / (na * nb);
}

std::vector<std::string> top_k(
    const EmbeddingVector& query,
    const std::vector<std::pair<std::string, EmbeddingVector>>& candidates,
    std::size_t k) {
    std::vector<std::pair<double, const std::string*>> scored;
    scored.reserve(candidates.size());
    for (const auto& [id, vec] : candidates) {
        scored.emplace_back(cosine(query, vec), &id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& lhs, const auto& rhs) {
        if (lhs.first != rhs.first) return lhs.first > rhs.first;
        return id_less(*lhs.second, *rhs.second);
    });
    const std::size_t take = std::min(k, scored.size());
    std::vector<std::string> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(*scored[i].second);
    return out;
}

}  // namespace tiermem
