#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace tiermem {

/// Fixed-length real vector produced by an embedder. All entries finite.
struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }

    bool operator==(const EmbeddingVector&) const = default;
};

enum class EmbedderProvider { Remote, Fallback };

struct EmbedderConfig {
    EmbedderProvider provider = EmbedderProvider::Fallback;
    std::size_t dim = 256;
    bool normalize = true;
    // Remote provider only.
    std::string endpoint;
    std::string api_key_env;
    // Re-embed all stored query texts when a store is loaded.
    bool recompute_on_load = false;
};

/// Maps text to a fixed-length vector. Implementations are stateless and
/// thread-safe; embed() is deterministic for a fixed config and text.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed(const std::string& text) const = 0;
    virtual std::size_t dim() const = 0;
};

// Hashed bag-of-tokens embedder: lowercase, split on non-alphanumerics,
// FNV-1a 64 each token into one of `dim` buckets, count, L2-normalize.
// Text with no tokens maps to the reserved unit vector e0.
class FallbackEmbedder : public Embedder {
public:
    explicit FallbackEmbedder(std::size_t dim = 256, bool normalize = true);

    EmbeddingVector embed(const std::string& text) const override;
    std::size_t dim() const override { return dim_; }

private:
    std::size_t dim_;
    bool normalize_;
};

// HTTP embedder: POST {"input": [texts]} -> {"embeddings": [[...]]}.
// One retry on transport failure; a reply vector whose length differs
// from the configured dim is a configuration error.
class RemoteEmbedder : public Embedder {
public:
    explicit RemoteEmbedder(EmbedderConfig config);

    EmbeddingVector embed(const std::string& text) const override;
    std::size_t dim() const override { return config_.dim; }

private:
    EmbedderConfig config_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config);

/// Cosine similarity in [-1, 1]. Throws DomainError on dimension mismatch
/// or an all-zero input.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Exact top-k by cosine against `query`, descending, ties broken by
/// ascending id. k larger than the candidate count returns everything.
std::vector<std::string> top_k(
    const EmbeddingVector& query,
    const std::vector<std::pair<std::string, EmbeddingVector>>& candidates,
    std::size_t k);

}  // namespace tiermem
