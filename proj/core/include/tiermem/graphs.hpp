#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tiermem/embedding.hpp"
#include "tiermem/ids.hpp"

namespace tiermem {

enum class QueryStatus { Failed, Resolved };

std::string to_string(QueryStatus s);
QueryStatus query_status_from_string(const std::string& s);

// ── Interaction tier ────────────────────────────────────────────

/// One agent message inside an episode's interaction graph.
struct Utterance {
    std::string id;  // unique within the episode ("u0", "u1", ...)
    std::string agent_id;
    std::string role_label;
    std::string content;
    int epoch = 0;  // MAS round, non-negative
    std::vector<std::string> parents;  // ids of inspiring utterances

    bool operator==(const Utterance&) const = default;
};

/// Per-episode DAG of utterances. Edges run parent -> child and never
/// go backward in epoch; the graph stays acyclic under insertion.
struct InteractionGraph {
    std::string query_id;  // set when attached to a query node
    std::vector<Utterance> nodes;

    std::size_t edge_count() const;
    const Utterance* find(std::string_view utterance_id) const;
    bool empty() const { return nodes.empty(); }

    bool operator==(const InteractionGraph&) const = default;
};

/// Validates id uniqueness, parent resolution, epoch ordering and
/// acyclicity. Returns human-readable violations; empty means valid.
std::vector<std::string> validate_interaction_graph(const InteractionGraph& g);

/// Utterance ids in topological order, ties broken by ascending id.
std::vector<std::string> topological_order(const InteractionGraph& g);

/// Subgraph induced on `keep`; edges restricted to surviving endpoints.
InteractionGraph induced_subgraph(const InteractionGraph& g,
                                  const std::set<std::string, IdLess>& keep);

// ── Query tier ──────────────────────────────────────────────────

struct QueryNode {
    std::string id;
    std::string text;
    QueryStatus status = QueryStatus::Failed;
    std::string interaction_ref;  // key into MemoryStore::interactions
    EmbeddingVector embedding;
    std::uint64_t created_seq = 0;

    bool operator==(const QueryNode&) const = default;
};

struct QueryGraph {
    std::map<std::string, QueryNode, IdLess> nodes;
    // Directed (source, target); historical -> new per the update rule.
    std::set<std::pair<std::string, std::string>> edges;

    bool operator==(const QueryGraph&) const = default;
};

// ── Insight tier ────────────────────────────────────────────────

struct InsightNode {
    std::string id;
    std::string content;
    std::set<std::string, IdLess> support;  // supporting query ids, never empty
    std::uint64_t created_seq = 0;

    bool operator==(const InsightNode&) const = default;
};

/// (from_insight, to_insight, query): `from` contextualized `to` through
/// the episode that created `query`.
struct HyperEdge {
    std::string from;
    std::string to;
    std::string query;

    auto operator<=>(const HyperEdge&) const = default;
};

struct InsightGraph {
    std::map<std::string, InsightNode, IdLess> nodes;
    std::set<HyperEdge> hyper_edges;

    bool operator==(const InsightGraph&) const = default;
};

// ── Store ───────────────────────────────────────────────────────

inline constexpr int kSchemaVersion = 1;

/// The three-tier memory store. Plain value type; concurrency control
/// lives in SharedStore.
struct MemoryStore {
    QueryGraph query_graph;
    InsightGraph insight_graph;
    std::map<std::string, InteractionGraph, IdLess> interactions;
    int schema_version = kSchemaVersion;
    std::uint64_t episode_counter = 0;
    std::size_t embedding_dim = 256;  // configured embedder dimension
    std::uint64_t next_query_ordinal = 0;
    std::uint64_t next_insight_ordinal = 0;

    bool operator==(const MemoryStore&) const = default;
};

/// Inserts a query node with a fresh engine-assigned id, stores its
/// interaction graph, bumps the episode counter. Adds no edges.
/// Throws ConfigError on embedding dimension mismatch, InvariantError
/// when the interaction graph fails validation.
std::string add_query_node(MemoryStore& store, const std::string& text,
                           QueryStatus status, InteractionGraph interaction,
                           EmbeddingVector embedding);

/// Union of in- and out-neighbors of `id`, excluding `id` itself.
/// Throws NotFoundError on an unknown id.
std::set<std::string, IdLess> neighbors(const QueryGraph& graph,
                                        const std::string& id);

/// Adds a directed edge after checking both endpoints exist. Self-edges
/// are rejected; duplicates are ignored (set semantics).
void add_query_edge(MemoryStore& store, const std::string& from,
                    const std::string& to);

/// Inserts an insight with a fresh id and the given support set.
/// Support must be non-empty and resolve to existing queries.
std::string add_insight_node(MemoryStore& store, const std::string& content,
                             std::set<std::string, IdLess> support);

/// Full invariant walk over every tier. Empty result means the store is
/// structurally sound.
std::vector<std::string> validate(const MemoryStore& store);

/// DOT rendering of one tier: "query", "insight", or
/// "interaction:<query_id>". Node labels are truncated to 40 characters;
/// hyper-edges render as edges labeled with their query id.
std::string export_dot(const MemoryStore& store, const std::string& tier);

struct StoreStats {
    std::size_t queries = 0;
    std::size_t query_edges = 0;
    std::size_t insights = 0;
    std::size_t hyper_edges = 0;
    std::size_t interactions = 0;
    std::size_t utterances = 0;
};

StoreStats stats(const MemoryStore& store);

// ── Concurrency wrapper ─────────────────────────────────────────

/// Multi-reader / single-writer owner of a MemoryStore. Readers share;
/// mutations take the exclusive lock. Commits serialize on a separate
/// mutex so provider calls never run under the write lock.
class SharedStore {
public:
    SharedStore() = default;
    explicit SharedStore(MemoryStore store) : store_(std::move(store)) {}

    template <typename F>
    auto read(F&& f) const {
        std::shared_lock lock(mutex_);
        return f(store_);
    }

    template <typename F>
    auto write(F&& f) {
        std::unique_lock lock(mutex_);
        return f(store_);
    }

    MemoryStore snapshot() const {
        std::shared_lock lock(mutex_);
        return store_;
    }

    void replace(MemoryStore store) {
        std::unique_lock lock(mutex_);
        store_ = std::move(store);
    }

    /// Held for the whole of a commit; see update.hpp.
    std::mutex& commit_mutex() { return commit_mutex_; }

private:
    MemoryStore store_;
    mutable std::shared_mutex mutex_;
    std::mutex commit_mutex_;
};

}  // namespace tiermem
