#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tiermem/embedding.hpp"
#include "tiermem/graphs.hpp"
#include "tiermem/llm.hpp"
#include "tiermem/retrieval.hpp"

namespace tiermem {

/// One agent output inside an episode trace. Parents are indices of
/// earlier trace entries (strictly backward references).
struct TraceEntry {
    std::string agent_id;
    std::string role_label;
    int epoch = 0;
    std::string content;
    std::vector<std::size_t> parents;

    bool operator==(const TraceEntry&) const = default;
};

/// Everything the engine needs to absorb a finished episode.
struct EpisodeRecord {
    std::string query_text;
    std::string final_answer;
    QueryStatus status = QueryStatus::Failed;
    std::vector<TraceEntry> trace;
    std::size_t token_usage = 0;
    RetrievalResult retrieval;  // empty when memory was not consulted
    std::string error;          // annotation when the episode itself failed

    bool operator==(const EpisodeRecord&) const = default;
};

struct UpdateConfig {
    std::size_t insight_cap = 20;
    std::size_t merge_target = 10;
    bool generate_insights = true;
};

/// Throws ConfigError unless merge_target < insight_cap and both ≥ 1.
void validate_config(const UpdateConfig& config);

struct CommitSummary {
    std::string query_id;
    std::optional<std::string> insight_id;
    bool merged = false;
    std::size_t tokens = 0;
    std::vector<std::string> flags;  // partial-success annotations
};

/// One Utterance per trace entry ("u0", "u1", … in trace order), one
/// edge per parent index. Throws InvariantError naming the offending
/// entry on a forward or dangling reference.
InteractionGraph build_interaction_graph(const std::vector<TraceEntry>& trace);

/// Inserts the query node then wires its in-edges from exactly
/// N_conn = top-M queries ∪ (union of used insights' support sets),
/// deduplicated, self excluded. Returns the new node's id.
std::string update_query_graph(MemoryStore& store, const std::string& text,
                               QueryStatus status, InteractionGraph interaction,
                               EmbeddingVector embedding,
                               const RetrievalResult& retrieval);

struct InsightOutcome {
    std::optional<std::string> insight_id;
    bool skipped = false;        // selection rule said no, or parse empty
    bool transport_failed = false;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

/// Distills one lesson from the finished episode. A failed episode is
/// contrasted against the best available successful trajectory; a
/// resolved episode is summarized together with prior successes; a
/// failure with no success on hand generates nothing. The provider's
/// numbered list is concatenated into a single insight supported by the
/// new query.
InsightOutcome generate_insight(ChatProvider& chat, MemoryStore& store,
                                const EpisodeRecord& episode,
                                const std::string& q_new_id,
                                const RetrievalResult& retrieval);

/// Records how this episode's insights relate: hyper-edges from every
/// used insight to the new one (when one exists), and q_new joins every
/// used insight's support set. Safe to re-apply.
void link_and_support(MemoryStore& store,
                      const std::optional<std::string>& new_insight_id,
                      const std::set<std::string, IdLess>& used_insight_ids,
                      const std::string& q_new_id);

struct MergeOutcome {
    bool merged = false;
    bool skipped_on_failure = false;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

/// When the insight tier has grown past `insight_cap`, consolidates all
/// insights into at most `merge_target` fresh ones. Every merged
/// insight inherits the union of all pre-merge support sets; pre-merge
/// hyper-edges are dropped. Provider failure leaves the store unchanged.
MergeOutcome merge_insights(ChatProvider& chat, MemoryStore& store,
                            const UpdateConfig& config);

/// Full write path against a plain store (single-threaded callers).
CommitSummary commit_episode(MemoryStore& store, const Embedder& embedder,
                             ChatProvider& chat, const UpdateConfig& config,
                             const EpisodeRecord& episode);

/// Full write path with the documented concurrency contract: provider
/// work runs on a snapshot while readers proceed; the store mutates
/// under one brief exclusive lock; concurrent commits serialize.
CommitSummary commit_episode(SharedStore& store, const Embedder& embedder,
                             ChatProvider& chat, const UpdateConfig& config,
                             const EpisodeRecord& episode);

}  // namespace tiermem
