#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "tiermem/embedding.hpp"
#include "tiermem/graphs.hpp"
#include "tiermem/llm.hpp"

namespace tiermem {

struct RetrievalConfig {
    std::size_t k = 2;      // coarse top-k
    std::size_t hops = 1;   // expansion radius
    std::size_t m = 3;      // top-M after rating
    bool concurrent_ratings = false;
};

/// Throws ConfigError unless k ≥ 1 and m ≥ 1.
void validate_config(const RetrievalConfig& config);

/// One agent's role handle for allocation.
struct RoleRef {
    std::string agent_id;
    std::string role_label;
};

struct TrajectorySnippet {
    std::string source_query_id;
    QueryStatus status = QueryStatus::Failed;
    std::string text;

    bool operator==(const TrajectorySnippet&) const = default;
};

/// Per-agent memory payload: role-personalized insight lines plus
/// rendered trajectory snippets in relevance-rank order.
struct MemoryCue {
    std::string agent_id;
    std::vector<std::string> personalized_insights;
    std::vector<TrajectorySnippet> trajectory_snippets;

    bool empty() const {
        return personalized_insights.empty() && trajectory_snippets.empty();
    }
    bool operator==(const MemoryCue&) const = default;
};

struct RetrievalResult {
    std::vector<std::string> sketched;           // coarse stage, rank order
    std::set<std::string, IdLess> expanded;      // after hop expansion
    std::set<std::string, IdLess> used_insights; // upward stage
    std::vector<std::string> top_m_queries;      // downward stage, rank order
    std::map<std::string, InteractionGraph, IdLess> sparsified_trajectories;
    std::map<std::string, MemoryCue> cues;       // agent_id → cue
    std::size_t llm_token_usage = 0;
    std::size_t requested_m = 0;  // config.m at retrieval time
    bool degraded = false;        // a rating fell back to the cosine formula
    std::vector<std::string> flags;

    bool empty() const { return sketched.empty() && expanded.empty(); }
    bool operator==(const RetrievalResult&) const = default;
};

/// `[role_label] content` per utterance, topological order, ties by id.
std::string render_snippet(const InteractionGraph& graph);

std::vector<std::string> coarse_retrieve(const MemoryStore& store,
                                         const Embedder& embedder,
                                         const std::string& query_text,
                                         std::size_t k);

std::set<std::string, IdLess> hop_expand(const MemoryStore& store,
                                         const std::vector<std::string>& seed_ids,
                                         std::size_t hops);

std::set<std::string, IdLess> upward_traverse(
    const MemoryStore& store, const std::set<std::string, IdLess>& expanded_ids);

struct RatingOutcome {
    int score = 1;
    bool degraded = false;  // cosine fallback was used
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

/// Rates how helpful `candidate`'s trajectory is for `current_query`
/// on a 1–10 scale. One retry on an unparseable reply; after that the
/// score falls back to round(10·cosine) of the two embeddings.
RatingOutcome rate_relevance(ChatProvider& chat, const Embedder& embedder,
                             const std::string& current_query,
                             const QueryNode& candidate,
                             const InteractionGraph& trajectory);

struct SparsifyOutcome {
    InteractionGraph graph;
    std::size_t dropped_unknown = 0;  // provider-named steps with no matching utterance
    bool passthrough = false;         // nothing matched: input returned unmodified
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

/// Asks the provider which utterances are critical and keeps exactly
/// those; never introduces nodes. Empty input skips the provider call.
SparsifyOutcome sparsify(ChatProvider& chat, const InteractionGraph& graph,
                         const std::string& query_text);

struct DownwardOutcome {
    std::vector<std::string> top_m;  // (score desc, id asc)
    std::map<std::string, InteractionGraph, IdLess> sparsified;
    bool degraded = false;
    std::vector<std::string> flags;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

DownwardOutcome downward_traverse(const MemoryStore& store, ChatProvider& chat,
                                  const Embedder& embedder,
                                  const std::string& query_text,
                                  const std::set<std::string, IdLess>& expanded_ids,
                                  std::size_t m, bool concurrent = false);

struct AllocationOutcome {
    std::map<std::string, MemoryCue> cues;
    std::vector<std::string> flags;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

/// Personalizes the shared insight texts per role and attaches the
/// rank-ordered snippets. No provider calls when there is nothing to
/// allocate. An unparseable personalization reply hands that agent the
/// raw insight texts, flagged.
AllocationOutcome allocate_memory(ChatProvider& chat,
                                  const std::vector<std::string>& insights,
                                  const std::vector<TrajectorySnippet>& trajectories,
                                  const std::vector<RoleRef>& roles,
                                  const std::string& query_text);

/// The full read path: coarse retrieval, hop expansion, upward and
/// downward traversal, per-role allocation. Empty store → empty result,
/// zero provider calls. Stage failures are rethrown tagged with the
/// stage name.
RetrievalResult retrieve(const MemoryStore& store, const Embedder& embedder,
                         ChatProvider& chat, const RetrievalConfig& config,
                         const std::string& query_text,
                         const std::vector<RoleRef>& roles);

}  // namespace tiermem
