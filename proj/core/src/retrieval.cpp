#include "tiermem/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

#include "tiermem/errors.hpp"
#include "tiermem/prompts.hpp"

namespace tiermem {

void validate_config(const RetrievalConfig& config) {
    if (config.k < 1) throw ConfigError("retrieval.k must be at least 1");
    if (config.m < 1) throw ConfigError("retrieval.m must be at least 1");
}

std::string render_snippet(const InteractionGraph& graph) {
    std::ostringstream out;
    bool first = true;
    for (const auto& id : topological_order(graph)) {
        const Utterance* u = graph.find(id);
        if (!u) continue;
        if (!first) out << '\n';
        out << '[' << u->role_label << "] " << u->content;
        first = false;
    }
    return out.str();
}

std::vector<std::string> coarse_retrieve(const MemoryStore& store, const Embedder& embedder,
                                         const std::string& query_text, std::size_t k) {
    if (k < 1) throw DomainError("coarse_retrieve requires k >= 1");
    if (store.query_graph.nodes.empty()) return {};
    const EmbeddingVector query_vec = embedder.embed(query_text);
    std::vector<std::pair<std::string, EmbeddingVector>> candidates;
    candidates.reserve(store.query_graph.nodes.size());
    for (const auto& [id, node] : store.query_graph.nodes) {
        candidates.emplace_back(id, node.embedding);
    }
    return top_k(query_vec, candidates, k);
}

std::set<std::string, IdLess> hop_expand(const MemoryStore& store,
                                         const std::vector<std::string>& seed_ids,
                                         std::size_t hops) {
    std::set<std::string, IdLess> result;
    for (const auto& id : seed_ids) {
        if (!store.query_graph.nodes.count(id)) {
            throw NotFoundError("hop expansion seed \"" + id + "\" is not a stored query");
        }
        result.insert(id);
    }
    if (hops == 0 || result.empty()) return result;

    std::map<std::string, std::set<std::string, IdLess>, IdLess> adjacency;
    for (const auto& [from, to] : store.query_graph.edges) {
        adjacency[from].insert(to);
        adjacency[to].insert(from);
    }
    std::set<std::string, IdLess> frontier = result;
    for (std::size_t h = 0; h < hops && !frontier.empty(); ++h) {
        std::set<std::string, IdLess> next;
        for (const auto& id : frontier) {
            auto it = adjacency.find(id);
            if (it == adjacency.end()) continue;
            for (const auto& neighbor : it->second) {
                if (result.insert(neighbor).second) next.insert(neighbor);
            }
        }
        frontier = std::move(next);
    }
    return result;
}

std::set<std::string, IdLess> upward_traverse(const MemoryStore& store,
                                              const std::set<std::string, IdLess>& expanded_ids) {
    for (const auto& id : expanded_ids) {
        if (!store.query_graph.nodes.count(id)) {
            throw NotFoundError("expanded id \"" + id + "\" is not a stored query");
        }
    }
    std::set<std::string, IdLess> out;
    for (const auto& [id, insight] : store.insight_graph.nodes) {
        for (const auto& qid : insight.support) {
            if (expanded_ids.count(qid)) {
                out.insert(id);
                break;
            }
        }
    }
    return out;
}

namespace {

int clamp_score(long value) {
    return static_cast<int>(std::clamp(value, 1L, 10L));
}

}  // namespace

RatingOutcome rate_relevance(ChatProvider& chat, const Embedder& embedder,
                             const std::string& current_query, const QueryNode& candidate,
                             const InteractionGraph& trajectory) {
    const PromptTemplate& tpl = get_prompt("relevance");
    ChatRequest request{tpl.system,
                        render_template(tpl.user, {{"trajectory", render_snippet(trajectory)},
                                                   {"query_scenario", current_query}})};
    RatingOutcome outcome;
    for (int attempt = 0; attempt < 2; ++attempt) {
        ChatResult reply;
        try {
            reply = chat.complete(request);
        } catch (const TransportError&) {
            break;  // provider already retried internally; fall back
        }
        outcome.prompt_tokens += reply.prompt_tokens;
        outcome.completion_tokens += reply.completion_tokens;
        try {
            outcome.score = clamp_score(parse_score(reply.text));
            return outcome;
        } catch (const ParseError&) {
            // retry once, then fall back
        }
    }
    const double similarity = cosine(embedder.embed(current_query), embedder.embed(candidate.text));
    outcome.score = clamp_score(std::lround(10.0 * similarity));
    outcome.degraded = true;
    return outcome;
}

SparsifyOutcome sparsify(ChatProvider& chat, const InteractionGraph& graph,
                         const std::string& query_text) {
    SparsifyOutcome outcome;
    outcome.graph.query_id = graph.query_id;
    if (graph.nodes.empty()) return outcome;

    const PromptTemplate& tpl = get_prompt("extract_trajectory");
    ChatRequest request{tpl.system, render_template(tpl.user, {{"task", query_text},
                                                               {"trajectory", render_snippet(graph)}})};
    const ChatResult reply = chat.complete(request);
    outcome.prompt_tokens = reply.prompt_tokens;
    outcome.completion_tokens = reply.completion_tokens;

    std::set<std::string, IdLess> keep;
    for (const auto& item : parse_numbered_list(reply.text)) {
        if (graph.find(item)) {
            keep.insert(item);
        } else {
            ++outcome.dropped_unknown;
        }
    }
    if (keep.empty()) {
        outcome.graph = graph;  // nothing matched: pass the input through
        outcome.passthrough = true;
        return outcome;
    }
    outcome.graph = induced_subgraph(graph, keep);
    return outcome;
}

DownwardOutcome downward_traverse(const MemoryStore& store, ChatProvider& chat,
                                  const Embedder& embedder, const std::string& query_text,
                                  const std::set<std::string, IdLess>& expanded_ids,
                                  std::size_t m, bool concurrent) {
    if (m < 1) throw DomainError("downward traversal requires m >= 1");
    DownwardOutcome outcome;
    if (expanded_ids.empty()) return outcome;

    struct Candidate {
        const QueryNode* node;
        const InteractionGraph* trajectory;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(expanded_ids.size());
    for (const auto& id : expanded_ids) {
        auto node_it = store.query_graph.nodes.find(id);
        if (node_it == store.query_graph.nodes.end()) {
            throw NotFoundError("candidate \"" + id + "\" is not a stored query");
        }
        auto graph_it = store.interactions.find(node_it->second.interaction_ref);
        if (graph_it == store.interactions.end()) {
            throw NotFoundError("candidate \"" + id + "\" has no interaction graph");
        }
        candidates.push_back(Candidate{&node_it->second, &graph_it->second});
    }

    std::vector<RatingOutcome> ratings(candidates.size());
    if (concurrent && candidates.size() > 1) {
        std::vector<std::future<RatingOutcome>> futures;
        futures.reserve(candidates.size());
        for (const auto& c : candidates) {
            futures.push_back(std::async(std::launch::async, [&chat, &embedder, &query_text, c] {
                return rate_relevance(chat, embedder, query_text, *c.node, *c.trajectory);
            }));
        }
        for (std::size_t i = 0; i < futures.size(); ++i) ratings[i] = futures[i].get();
    } else {
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            ratings[i] = rate_relevance(chat, embedder, query_text, *candidates[i].node,
                                        *candidates[i].trajectory);
        }
    }

    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ratings[a].score != ratings[b].score) return ratings[a].score > ratings[b].score;
        return id_less(candidates[a].node->id, candidates[b].node->id);
    });

    const std::size_t take = std::min(m, candidates.size());
    for (std::size_t rank = 0; rank < take; ++rank) {
        const Candidate& c = candidates[order[rank]];
        outcome.top_m.push_back(c.node->id);
        SparsifyOutcome sparse = sparsify(chat, *c.trajectory, query_text);
        if (sparse.passthrough) {
            outcome.flags.push_back("sparsify passthrough on " + c.node->id);
        }
        outcome.prompt_tokens += sparse.prompt_tokens;
        outcome.completion_tokens += sparse.completion_tokens;
        outcome.sparsified.emplace(c.node->id, std::move(sparse.graph));
    }
    for (const auto& rating : ratings) {
        outcome.degraded = outcome.degraded || rating.degraded;
        outcome.prompt_tokens += rating.prompt_tokens;
        outcome.completion_tokens += rating.completion_tokens;
    }
    return outcome;
}

AllocationOutcome allocate_memory(ChatProvider& chat, const std::vector<std::string>& insights,
                                  const std::vector<TrajectorySnippet>& trajectories,
                                  const std::vector<RoleRef>& roles,
                                  const std::string& query_text) {
    (void)query_text;  // reserved for richer personalization contexts
    if (roles.empty()) throw DomainError("memory allocation requires at least one role");
    AllocationOutcome outcome;
    for (const auto& role : roles) {
        MemoryCue cue;
        cue.agent_id = role.agent_id;
        outcome.cues.emplace(role.agent_id, std::move(cue));
    }
    if (insights.empty() && trajectories.empty()) return outcome;

    std::string insight_list;
    for (std::size_t i = 0; i < insights.size(); ++i) {
        insight_list += std::to_string(i + 1) + ". " + insights[i];
        if (i + 1 < insights.size()) insight_list += '\n';
    }
    // The personalization prompt wants a successful trajectory for
    // context; use the best-ranked resolved snippet when one exists.
    std::string context_trajectory;
    for (const auto& snippet : trajectories) {
        if (snippet.status == QueryStatus::Resolved) {
            context_trajectory = snippet.text;
            break;
        }
    }

    const PromptTemplate& tpl = get_prompt("personalize");
    for (const auto& role : roles) {
        MemoryCue& cue = outcome.cues[role.agent_id];
        cue.trajectory_snippets = trajectories;
        if (insights.empty()) continue;

        ChatRequest request{tpl.system,
                            render_template(tpl.user, {{"trajectory", context_trajectory},
                                                       {"role", role.role_label},
                                                       {"insights", insight_list}})};
        const ChatResult reply = chat.complete(request);
        outcome.prompt_tokens += reply.prompt_tokens;
        outcome.completion_tokens += reply.completion_tokens;
        auto personalized = parse_numbered_list(reply.text);
        if (personalized.empty()) {
            cue.personalized_insights = insights;  // verbatim fallback
            outcome.flags.push_back("personalization fallback for " + role.agent_id);
        } else {
            cue.personalized_insights = std::move(personalized);
        }
    }
    return outcome;
}

RetrievalResult retrieve(const MemoryStore& store, const Embedder& embedder, ChatProvider& chat,
                         const RetrievalConfig& config, const std::string& query_text,
                         const std::vector<RoleRef>& roles) {
    validate_config(config);
    RetrievalResult result;
    result.requested_m = config.m;

    result.sketched = with_stage("coarse_retrieve", [&] {
        return coarse_retrieve(store, embedder, query_text, config.k);
    });
    result.expanded = with_stage("hop_expand", [&] {
        return hop_expand(store, result.sketched, config.hops);
    });
    result.used_insights = with_stage("upward_traverse", [&] {
        return upward_traverse(store, result.expanded);
    });
    DownwardOutcome downward = with_stage("downward_traverse", [&] {
        return downward_traverse(store, chat, embedder, query_text, result.expanded, config.m,
                                 config.concurrent_ratings);
    });
    result.top_m_queries = std::move(downward.top_m);
    result.sparsified_trajectories = std::move(downward.sparsified);
    result.degraded = downward.degraded;
    result.flags = std::move(downward.flags);

    std::vector<std::string> insight_contents;
    for (const auto& id : result.used_insights) {
        insight_contents.push_back(store.insight_graph.nodes.at(id).content);
    }
    std::vector<TrajectorySnippet> snippets;
    for (const auto& qid : result.top_m_queries) {
        TrajectorySnippet snippet;
        snippet.source_query_id = qid;
        snippet.status = store.query_graph.nodes.at(qid).status;
        snippet.text = render_snippet(result.sparsified_trajectories.at(qid));
        snippets.push_back(std::move(snippet));
    }
    AllocationOutcome allocation = with_stage("allocate_memory", [&] {
        return allocate_memory(chat, insight_contents, snippets, roles, query_text);
    });
    result.cues = std::move(allocation.cues);
    for (auto& flag : allocation.flags) result.flags.push_back(std::move(flag));

    result.llm_token_usage = downward.prompt_tokens + downward.completion_tokens +
                             allocation.prompt_tokens + allocation.completion_tokens;
    return result;
}

}  // namespace tiermem
