#include "tiermem/update.hpp"

#include <algorithm>
#include <mutex>

#include "tiermem/errors.hpp"
#include "tiermem/prompts.hpp"

namespace tiermem {

void validate_config(const UpdateConfig& config) {
    if (config.insight_cap < 1) throw ConfigError("update.insight_cap must be at least 1");
    if (config.merge_target < 1) throw ConfigError("update.merge_target must be at least 1");
    if (config.merge_target >= config.insight_cap) {
        throw ConfigError("update.merge_target must be smaller than update.insight_cap");
    }
}

InteractionGraph build_interaction_graph(const std::vector<TraceEntry>& trace) {
    InteractionGraph graph;
    graph.nodes.reserve(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const TraceEntry& entry = trace[i];
        Utterance u;
        u.id = make_utterance_id(i);
        u.agent_id = entry.agent_id;
        u.role_label = entry.role_label;
        u.content = entry.content;
        u.epoch = entry.epoch;
        for (std::size_t parent : entry.parents) {
            if (parent >= i) {
                throw InvariantError("trace entry " + std::to_string(i) +
                                     " references non-backward parent " + std::to_string(parent));
            }
            u.parents.push_back(make_utterance_id(parent));
        }
        graph.nodes.push_back(std::move(u));
    }
    if (const auto violations = validate_interaction_graph(graph); !violations.empty()) {
        throw InvariantError("trace rejected: " + violations.front());
    }
    return graph;
}

std::string update_query_graph(MemoryStore& store, const std::string& text, QueryStatus status,
                               InteractionGraph interaction, EmbeddingVector embedding,
                               const RetrievalResult& retrieval) {
    // Resolve provenance before mutating anything.
    std::set<std::string, IdLess> connected(retrieval.top_m_queries.begin(),
                                            retrieval.top_m_queries.end());
    for (const auto& iid : retrieval.used_insights) {
        auto it = store.insight_graph.nodes.find(iid);
        if (it == store.insight_graph.nodes.end()) {
            throw NotFoundError("retrieval provenance references unknown insight \"" + iid + "\"");
        }
        connected.insert(it->second.support.begin(), it->second.support.end());
    }
    for (const auto& qid : connected) {
        if (!store.query_graph.nodes.count(qid)) {
            throw NotFoundError("retrieval provenance references unknown query \"" + qid + "\"");
        }
    }

    const std::string q_new =
        add_query_node(store, text, status, std::move(interaction), std::move(embedding));
    connected.erase(q_new);
    for (const auto& historical : connected) {
        add_query_edge(store, historical, q_new);
    }
    return q_new;
}

namespace {

// A trajectory for prompt interpolation: prefer the sparsified form the
// episode actually saw, fall back to the stored full graph.
std::string trajectory_text(const MemoryStore& store, const RetrievalResult& retrieval,
                            const std::string& qid) {
    auto sparse = retrieval.sparsified_trajectories.find(qid);
    if (sparse != retrieval.sparsified_trajectories.end() && !sparse->second.nodes.empty()) {
        return render_snippet(sparse->second);
    }
    auto stored = store.interactions.find(qid);
    if (stored == store.interactions.end()) {
        throw NotFoundError("no interaction graph for query \"" + qid + "\"");
    }
    return render_snippet(stored->second);
}

}  // namespace

InsightOutcome generate_insight(ChatProvider& chat, MemoryStore& store,
                                const EpisodeRecord& episode, const std::string& q_new_id,
                                const RetrievalResult& retrieval) {
    InsightOutcome outcome;
    const std::string new_trajectory = trajectory_text(store, {}, q_new_id);

    ChatRequest request;
    if (episode.status == QueryStatus::Resolved) {
        std::string trajectories = new_trajectory;
        const std::size_t historical_cap =
            retrieval.requested_m > 0 ? retrieval.requested_m - 1 : 0;
        std::size_t taken = 0;
        for (const auto& qid : retrieval.top_m_queries) {
            if (taken == historical_cap) break;
            auto node = store.query_graph.nodes.find(qid);
            if (node == store.query_graph.nodes.end() ||
                node->second.status != QueryStatus::Resolved) {
                continue;
            }
            trajectories += "\n\n" + trajectory_text(store, retrieval, qid);
            ++taken;
        }
        const PromptTemplate& tpl = get_prompt("lessons_all_succ");
        request = {tpl.system, render_template(tpl.user, {{"true_trajs", trajectories}})};
    } else {
        // Failure: learn by contrast, which needs a success to contrast with.
        std::string success_id;
        for (const auto& qid : retrieval.top_m_queries) {
            auto node = store.query_graph.nodes.find(qid);
            if (node != store.query_graph.nodes.end() &&
                node->second.status == QueryStatus::Resolved) {
                success_id = qid;
                break;
            }
        }
        if (success_id.empty()) {
            outcome.skipped = true;
            return outcome;
        }
        const PromptTemplate& tpl = get_prompt("lessons_compare");
        request = {tpl.system,
                   render_template(tpl.user,
                                   {{"true_traj", trajectory_text(store, retrieval, success_id)},
                                    {"false_traj", new_trajectory}})};
    }

    ChatResult reply;
    try {
        reply = chat.complete(request);
    } catch (const TransportError&) {
        outcome.skipped = true;
        outcome.transport_failed = true;
        return outcome;
    }
    outcome.prompt_tokens = reply.prompt_tokens;
    outcome.completion_tokens = reply.completion_tokens;

    const auto items = parse_numbered_list(reply.text);
    if (items.empty()) {
        outcome.skipped = true;
        return outcome;
    }
    std::string content;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) content += '\n';
        content += items[i];
    }
    outcome.insight_id = add_insight_node(store, content, {q_new_id});
    return outcome;
}

void link_and_support(MemoryStore& store, const std::optional<std::string>& new_insight_id,
                      const std::set<std::string, IdLess>& used_insight_ids,
                      const std::string& q_new_id) {
    if (!store.query_graph.nodes.count(q_new_id)) {
        throw NotFoundError("unknown query id \"" + q_new_id + "\"");
    }
    if (new_insight_id && !store.insight_graph.nodes.count(*new_insight_id)) {
        throw NotFoundError("unknown insight id \"" + *new_insight_id + "\"");
    }
    for (const auto& used : used_insight_ids) {
        auto it = store.insight_graph.nodes.find(used);
        if (it == store.insight_graph.nodes.end()) {
            throw NotFoundError("unknown insight id \"" + used + "\"");
        }
        if (new_insight_id) {
            store.insight_graph.hyper_edges.insert(HyperEdge{used, *new_insight_id, q_new_id});
        }
        it->second.support.insert(q_new_id);
    }
}

MergeOutcome merge_insights(ChatProvider& chat, MemoryStore& store, const UpdateConfig& config) {
    MergeOutcome outcome;
    if (store.insight_graph.nodes.size() <= config.insight_cap) return outcome;

    std::string current_rules;
    std::set<std::string, IdLess> union_support;
    std::size_t index = 0;
    for (const auto& [id, node] : store.insight_graph.nodes) {
        if (index > 0) current_rules += '\n';
        current_rules += std::to_string(++index) + ". " + node.content;
        union_support.insert(node.support.begin(), node.support.end());
    }

    const PromptTemplate& tpl = get_prompt("merge");
    ChatRequest request{
        tpl.system,
        render_template(tpl.user, {{"current_rules", current_rules},
                                   {"limited_number", std::to_string(config.merge_target)}})};
    ChatResult reply;
    try {
        reply = chat.complete(request);
    } catch (const TransportError&) {
        outcome.skipped_on_failure = true;
        return outcome;
    }
    outcome.prompt_tokens = reply.prompt_tokens;
    outcome.completion_tokens = reply.completion_tokens;

    auto items = parse_numbered_list(reply.text);
    if (items.empty()) {
        outcome.skipped_on_failure = true;  // unusable reply: keep the store intact
        return outcome;
    }
    if (items.size() > config.merge_target) items.resize(config.merge_target);

    store.insight_graph.nodes.clear();
    store.insight_graph.hyper_edges.clear();
    for (const auto& item : items) {
        add_insight_node(store, item, union_support);
    }
    outcome.merged = true;
    return outcome;
}

CommitSummary commit_episode(MemoryStore& store, const Embedder& embedder, ChatProvider& chat,
                             const UpdateConfig& config, const EpisodeRecord& episode) {
    validate_config(config);
    CommitSummary summary;

    InteractionGraph graph = with_stage("build_interaction_graph", [&] {
        return build_interaction_graph(episode.trace);
    });
    summary.query_id = with_stage("update_query_graph", [&] {
        return update_query_graph(store, episode.query_text, episode.status, std::move(graph),
                                  embedder.embed(episode.query_text), episode.retrieval);
    });

    if (config.generate_insights) {
        // From here on the query-level commit survives insight-phase
        // trouble; problems downgrade to flags on the summary.
        try {
            InsightOutcome insight = with_stage("generate_insight", [&] {
                return generate_insight(chat, store, episode, summary.query_id, episode.retrieval);
            });
            summary.insight_id = insight.insight_id;
            summary.tokens += insight.prompt_tokens + insight.completion_tokens;
            if (insight.transport_failed) {
                summary.flags.push_back("insight generation skipped: provider transport failure");
            }
        } catch (const Error& e) {
            summary.flags.push_back(std::string("insight generation failed: ") + e.what());
        }

        with_stage("link_and_support", [&] {
            link_and_support(store, summary.insight_id, episode.retrieval.used_insights,
                             summary.query_id);
        });

        try {
            MergeOutcome merge = with_stage("merge_insights", [&] {
                return merge_insights(chat, store, config);
            });
            summary.merged = merge.merged;
            summary.tokens += merge.prompt_tokens + merge.completion_tokens;
            if (merge.skipped_on_failure) {
                summary.flags.push_back("insight merge skipped: unusable provider reply");
            }
        } catch (const Error& e) {
            summary.flags.push_back(std::string("insight merge failed: ") + e.what());
        }
    }
    return summary;
}

CommitSummary commit_episode(SharedStore& store, const Embedder& embedder, ChatProvider& chat,
                             const UpdateConfig& config, const EpisodeRecord& episode) {
    // Serialize commits; run all provider work against a private copy so
    // readers keep the pre-state until the single swap below.
    std::lock_guard commit_lock(store.commit_mutex());
    MemoryStore working = store.snapshot();
    CommitSummary summary = commit_episode(working, embedder, chat, config, episode);
    store.replace(std::move(working));
    return summary;
}

}  // namespace tiermem
