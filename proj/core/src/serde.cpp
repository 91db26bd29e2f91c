#include "tiermem/serde.hpp"

#include "tiermem/errors.hpp"
#include "tiermem/store_io.hpp"

namespace tiermem {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* field, const char* context) {
    auto it = j.find(field);
    if (it == j.end()) {
        throw ParseError(std::string(context) + ": missing field \"" + field + "\"");
    }
    return *it;
}

template <typename T>
T get_as(const json& j, const char* field, const char* context) {
    try {
        return require(j, field, context).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string(context) + ": bad field \"" + field + "\": " + e.what());
    }
}

}  // namespace

nlohmann::json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what());  // message carries the byte offset
    }
}

// ── MemoryCue ───────────────────────────────────────────────────

json to_json(const MemoryCue& cue) {
    json snippets = json::array();
    for (const auto& s : cue.trajectory_snippets) {
        snippets.push_back(json{{"source_query_id", s.source_query_id},
                                {"status", to_string(s.status)},
                                {"text", s.text}});
    }
    return json{{"agent_id", cue.agent_id},
                {"personalized_insights", cue.personalized_insights},
                {"trajectory_snippets", std::move(snippets)}};
}

MemoryCue cue_from_json(const json& j) {
    MemoryCue cue;
    cue.agent_id = get_as<std::string>(j, "agent_id", "cue");
    cue.personalized_insights =
        get_as<std::vector<std::string>>(j, "personalized_insights", "cue");
    for (const auto& s : require(j, "trajectory_snippets", "cue")) {
        TrajectorySnippet snippet;
        snippet.source_query_id = get_as<std::string>(s, "source_query_id", "snippet");
        snippet.status = query_status_from_string(get_as<std::string>(s, "status", "snippet"));
        snippet.text = get_as<std::string>(s, "text", "snippet");
        cue.trajectory_snippets.push_back(std::move(snippet));
    }
    return cue;
}

// ── InteractionGraph ────────────────────────────────────────────

json to_json(const InteractionGraph& graph) {
    json nodes = json::array();
    for (const auto& u : graph.nodes) {
        nodes.push_back(json{{"id", u.id},
                             {"agent_id", u.agent_id},
                             {"role_label", u.role_label},
                             {"content", u.content},
                             {"epoch", u.epoch},
                             {"parents", u.parents}});
    }
    return json{{"query_id", graph.query_id}, {"nodes", std::move(nodes)}};
}

InteractionGraph interaction_graph_from_json(const json& j) {
    InteractionGraph graph;
    graph.query_id = get_as<std::string>(j, "query_id", "interaction graph");
    for (const auto& n : require(j, "nodes", "interaction graph")) {
        Utterance u;
        u.id = get_as<std::string>(n, "id", "utterance");
        u.agent_id = get_as<std::string>(n, "agent_id", "utterance");
        u.role_label = get_as<std::string>(n, "role_label", "utterance");
        u.content = get_as<std::string>(n, "content", "utterance");
        u.epoch = get_as<int>(n, "epoch", "utterance");
        u.parents = get_as<std::vector<std::string>>(n, "parents", "utterance");
        graph.nodes.push_back(std::move(u));
    }
    return graph;
}

// ── RetrievalResult ─────────────────────────────────────────────

json to_json(const RetrievalResult& result) {
    json sparsified = json::object();
    for (const auto& [qid, graph] : result.sparsified_trajectories) {
        sparsified[qid] = to_json(graph);
    }
    json cues = json::object();
    for (const auto& [agent, cue] : result.cues) {
        cues[agent] = to_json(cue);
    }
    return json{{"sketched", result.sketched},
                {"expanded", result.expanded},
                {"used_insights", result.used_insights},
                {"top_m_queries", result.top_m_queries},
                {"sparsified_trajectories", std::move(sparsified)},
                {"cues", std::move(cues)},
                {"llm_token_usage", result.llm_token_usage},
                {"requested_m", result.requested_m},
                {"degraded", result.degraded},
                {"flags", result.flags}};
}

RetrievalResult retrieval_result_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("retrieval result: not an object");
    RetrievalResult result;
    try {
        result.sketched = j.value("sketched", std::vector<std::string>{});
        for (const auto& id : j.value("expanded", std::vector<std::string>{})) {
            result.expanded.insert(id);
        }
        for (const auto& id : j.value("used_insights", std::vector<std::string>{})) {
            result.used_insights.insert(id);
        }
        result.top_m_queries = j.value("top_m_queries", std::vector<std::string>{});
        if (auto it = j.find("sparsified_trajectories"); it != j.end()) {
            for (const auto& [qid, graph] : it->items()) {
                result.sparsified_trajectories.emplace(qid, interaction_graph_from_json(graph));
            }
        }
        if (auto it = j.find("cues"); it != j.end()) {
            for (const auto& [agent, cue] : it->items()) {
                result.cues.emplace(agent, cue_from_json(cue));
            }
        }
        result.llm_token_usage = j.value("llm_token_usage", std::size_t{0});
        result.requested_m = j.value("requested_m", std::size_t{0});
        result.degraded = j.value("degraded", false);
        result.flags = j.value("flags", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw ParseError(std::string("retrieval result: ") + e.what());
    }
    return result;
}

// ── EpisodeRecord ───────────────────────────────────────────────

json to_json(const EpisodeRecord& episode) {
    json trace = json::array();
    for (const auto& entry : episode.trace) {
        trace.push_back(json{{"agent_id", entry.agent_id},
                             {"role_label", entry.role_label},
                             {"epoch", entry.epoch},
                             {"content", entry.content},
                             {"parents", entry.parents}});
    }
    return json{{"query_text", episode.query_text},
                {"final_answer", episode.final_answer},
                {"status", to_string(episode.status)},
                {"trace", std::move(trace)},
                {"token_usage", episode.token_usage},
                {"retrieval", to_json(episode.retrieval)},
                {"error", episode.error}};
}

EpisodeRecord episode_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("episode: not an object");
    EpisodeRecord episode;
    episode.query_text = get_as<std::string>(j, "query_text", "episode");
    episode.final_answer = j.value("final_answer", std::string{});
    episode.status = query_status_from_string(get_as<std::string>(j, "status", "episode"));
    for (const auto& t : require(j, "trace", "episode")) {
        TraceEntry entry;
        entry.agent_id = get_as<std::string>(t, "agent_id", "trace entry");
        entry.role_label = get_as<std::string>(t, "role_label", "trace entry");
        entry.epoch = get_as<int>(t, "epoch", "trace entry");
        entry.content = get_as<std::string>(t, "content", "trace entry");
        for (const auto& p : require(t, "parents", "trace entry")) {
            if (!p.is_number_unsigned()) {
                throw ParseError("trace entry: parents must be non-negative indices");
            }
            entry.parents.push_back(p.get<std::size_t>());
        }
        episode.trace.push_back(std::move(entry));
    }
    try {
        episode.token_usage = j.value("token_usage", std::size_t{0});
    } catch (const json::exception& e) {
        throw ParseError(std::string("episode: bad field \"token_usage\": ") + e.what());
    }
    if (auto it = j.find("retrieval"); it != j.end()) {
        episode.retrieval = retrieval_result_from_json(*it);
    }
    episode.error = j.value("error", std::string{});
    return episode;
}

// ── CommitSummary ───────────────────────────────────────────────

json to_json(const CommitSummary& summary) {
    return json{{"query_id", summary.query_id},
                {"insight_id", summary.insight_id ? json(*summary.insight_id) : json(nullptr)},
                {"merged", summary.merged},
                {"tokens", summary.tokens},
                {"flags", summary.flags}};
}

CommitSummary commit_summary_from_json(const json& j) {
    CommitSummary summary;
    summary.query_id = get_as<std::string>(j, "query_id", "commit summary");
    const json& insight = require(j, "insight_id", "commit summary");
    if (!insight.is_null()) summary.insight_id = insight.get<std::string>();
    summary.merged = get_as<bool>(j, "merged", "commit summary");
    summary.tokens = get_as<std::size_t>(j, "tokens", "commit summary");
    summary.flags = j.value("flags", std::vector<std::string>{});
    return summary;
}

// ── mock scripts ────────────────────────────────────────────────

std::vector<MockRule> mock_rules_from_json(const json& j) {
    if (!j.is_array()) throw ParseError("mock script: expected an array of rules");
    std::vector<MockRule> rules;
    for (const auto& r : j) {
        MockRule rule;
        const json& contains = require(r, "contains", "mock rule");
        if (contains.is_string()) {
            rule.contains_all.push_back(contains.get<std::string>());
        } else if (contains.is_array()) {
            for (const auto& needle : contains) {
                rule.contains_all.push_back(needle.get<std::string>());
            }
        } else {
            throw ParseError("mock rule: \"contains\" must be a string or array of strings");
        }
        rule.reply = get_as<std::string>(r, "reply", "mock rule");
        rules.push_back(std::move(rule));
    }
    return rules;
}

json export_tier_json(const MemoryStore& store, const std::string& tier) {
    const json doc = json::parse(store_to_json(store));
    if (tier == "query") {
        return json{{"queries", doc.at("queries")}, {"query_edges", doc.at("query_edges")}};
    }
    if (tier == "insight") {
        return json{{"insights", doc.at("insights")},
                    {"insight_hyper_edges", doc.at("insight_hyper_edges")}};
    }
    constexpr const char* kPrefix = "interaction:";
    if (tier.rfind(kPrefix, 0) == 0) {
        const std::string query_id = tier.substr(std::string(kPrefix).size());
        auto it = store.interactions.find(query_id);
        if (it == store.interactions.end()) {
            throw NotFoundError("no interaction graph for query \"" + query_id + "\"");
        }
        return to_json(it->second);
    }
    throw DomainError("unknown tier \"" + tier +
                      "\" (expected query, insight, or interaction:<query_id>)");
}

}  // namespace tiermem
