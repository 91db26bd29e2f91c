#include "tiermem/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "tiermem/errors.hpp"

namespace tiermem {

// ── ids ─────────────────────────────────────────────────────────

namespace {

std::pair<std::string_view, std::string_view> split_numeric_suffix(std::string_view s) {
    std::size_t i = s.size();
    while (i > 0 && s[i - 1] >= '0' && s[i - 1] <= '9') --i;
    return {s.substr(0, i), s.substr(i)};
}

std::string_view strip_leading_zeros(std::string_view digits) {
    std::size_t i = 0;
    while (i + 1 < digits.size() && digits[i] == '0') ++i;
    return digits.substr(i);
}

}  // namespace

bool id_less(std::string_view a, std::string_view b) {
    const auto [pa, na] = split_numeric_suffix(a);
    const auto [pb, nb] = split_numeric_suffix(b);
    if (pa == pb && !na.empty() && !nb.empty()) {
        const auto da = strip_leading_zeros(na);
        const auto db = strip_leading_zeros(nb);
        if (da.size() != db.size()) return da.size() < db.size();
        if (da != db) return da < db;
        return a < b;  // e.g. "q01" vs "q1": keep a total order
    }
    return a < b;
}

std::string make_query_id(std::uint64_t ordinal) { return "q" + std::to_string(ordinal); }
std::string make_insight_id(std::uint64_t ordinal) { return "i" + std::to_string(ordinal); }
std::string make_utterance_id(std::uint64_t ordinal) { return "u" + std::to_string(ordinal); }

// ── status ──────────────────────────────────────────────────────

std::string to_string(QueryStatus s) {
    return s == QueryStatus::Resolved ? "Resolved" : "Failed";
}

QueryStatus query_status_from_string(const std::string& s) {
    if (s == "Resolved") return QueryStatus::Resolved;
    if (s == "Failed") return QueryStatus::Failed;
    throw ParseError("unknown status \"" + s + "\" (expected Resolved or Failed)");
}

// ── interaction graphs ──────────────────────────────────────────

std::size_t InteractionGraph::edge_count() const {
    std::size_t count = 0;
    for (const auto& node : nodes) {
        std::set<std::string> unique(node.parents.begin(), node.parents.end());
        count += unique.size();
    }
    return count;
}

const Utterance* InteractionGraph::find(std::string_view utterance_id) const {
    for (const auto& node : nodes) {
        if (node.id == utterance_id) return &node;
    }
    return nullptr;
}

std::vector<std::string> validate_interaction_graph(const InteractionGraph& g) {
    std::vector<std::string> violations;
    std::unordered_map<std::string, const Utterance*> by_id;
    for (const auto& node : g.nodes) {
        if (node.id.empty()) violations.push_back("utterance with empty id");
        if (!by_id.emplace(node.id, &node).second) {
            violations.push_back("duplicate utterance id \"" + node.id + "\"");
        }
        if (node.epoch < 0) {
            violations.push_back("utterance \"" + node.id + "\" has negative epoch");
        }
    }
    bool refs_ok = true;
    for (const auto& node : g.nodes) {
        for (const auto& parent : node.parents) {
            auto it = by_id.find(parent);
            if (it == by_id.end()) {
                violations.push_back("utterance \"" + node.id +
                                     "\" references missing parent \"" + parent + "\"");
                refs_ok = false;
                continue;
            }
            if (it->second->epoch > node.epoch) {
                violations.push_back("utterance \"" + node.id + "\" (epoch " +
                                     std::to_string(node.epoch) + ") has parent \"" +
                                     parent + "\" from a later epoch");
            }
        }
    }
    if (refs_ok && topological_order(g).size() != g.nodes.size()) {
        violations.push_back("interaction graph contains a cycle");
    }
    return violations;
}

std::vector<std::string> topological_order(const InteractionGraph& g) {
    std::unordered_map<std::string, std::size_t> indegree;
    std::unordered_map<std::string, std::set<std::string>> children;
    for (const auto& node : g.nodes) indegree[node.id];  // ensure presence
    for (const auto& node : g.nodes) {
        std::set<std::string> unique(node.parents.begin(), node.parents.end());
        for (const auto& parent : unique) {
            if (!indegree.count(parent)) continue;  // dangling: validation's job
            if (children[parent].insert(node.id).second) ++indegree[node.id];
        }
    }
    auto cmp = [](const std::string& a, const std::string& b) { return id_less(b, a); };
    std::priority_queue<std::string, std::vector<std::string>, decltype(cmp)> ready(cmp);
    for (const auto& [id, deg] : indegree) {
        if (deg == 0) ready.push(id);
    }
    std::vector<std::string> order;
    order.reserve(g.nodes.size());
    while (!ready.empty()) {
        std::string id = ready.top();
        ready.pop();
        order.push_back(id);
        for (const auto& child : children[id]) {
            if (--indegree[child] == 0) ready.push(child);
        }
    }
    return order;  // shorter than nodes when a cycle exists
}

InteractionGraph induced_subgraph(const InteractionGraph& g,
                                  const std::set<std::string, IdLess>& keep) {
    InteractionGraph out;
    out.query_id = g.query_id;
    for (const auto& node : g.nodes) {
        if (!keep.count(node.id)) continue;
        Utterance copy = node;
        std::erase_if(copy.parents,
                      [&](const std::string& p) { return !keep.count(p); });
        out.nodes.push_back(std::move(copy));
    }
    return out;
}

// ── store operations ────────────────────────────────────────────

namespace {

void check_embedding(const MemoryStore& store, const EmbeddingVector& embedding) {
    if (embedding.dim() != store.embedding_dim) {
        throw ConfigError("embedding dimension " + std::to_string(embedding.dim()) +
                          " does not match store dimension " +
                          std::to_string(store.embedding_dim));
    }
    for (double v : embedding.values) {
        if (!std::isfinite(v)) throw InvariantError("embedding contains a non-finite entry");
    }
}

}  // namespace

std::string add_query_node(MemoryStore& store, const std::string& text,
                           QueryStatus status, InteractionGraph interaction,
                           EmbeddingVector embedding) {
    check_embedding(store, embedding);
    const auto violations = validate_interaction_graph(interaction);
    if (!violations.empty()) {
        throw InvariantError("interaction graph rejected: " + violations.front());
    }
    const std::string id = make_query_id(store.next_query_ordinal++);
    interaction.query_id = id;
    QueryNode node;
    node.id = id;
    node.text = text;
    node.status = status;
    node.interaction_ref = id;
    node.embedding = std::move(embedding);
    node.created_seq = store.episode_counter;
    store.interactions.emplace(id, std::move(interaction));
    store.query_graph.nodes.emplace(id, std::move(node));
    ++store.episode_counter;
    return id;
}

std::set<std::string, IdLess> neighbors(const QueryGraph& graph, const std::string& id) {
    if (!graph.nodes.count(id)) {
        throw NotFoundError("unknown query id \"" + id + "\"");
    }
    std::set<std::string, IdLess> out;
    for (const auto& [from, to] : graph.edges) {
        if (from == id) out.insert(to);
        if (to == id) out.insert(from);
    }
    out.erase(id);
    return out;
}

void add_query_edge(MemoryStore& store, const std::string& from, const std::string& to) {
    if (!store.query_graph.nodes.count(from)) {
        throw NotFoundError("unknown query id \"" + from + "\"");
    }
    if (!store.query_graph.nodes.count(to)) {
        throw NotFoundError("unknown query id \"" + to + "\"");
    }
    if (from == to) throw InvariantError("self-edges are not allowed in the query graph");
    store.query_graph.edges.emplace(from, to);
}

std::string add_insight_node(MemoryStore& store, const std::string& content,
                             std::set<std::string, IdLess> support) {
    if (support.empty()) throw InvariantError("insight support set must not be empty");
    for (const auto& qid : support) {
        if (!store.query_graph.nodes.count(qid)) {
            throw NotFoundError("insight support references unknown query \"" + qid + "\"");
        }
    }
    const std::string id = make_insight_id(store.next_insight_ordinal++);
    InsightNode node;
    node.id = id;
    node.content = content;
    node.support = std::move(support);
    node.created_seq = store.episode_counter;
    store.insight_graph.nodes.emplace(id, std::move(node));
    return id;
}

// ── validation ──────────────────────────────────────────────────

namespace {

// Ordinal of an engine id ("q12" → 12), or nullopt for foreign shapes.
std::optional<std::uint64_t> id_ordinal(std::string_view id, char prefix) {
    if (id.size() < 2 || id[0] != prefix) return std::nullopt;
    std::uint64_t value = 0;
    for (char c : id.substr(1)) {
        if (c < '0' || c > '9') return std::nullopt;
        value = value * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return value;
}

}  // namespace

std::vector<std::string> validate(const MemoryStore& store) {
    std::vector<std::string> violations;
    const auto& queries = store.query_graph.nodes;

    for (const auto& [id, node] : queries) {
        if (node.id != id) {
            violations.push_back("query map key \"" + id + "\" holds node id \"" + node.id + "\"");
        }
        if (node.embedding.dim() != store.embedding_dim) {
            violations.push_back("query \"" + id + "\" embedding dimension " +
                                 std::to_string(node.embedding.dim()) + " != store dimension " +
                                 std::to_string(store.embedding_dim));
        }
        for (double v : node.embedding.values) {
            if (!std::isfinite(v)) {
                violations.push_back("query \"" + id + "\" embedding has a non-finite entry");
                break;
            }
        }
        if (!store.interactions.count(node.interaction_ref)) {
            violations.push_back("query \"" + id + "\" interaction_ref \"" +
                                 node.interaction_ref + "\" does not resolve");
        }
        if (auto ord = id_ordinal(id, 'q'); ord && *ord >= store.next_query_ordinal) {
            violations.push_back("query id \"" + id + "\" is not below the next ordinal " +
                                 std::to_string(store.next_query_ordinal));
        }
    }
    for (const auto& [from, to] : store.query_graph.edges) {
        if (!queries.count(from) || !queries.count(to)) {
            violations.push_back("query edge (" + from + ", " + to + ") has a missing endpoint");
        }
        if (from == to) violations.push_back("query self-edge on \"" + from + "\"");
    }

    for (const auto& [id, node] : store.insight_graph.nodes) {
        if (node.id != id) {
            violations.push_back("insight map key \"" + id + "\" holds node id \"" + node.id + "\"");
        }
        if (node.support.empty()) {
            violations.push_back("insight \"" + id + "\" has an empty support set");
        }
        for (const auto& qid : node.support) {
            if (!queries.count(qid)) {
                violations.push_back("insight \"" + id + "\" support references unknown query \"" +
                                     qid + "\"");
            }
        }
        if (auto ord = id_ordinal(id, 'i'); ord && *ord >= store.next_insight_ordinal) {
            violations.push_back("insight id \"" + id + "\" is not below the next ordinal " +
                                 std::to_string(store.next_insight_ordinal));
        }
    }
    for (const auto& edge : store.insight_graph.hyper_edges) {
        if (!store.insight_graph.nodes.count(edge.from) ||
            !store.insight_graph.nodes.count(edge.to)) {
            violations.push_back("hyper-edge (" + edge.from + ", " + edge.to + ", " + edge.query +
                                 ") references a missing insight");
        }
        if (!queries.count(edge.query)) {
            violations.push_back("hyper-edge (" + edge.from + ", " + edge.to + ", " + edge.query +
                                 ") references a missing query");
        }
    }

    for (const auto& [qid, graph] : store.interactions) {
        if (graph.query_id != qid) {
            violations.push_back("interaction graph keyed \"" + qid + "\" carries query_id \"" +
                                 graph.query_id + "\"");
        }
        if (!queries.count(qid)) {
            violations.push_back("interaction graph \"" + qid + "\" has no owning query");
        }
        for (auto& violation : validate_interaction_graph(graph)) {
            violations.push_back("interaction \"" + qid + "\": " + violation);
        }
    }

    if (store.episode_counter < queries.size()) {
        violations.push_back("episode_counter " + std::to_string(store.episode_counter) +
                             " is below the query count " + std::to_string(queries.size()));
    }
    return violations;
}

// ── DOT export ──────────────────────────────────────────────────

namespace {

// Truncate to at most `limit` code points, never splitting a UTF-8
// sequence.
std::string utf8_truncate(const std::string& text, std::size_t limit) {
    std::size_t count = 0;
    std::size_t i = 0;
    while (i < text.size() && count < limit) {
        unsigned char c = text[i];
        std::size_t len = 1;
        if ((c & 0x80u) == 0x00u) len = 1;
        else if ((c & 0xE0u) == 0xC0u) len = 2;
        else if ((c & 0xF0u) == 0xE0u) len = 3;
        else if ((c & 0xF8u) == 0xF0u) len = 4;
        i = std::min(text.size(), i + len);
        ++count;
    }
    return text.substr(0, i);
}

std::string dot_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string dot_label(const std::string& text) {
    return dot_escape(utf8_truncate(text, 40));
}

}  // namespace

std::string export_dot(const MemoryStore& store, const std::string& tier) {
    std::ostringstream out;
    out << "digraph {\n";
    if (tier == "query") {
        for (const auto& [id, node] : store.query_graph.nodes) {
            out << "  \"" << id << "\" [label=\"" << dot_label(node.text) << "\"];\n";
        }
        for (const auto& [from, to] : store.query_graph.edges) {
            out << "  \"" << from << "\" -> \"" << to << "\";\n";
        }
    } else if (tier == "insight") {
        for (const auto& [id, node] : store.insight_graph.nodes) {
            out << "  \"" << id << "\" [label=\"" << dot_label(node.content) << "\"];\n";
        }
        for (const auto& edge : store.insight_graph.hyper_edges) {
            out << "  \"" << edge.from << "\" -> \"" << edge.to << "\" [label=\"" << edge.query
                << "\"];\n";
        }
    } else if (tier.rfind("interaction:", 0) == 0) {
        const std::string qid = tier.substr(std::string("interaction:").size());
        auto it = store.interactions.find(qid);
        if (it == store.interactions.end()) {
            throw NotFoundError("no interaction graph for query \"" + qid + "\"");
        }
        for (const auto& node : it->second.nodes) {
            out << "  \"" << node.id << "\" [label=\""
                << dot_label("[" + node.role_label + "] " + node.content) << "\"];\n";
        }
        for (const auto& node : it->second.nodes) {
            std::set<std::string> unique(node.parents.begin(), node.parents.end());
            for (const auto& parent : unique) {
                out << "  \"" << parent << "\" -> \"" << node.id << "\";\n";
            }
        }
    } else {
        throw DomainError("unknown tier \"" + tier +
                          "\" (expected query, insight, or interaction:<query_id>)");
    }
    out << "}\n";
    return out.str();
}

StoreStats stats(const MemoryStore& store) {
    StoreStats s;
    s.queries = store.query_graph.nodes.size();
    s.query_edges = store.query_graph.edges.size();
    s.insights = store.insight_graph.nodes.size();
    s.hyper_edges = store.insight_graph.hyper_edges.size();
    s.interactions = store.interactions.size();
    for (const auto& [qid, graph] : store.interactions) {
        s.utterances += graph.nodes.size();
    }
    return s;
}

}  // namespace tiermem
