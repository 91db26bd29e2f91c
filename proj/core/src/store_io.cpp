#include "tiermem/store_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tiermem/errors.hpp"
#include "tiermem/serde.hpp"

namespace tiermem {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* field, const char* context) {
    auto it = j.find(field);
    if (it == j.end()) {
        throw ParseError(std::string("store JSON: missing field \"") + field + "\" in " + context);
    }
    return *it;
}

}  // namespace

std::string store_to_json(const MemoryStore& store) {
    json queries = json::array();
    for (const auto& [id, node] : store.query_graph.nodes) {
        queries.push_back(json{{"id", node.id},
                               {"text", node.text},
                               {"status", to_string(node.status)},
                               {"interaction_ref", node.interaction_ref},
                               {"embedding", node.embedding.values},
                               {"created_seq", node.created_seq}});
    }
    json query_edges = json::array();
    for (const auto& [from, to] : store.query_graph.edges) {
        query_edges.push_back(json::array({from, to}));
    }
    json insights = json::array();
    for (const auto& [id, node] : store.insight_graph.nodes) {
        insights.push_back(json{{"id", node.id},
                                {"content", node.content},
                                {"support", node.support},
                                {"created_seq", node.created_seq}});
    }
    json hyper_edges = json::array();
    for (const auto& edge : store.insight_graph.hyper_edges) {
        hyper_edges.push_back(json::array({edge.from, edge.to, edge.query}));
    }
    json interactions = json::array();
    for (const auto& [qid, graph] : store.interactions) {
        interactions.push_back(to_json(graph));
    }
    json doc{{"schema_version", store.schema_version},
             {"episode_counter", store.episode_counter},
             {"embedding_dim", store.embedding_dim},
             {"next_query_ordinal", store.next_query_ordinal},
             {"next_insight_ordinal", store.next_insight_ordinal},
             {"queries", std::move(queries)},
             {"query_edges", std::move(query_edges)},
             {"insights", std::move(insights)},
             {"insight_hyper_edges", std::move(hyper_edges)},
             {"interactions", std::move(interactions)}};
    return doc.dump(2) + "\n";
}

MemoryStore store_from_json(const std::string& text) {
    const json doc = parse_json(text);
    if (!doc.is_object()) throw ParseError("store JSON: top level is not an object");

    const int version = require(doc, "schema_version", "store").get<int>();
    if (version != kSchemaVersion) {
        throw VersionError("unsupported schema_version " + std::to_string(version) +
                           " (supported: " + std::to_string(kSchemaVersion) + ")");
    }

    MemoryStore store;
    store.schema_version = version;
    store.episode_counter = require(doc, "episode_counter", "store").get<std::uint64_t>();
    store.embedding_dim = require(doc, "embedding_dim", "store").get<std::size_t>();
    store.next_query_ordinal = require(doc, "next_query_ordinal", "store").get<std::uint64_t>();
    store.next_insight_ordinal =
        require(doc, "next_insight_ordinal", "store").get<std::uint64_t>();

    for (const auto& q : require(doc, "queries", "store")) {
        QueryNode node;
        node.id = require(q, "id", "query").get<std::string>();
        node.text = require(q, "text", "query").get<std::string>();
        node.status = query_status_from_string(require(q, "status", "query").get<std::string>());
        node.interaction_ref = require(q, "interaction_ref", "query").get<std::string>();
        node.embedding.values = require(q, "embedding", "query").get<std::vector<double>>();
        node.created_seq = require(q, "created_seq", "query").get<std::uint64_t>();
        const std::string id = node.id;
        if (!store.query_graph.nodes.emplace(id, std::move(node)).second) {
            throw ParseError("store JSON: duplicate query id \"" + id + "\"");
        }
    }
    for (const auto& e : require(doc, "query_edges", "store")) {
        if (!e.is_array() || e.size() != 2) {
            throw ParseError("store JSON: query edge is not a [from, to] pair");
        }
        store.query_graph.edges.emplace(e[0].get<std::string>(), e[1].get<std::string>());
    }
    for (const auto& i : require(doc, "insights", "store")) {
        InsightNode node;
        node.id = require(i, "id", "insight").get<std::string>();
        node.content = require(i, "content", "insight").get<std::string>();
        for (const auto& qid : require(i, "support", "insight")) {
            node.support.insert(qid.get<std::string>());
        }
        node.created_seq = require(i, "created_seq", "insight").get<std::uint64_t>();
        const std::string id = node.id;
        if (!store.insight_graph.nodes.emplace(id, std::move(node)).second) {
            throw ParseError("store JSON: duplicate insight id \"" + id + "\"");
        }
    }
    for (const auto& e : require(doc, "insight_hyper_edges", "store")) {
        if (!e.is_array() || e.size() != 3) {
            throw ParseError("store JSON: hyper-edge is not a [from, to, query] triple");
        }
        store.insight_graph.hyper_edges.insert(HyperEdge{
            e[0].get<std::string>(), e[1].get<std::string>(), e[2].get<std::string>()});
    }
    for (const auto& g : require(doc, "interactions", "store")) {
        InteractionGraph graph = interaction_graph_from_json(g);
        const std::string qid = graph.query_id;
        if (!store.interactions.emplace(qid, std::move(graph)).second) {
            throw ParseError("store JSON: duplicate interaction graph for \"" + qid + "\"");
        }
    }

    if (const auto violations = validate(store); !violations.empty()) {
        throw InvariantError("loaded store is invalid: " + violations.front());
    }
    return store;
}

void save_store(const MemoryStore& store, const std::filesystem::path& path) {
    const std::string payload = store_to_json(store);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open \"" + tmp.string() + "\" for writing");
        out << payload;
        out.flush();
        if (!out) throw Error("failed writing \"" + tmp.string() + "\"");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("failed to move store into place: " + ec.message());
    }
}

MemoryStore load_store(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("store file not found: \"" + path.string() + "\"");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return store_from_json(buffer.str());
}

}  // namespace tiermem
