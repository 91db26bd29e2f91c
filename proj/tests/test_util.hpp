#pragma once

// Include doctest.h before this header.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tiermem/graphs.hpp"
#include "tiermem/store_io.hpp"

namespace tiermem::testing {

inline std::filesystem::path data_dir() { return std::filesystem::path(TIERMEM_DATA_DIR); }

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "cannot open ", path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

/// Unique per-process scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("tiermem_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline EmbeddingVector random_unit_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    EmbeddingVector v;
    v.values.resize(dim);
    double norm_sq = 0.0;
    do {
        norm_sq = 0.0;
        for (auto& x : v.values) {
            x = gauss(rng);
            norm_sq += x * x;
        }
    } while (norm_sq < 1e-12);
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& x : v.values) x *= inv;
    return v;
}

inline InteractionGraph random_trace_graph(std::mt19937_64& rng, std::size_t max_nodes = 4) {
    InteractionGraph g;
    std::uniform_int_distribution<std::size_t> n_dist(1, max_nodes);
    const std::size_t n = n_dist(rng);
    for (std::size_t i = 0; i < n; ++i) {
        Utterance u;
        u.id = "u" + std::to_string(i);
        u.agent_id = "agent" + std::to_string(i % 3);
        u.role_label = i % 3 == 0 ? "solver" : (i % 3 == 1 ? "critic" : "executor");
        u.content = "step " + std::to_string(i);
        u.epoch = static_cast<int>(i / 3);
        if (i > 0) {
            std::uniform_int_distribution<std::size_t> p_dist(0, i - 1);
            u.parents.push_back("u" + std::to_string(p_dist(rng)));
        }
        g.nodes.push_back(std::move(u));
    }
    return g;
}

/// Random but always-valid store built through the public mutation ops.
inline MemoryStore random_store(std::mt19937_64& rng, std::size_t max_queries = 12,
                                std::size_t dim = 8) {
    MemoryStore store;
    store.embedding_dim = dim;
    std::uniform_int_distribution<std::size_t> q_dist(0, max_queries);
    const std::size_t n_queries = q_dist(rng);

    std::vector<std::string> query_ids;
    for (std::size_t i = 0; i < n_queries; ++i) {
        const QueryStatus status =
            (rng() % 2 == 0) ? QueryStatus::Resolved : QueryStatus::Failed;
        query_ids.push_back(add_query_node(store, "task number " + std::to_string(rng() % 100),
                                           status, random_trace_graph(rng),
                                           random_unit_vector(rng, dim)));
    }
    if (query_ids.size() >= 2) {
        std::uniform_int_distribution<std::size_t> e_dist(0, query_ids.size() * 2);
        std::uniform_int_distribution<std::size_t> pick(0, query_ids.size() - 1);
        const std::size_t n_edges = e_dist(rng);
        for (std::size_t i = 0; i < n_edges; ++i) {
            const std::string& a = query_ids[pick(rng)];
            const std::string& b = query_ids[pick(rng)];
            if (a != b) add_query_edge(store, a, b);
        }
    }
    if (!query_ids.empty()) {
        std::uniform_int_distribution<std::size_t> i_dist(0, 6);
        std::uniform_int_distribution<std::size_t> pick(0, query_ids.size() - 1);
        std::vector<std::string> insight_ids;
        const std::size_t n_insights = i_dist(rng);
        for (std::size_t i = 0; i < n_insights; ++i) {
            std::set<std::string, IdLess> support;
            const std::size_t support_size = 1 + rng() % 3;
            for (std::size_t s = 0; s < support_size; ++s) support.insert(query_ids[pick(rng)]);
            insight_ids.push_back(
                add_insight_node(store, "lesson " + std::to_string(rng() % 100), std::move(support)));
        }
        if (insight_ids.size() >= 2) {
            std::uniform_int_distribution<std::size_t> ipick(0, insight_ids.size() - 1);
            const std::size_t n_hyper = rng() % 4;
            for (std::size_t i = 0; i < n_hyper; ++i) {
                const std::string& from = insight_ids[ipick(rng)];
                const std::string& to = insight_ids[ipick(rng)];
                if (from != to) {
                    store.insight_graph.hyper_edges.insert(
                        HyperEdge{from, to, query_ids[pick(rng)]});
                }
            }
        }
    }
    return store;
}

}  // namespace tiermem::testing
