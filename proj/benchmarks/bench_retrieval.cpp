// Micro-benchmarks for the hot read-path stages: similarity ranking,
// coarse retrieval, and hop expansion over synthetic stores.

#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "tiermem/embedding.hpp"
#include "tiermem/graphs.hpp"
#include "tiermem/retrieval.hpp"

namespace {

using namespace tiermem;

EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    EmbeddingVector v;
    v.values.resize(dim);
    double norm_sq = 0.0;
    for (auto& x : v.values) {
        x = gauss(rng);
        norm_sq += x * x;
    }
    const double inv = norm_sq > 0 ? 1.0 / std::sqrt(norm_sq) : 0.0;
    for (auto& x : v.values) x *= inv;
    return v;
}

MemoryStore synthetic_store(std::size_t n_queries, std::size_t dim,
                            std::size_t edges_per_node) {
    std::mt19937_64 rng(42);
    MemoryStore store;
    store.embedding_dim = dim;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n_queries; ++i) {
        InteractionGraph trace;
        Utterance u;
        u.id = "u0";
        u.agent_id = "solver";
        u.role_label = "solver";
        u.content = "step";
        trace.nodes.push_back(std::move(u));
        ids.push_back(add_query_node(store, "task " + std::to_string(i),
                                     QueryStatus::Resolved, std::move(trace),
                                     random_unit(rng, dim)));
    }
    for (std::size_t i = 0; i < n_queries; ++i) {
        for (std::size_t e = 0; e < edges_per_node; ++e) {
            const std::string& a = ids[i];
            const std::string& b = ids[rng() % n_queries];
            if (a != b) add_query_edge(store, a, b);
        }
    }
    return store;
}

void bm_top_k(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(7);
    const std::size_t dim = 256;
    std::vector<std::pair<std::string, EmbeddingVector>> candidates;
    candidates.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        candidates.emplace_back("q" + std::to_string(i), random_unit(rng, dim));
    }
    const EmbeddingVector probe = random_unit(rng, dim);
    for (auto _ : state) {
        benchmark::DoNotOptimize(top_k(probe, candidates, 8));
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(n));
}

void bm_coarse_retrieve(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const MemoryStore store = synthetic_store(n, 256, 0);
    const FallbackEmbedder embedder(256);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            coarse_retrieve(store, embedder, "locate the misplaced task", 8));
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(n));
}

void bm_hop_expand(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const MemoryStore store = synthetic_store(n, 16, 3);
    const std::vector<std::string> seeds = {"q0", "q" + std::to_string(n / 2)};
    for (auto _ : state) {
        benchmark::DoNotOptimize(hop_expand(store, seeds, 2));
    }
}

BENCHMARK(bm_top_k)->Arg(64)->Arg(512)->Arg(4096);
BENCHMARK(bm_coarse_retrieve)->Arg(64)->Arg(512);
BENCHMARK(bm_hop_expand)->Arg(64)->Arg(512)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
