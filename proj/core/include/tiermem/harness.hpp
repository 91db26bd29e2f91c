#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tiermem/embedding.hpp"
#include "tiermem/graphs.hpp"
#include "tiermem/llm.hpp"
#include "tiermem/retrieval.hpp"
#include "tiermem/update.hpp"

namespace tiermem {

struct AgentSpec {
    std::string agent_id;
    std::string role_label;
};

enum class Aggregator { LastAgent, Majority };

/// Agent communication graph plus the epoch budget. Edges must form a
/// DAG so a topological execution order exists.
struct MasTopology {
    std::vector<AgentSpec> agents;
    std::vector<std::pair<std::string, std::string>> edges;  // (from, to)
    int epochs = 1;
    Aggregator aggregator = Aggregator::LastAgent;
};

/// Throws ConfigError on duplicate agents, dangling edge endpoints,
/// cycles, or epochs < 1.
void validate_topology(const MasTopology& topology);

/// The default desk-scale pipeline: solver → critic → executor, one
/// epoch, final answer taken from the last agent.
MasTopology default_topology();

struct ToyTask {
    std::string family;
    std::string name;
    std::string query;
    std::string answer;  // success ⇔ final answer contains this
    bool discoverable = false;
};

struct TaskSuite {
    std::vector<std::string> families;
    std::vector<ToyTask> tasks;
    std::vector<MockRule> script;
};

/// Reads a suite JSON file: {"families": [...], "instances":
/// [{family,name,query,answer,discoverable}], "scripts":
/// [{contains,reply}]}.
TaskSuite load_suite(const std::filesystem::path& path);
TaskSuite suite_from_json_text(const std::string& text);

struct HarnessConfig {
    RetrievalConfig retrieval;
    UpdateConfig update;
    bool memory_enabled = true;  // false: skip retrieval, no insight generation
};

struct TaskOutcome {
    std::string task_name;
    std::string family;
    QueryStatus status = QueryStatus::Failed;
    std::size_t tokens = 0;
    std::size_t sketched = 0;
    std::size_t expanded = 0;
    std::size_t used_insights = 0;
    std::size_t top_m = 0;
    std::string error;  // non-empty when the episode itself errored
};

struct RunReport {
    std::vector<TaskOutcome> outcomes;
    std::vector<double> cumulative_success;  // one entry per task
    std::size_t total_tokens = 0;
};

/// Plays one task through the topology: retrieval at onset (when
/// enabled), agents in topological order for `epochs` rounds, final
/// answer via the aggregator, status via the task's answer check. The
/// returned record is ready for commit_episode.
EpisodeRecord run_episode(const MasTopology& topology, const MemoryStore& store,
                          const Embedder& embedder, ChatProvider& chat,
                          const HarnessConfig& config, const ToyTask& task);

/// Runs every task in order, committing each episode before the next
/// starts. Per-task errors are recorded and the suite continues.
RunReport run_suite(const MasTopology& topology, MemoryStore& store,
                    const Embedder& embedder, ChatProvider& chat,
                    const HarnessConfig& config,
                    const std::vector<ToyTask>& tasks);

/// `task_index,family,status,tokens,cumulative_success_rate` with
/// 4-decimal rates.
std::string report_to_csv(const RunReport& report);

}  // namespace tiermem
