#include "tiermem/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tiermem/errors.hpp"
#include "tiermem/serde.hpp"

namespace tiermem {

void validate_topology(const MasTopology& topology) {
    if (topology.agents.empty()) throw ConfigError("topology has no agents");
    if (topology.epochs < 1) throw ConfigError("topology epochs must be at least 1");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < topology.agents.size(); ++i) {
        const AgentSpec& agent = topology.agents[i];
        if (agent.role_label.empty()) {
            throw ConfigError("agent \"" + agent.agent_id + "\" has an empty role label");
        }
        if (!index.emplace(agent.agent_id, i).second) {
            throw ConfigError("duplicate agent id \"" + agent.agent_id + "\"");
        }
    }
    std::vector<std::size_t> indegree(topology.agents.size(), 0);
    std::vector<std::vector<std::size_t>> children(topology.agents.size());
    for (const auto& [from, to] : topology.edges) {
        auto f = index.find(from);
        auto t = index.find(to);
        if (f == index.end() || t == index.end()) {
            throw ConfigError("topology edge (" + from + ", " + to + ") has an unknown endpoint");
        }
        children[f->second].push_back(t->second);
        ++indegree[t->second];
    }
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < indegree.size(); ++i) {
        if (indegree[i] == 0) ready.push_back(i);
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
        const std::size_t i = ready.back();
        ready.pop_back();
        ++visited;
        for (std::size_t child : children[i]) {
            if (--indegree[child] == 0) ready.push_back(child);
        }
    }
    if (visited != topology.agents.size()) {
        throw ConfigError("topology edges contain a cycle");
    }
}

MasTopology default_topology() {
    MasTopology t;
    t.agents = {{"solver", "solver"}, {"critic", "critic"}, {"executor", "executor"}};
    t.edges = {{"solver", "critic"}, {"critic", "executor"}};
    t.epochs = 1;
    t.aggregator = Aggregator::LastAgent;
    return t;
}

// ── suite files ─────────────────────────────────────────────────

TaskSuite suite_from_json_text(const std::string& text) {
    const nlohmann::json doc = parse_json(text);
    if (!doc.is_object()) throw ParseError("suite: top level is not an object");
    TaskSuite suite;
    try {
        suite.families = doc.value("families", std::vector<std::string>{});
        auto instances = doc.find("instances");
        if (instances == doc.end() || !instances->is_array()) {
            throw ParseError("suite: missing \"instances\" array");
        }
        for (const auto& inst : *instances) {
            ToyTask task;
            task.family = inst.at("family").get<std::string>();
            task.name = inst.at("name").get<std::string>();
            task.query = inst.at("query").get<std::string>();
            task.answer = inst.at("answer").get<std::string>();
            task.discoverable = inst.value("discoverable", false);
            if (!suite.families.empty() &&
                std::find(suite.families.begin(), suite.families.end(), task.family) ==
                    suite.families.end()) {
                throw ParseError("suite: instance \"" + task.name +
                                 "\" names unknown family \"" + task.family + "\"");
            }
            suite.tasks.push_back(std::move(task));
        }
        if (auto scripts = doc.find("scripts"); scripts != doc.end()) {
            suite.script = mock_rules_from_json(*scripts);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("suite: ") + e.what());
    }
    return suite;
}

TaskSuite load_suite(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("suite file not found: \"" + path.string() + "\"");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return suite_from_json_text(buffer.str());
}

// ── episode execution ───────────────────────────────────────────

namespace {

std::vector<std::size_t> execution_order(const MasTopology& topology) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < topology.agents.size(); ++i) {
        index.emplace(topology.agents[i].agent_id, i);
    }
    std::vector<std::size_t> indegree(topology.agents.size(), 0);
    std::vector<std::vector<std::size_t>> children(topology.agents.size());
    for (const auto& [from, to] : topology.edges) {
        children[index.at(from)].push_back(index.at(to));
        ++indegree[index.at(to)];
    }
    // Kahn with ties broken by declaration order, so runs are stable.
    std::vector<std::size_t> order;
    std::vector<bool> emitted(topology.agents.size(), false);
    while (order.size() < topology.agents.size()) {
        for (std::size_t i = 0; i < topology.agents.size(); ++i) {
            if (!emitted[i] && indegree[i] == 0) {
                emitted[i] = true;
                order.push_back(i);
                for (std::size_t child : children[i]) --indegree[child];
                break;
            }
        }
    }
    return order;
}

std::string agent_user_prompt(const AgentSpec& agent, const std::string& query,
                              const std::vector<std::pair<std::string, std::string>>& inputs,
                              const MemoryCue& cue) {
    std::ostringstream out;
    out << "Role: " << agent.role_label << "\n";
    out << "Current task: " << query << "\n\n";
    out << "Inputs from teammates:\n";
    if (inputs.empty()) {
        out << "(none)\n";
    } else {
        for (const auto& [role, content] : inputs) {
            out << "- " << role << ": " << content << "\n";
        }
    }
    out << "\nMemory insights:\n";
    if (cue.personalized_insights.empty()) {
        out << "(none)\n";
    } else {
        for (std::size_t i = 0; i < cue.personalized_insights.size(); ++i) {
            out << (i + 1) << ". " << cue.personalized_insights[i] << "\n";
        }
    }
    out << "\nMemory trajectories:\n";
    if (cue.trajectory_snippets.empty()) {
        out << "(none)\n";
    } else {
        for (const auto& snippet : cue.trajectory_snippets) {
            out << "## Past trajectory (source " << snippet.source_query_id << ", status "
                << to_string(snippet.status) << ")\n"
                << snippet.text << "\n";
        }
    }
    out << "\nYour output:";
    return out.str();
}

}  // namespace

EpisodeRecord run_episode(const MasTopology& topology, const MemoryStore& store,
                          const Embedder& embedder, ChatProvider& chat,
                          const HarnessConfig& config, const ToyTask& task) {
    validate_topology(topology);
    const std::vector<std::size_t> order = execution_order(topology);

    EpisodeRecord episode;
    episode.query_text = task.query;

    if (config.memory_enabled) {
        std::vector<RoleRef> roles;
        for (const auto& agent : topology.agents) {
            roles.push_back(RoleRef{agent.agent_id, agent.role_label});
        }
        episode.retrieval = retrieve(store, embedder, chat, config.retrieval, task.query, roles);
    }

    // in-neighbors per agent, in declaration order
    std::vector<std::vector<std::size_t>> inputs_of(topology.agents.size());
    {
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < topology.agents.size(); ++i) {
            index.emplace(topology.agents[i].agent_id, i);
        }
        for (const auto& [from, to] : topology.edges) {
            inputs_of[index.at(to)].push_back(index.at(from));
        }
        for (auto& inputs : inputs_of) std::sort(inputs.begin(), inputs.end());
    }

    // (agent index, epoch) → trace position
    std::map<std::pair<std::size_t, int>, std::size_t> produced;
    const MemoryCue empty_cue;
    bool aborted = false;
    for (int epoch = 0; epoch < topology.epochs && !aborted; ++epoch) {
        for (const std::size_t i : order) {
            const AgentSpec& agent = topology.agents[i];
            std::vector<std::pair<std::string, std::string>> inputs;
            std::vector<std::size_t> parents;
            for (const std::size_t src : inputs_of[i]) {
                auto it = produced.find({src, epoch});
                if (it == produced.end()) continue;  // source runs later in π: prior epoch only
                inputs.emplace_back(topology.agents[src].role_label,
                                    episode.trace[it->second].content);
                parents.push_back(it->second);
            }
            if (epoch > 0) {
                if (auto it = produced.find({i, epoch - 1}); it != produced.end()) {
                    parents.push_back(it->second);
                }
            }
            const MemoryCue* cue = &empty_cue;
            if (auto it = episode.retrieval.cues.find(agent.agent_id);
                it != episode.retrieval.cues.end()) {
                cue = &it->second;
            }
            ChatRequest request{
                "You are the " + agent.role_label + " agent in a collaborative team.",
                agent_user_prompt(agent, task.query, inputs, *cue)};
            ChatResult reply;
            try {
                reply = chat.complete(request);
            } catch (const TransportError& e) {
                episode.error = std::string("agent \"") + agent.agent_id + "\": " + e.what();
                aborted = true;
                break;
            }
            episode.token_usage += reply.prompt_tokens + reply.completion_tokens;

            TraceEntry entry;
            entry.agent_id = agent.agent_id;
            entry.role_label = agent.role_label;
            entry.epoch = epoch;
            entry.content = reply.text;
            entry.parents = std::move(parents);
            produced[{i, epoch}] = episode.trace.size();
            episode.trace.push_back(std::move(entry));
        }
    }

    if (!aborted) {
        const int last_epoch = topology.epochs - 1;
        if (topology.aggregator == Aggregator::LastAgent) {
            for (auto it = order.rbegin(); it != order.rend(); ++it) {
                if (auto hit = produced.find({*it, last_epoch}); hit != produced.end()) {
                    episode.final_answer = episode.trace[hit->second].content;
                    break;
                }
            }
        } else {
            std::map<std::string, std::size_t> votes;
            for (const std::size_t i : order) {
                if (auto hit = produced.find({i, last_epoch}); hit != produced.end()) {
                    ++votes[episode.trace[hit->second].content];
                }
            }
            std::size_t best = 0;
            for (const std::size_t i : order) {  // π order breaks ties
                auto hit = produced.find({i, last_epoch});
                if (hit == produced.end()) continue;
                const std::string& content = episode.trace[hit->second].content;
                if (votes[content] > best) {
                    best = votes[content];
                    episode.final_answer = content;
                }
            }
        }
        episode.status = !episode.final_answer.empty() &&
                                 episode.final_answer.find(task.answer) != std::string::npos
                             ? QueryStatus::Resolved
                             : QueryStatus::Failed;
    }
    return episode;
}

RunReport run_suite(const MasTopology& topology, MemoryStore& store, const Embedder& embedder,
                    ChatProvider& chat, const HarnessConfig& config,
                    const std::vector<ToyTask>& tasks) {
    if (tasks.empty()) throw ConfigError("run_suite requires at least one task");
    RunReport report;
    std::size_t successes = 0;
    for (const auto& task : tasks) {
        TaskOutcome outcome;
        outcome.task_name = task.name;
        outcome.family = task.family;
        try {
            EpisodeRecord episode = run_episode(topology, store, embedder, chat, config, task);
            outcome.status = episode.status;
            outcome.error = episode.error;
            outcome.sketched = episode.retrieval.sketched.size();
            outcome.expanded = episode.retrieval.expanded.size();
            outcome.used_insights = episode.retrieval.used_insights.size();
            outcome.top_m = episode.retrieval.top_m_queries.size();

            UpdateConfig update = config.update;
            if (!config.memory_enabled) update.generate_insights = false;
            MemoryStore working = store;  // commit all-or-nothing
            CommitSummary summary = commit_episode(working, embedder, chat, update, episode);
            store = std::move(working);
            outcome.tokens =
                episode.token_usage + episode.retrieval.llm_token_usage + summary.tokens;
        } catch (const Error& e) {
            outcome.status = QueryStatus::Failed;
            outcome.error = e.what();
        }
        if (outcome.status == QueryStatus::Resolved) ++successes;
        report.total_tokens += outcome.tokens;
        report.outcomes.push_back(std::move(outcome));
        report.cumulative_success.push_back(static_cast<double>(successes) /
                                            static_cast<double>(report.outcomes.size()));
    }
    return report;
}

std::string report_to_csv(const RunReport& report) {
    std::ostringstream out;
    out << "task_index,family,status,tokens,cumulative_success_rate\n";
    for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
        const TaskOutcome& outcome = report.outcomes[i];
        char rate[16];
        std::snprintf(rate, sizeof(rate), "%.4f", report.cumulative_success[i]);
        out << i << ',' << outcome.family << ',' << to_string(outcome.status) << ','
            << outcome.tokens << ',' << rate << '\n';
    }
    return out.str();
}

}  // namespace tiermem
