#include "tiermem/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tiermem/config.hpp"
#include "tiermem/errors.hpp"
#include "tiermem/harness.hpp"
#include "tiermem/serde.hpp"
#include "tiermem/service.hpp"
#include "tiermem/store_io.hpp"
#include "tiermem/update.hpp"

namespace tiermem {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open \"" + path.string() + "\"");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

MemoryStore fresh_store(const EngineConfig& engine) {
    MemoryStore store;
    store.embedding_dim = engine.embedder.dim;
    return store;
}

std::string format_rate(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", rate);
    return buf;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"tiermem — hierarchical memory engine for multi-agent systems"};
    app.require_subcommand(1);

    std::string config_path;
    std::string store_override;
    app.add_option("--config", config_path, "engine config file");
    app.add_option("--store", store_override, "store file (overrides the config)");

    CLI::App* init_cmd = app.add_subcommand("init", "create an empty store file");
    bool force = false;
    init_cmd->add_flag("--force", force, "overwrite an existing store");

    CLI::App* commit_cmd =
        app.add_subcommand("commit", "fold an episode JSON file into the store");
    std::string episode_path;
    commit_cmd->add_option("episode", episode_path, "episode JSON file")->required();

    CLI::App* retrieve_cmd =
        app.add_subcommand("retrieve", "role-customized retrieval for a query");
    std::string query;
    std::vector<std::string> roles;
    int k_override = 0;
    int m_override = 0;
    int hops_override = -1;
    retrieve_cmd->add_option("query", query, "query text")->required();
    retrieve_cmd->add_option("--roles", roles, "comma-separated role labels")
        ->delimiter(',')
        ->required();
    retrieve_cmd->add_option("--k", k_override, "coarse top-k override");
    retrieve_cmd->add_option("--m", m_override, "fine top-m override");
    retrieve_cmd->add_option("--hops", hops_override, "expansion radius override");

    app.add_subcommand("stats", "node/edge counts per tier");

    CLI::App* export_cmd = app.add_subcommand("export", "dump one tier as DOT or JSON");
    std::string tier;
    std::string format = "dot";
    export_cmd->add_option("--tier", tier, "query | insight | interaction:<query_id>")
        ->required();
    export_cmd->add_option("--format", format, "dot | json")
        ->check(CLI::IsMember({"dot", "json"}));

    CLI::App* bench_cmd =
        app.add_subcommand("bench", "run a task suite on a fresh store, print the CSV report");
    std::string suite_path;
    bool no_memory = false;
    bench_cmd->add_option("suite", suite_path, "suite JSON file")->required();
    bench_cmd->add_flag("--no-memory", no_memory, "disable retrieval and insight generation");

    app.add_subcommand("validate", "run the store invariant walk");

    app.add_subcommand("serve", "run the HTTP service until interrupted");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        EngineConfig engine = config_path.empty() ? EngineConfig{} : load_config(config_path);
        if (!store_override.empty()) engine.store_path = store_override;

        if (init_cmd->parsed()) {
            if (std::filesystem::exists(engine.store_path) && !force) {
                throw DomainError("store already exists: \"" + engine.store_path.string() +
                                  "\" (use --force to overwrite)");
            }
            save_store(fresh_store(engine), engine.store_path);
            out << "initialized " << engine.store_path.string() << "\n";
        } else if (commit_cmd->parsed()) {
            MemoryStore store = load_store(engine.store_path);
            const auto embedder = make_embedder(engine.embedder);
            const auto chat = make_chat_provider(engine.chat);
            const EpisodeRecord episode = episode_from_json(parse_json(read_file(episode_path)));
            const CommitSummary summary =
                commit_episode(store, *embedder, *chat, engine.update, episode);
            save_store(store, engine.store_path);
            out << to_json(summary).dump(2) << "\n";
        } else if (retrieve_cmd->parsed()) {
            const MemoryStore store = load_store(engine.store_path);
            const auto embedder = make_embedder(engine.embedder);
            const auto chat = make_chat_provider(engine.chat);
            RetrievalConfig rc = engine.retrieval;
            if (k_override > 0) rc.k = static_cast<std::size_t>(k_override);
            if (m_override > 0) rc.m = static_cast<std::size_t>(m_override);
            if (hops_override >= 0) rc.hops = static_cast<std::size_t>(hops_override);
            std::vector<RoleRef> refs;
            refs.reserve(roles.size());
            for (const auto& r : roles) refs.push_back(RoleRef{r, r});
            const RetrievalResult result = retrieve(store, *embedder, *chat, rc, query, refs);
            out << to_json(result).dump(2) << "\n";
        } else if (app.get_subcommand("stats")->parsed()) {
            const StoreStats s = stats(load_store(engine.store_path));
            out << "queries: " << s.queries << ", insights: " << s.insights
                << ", interactions: " << s.interactions << ", query_edges: " << s.query_edges
                << ", hyper_edges: " << s.hyper_edges << ", utterances: " << s.utterances
                << "\n";
        } else if (export_cmd->parsed()) {
            const MemoryStore store = load_store(engine.store_path);
            if (format == "dot") {
                out << export_dot(store, tier);
            } else {
                out << export_tier_json(store, tier).dump(2) << "\n";
            }
        } else if (bench_cmd->parsed()) {
            const TaskSuite suite = load_suite(suite_path);
            MemoryStore store = fresh_store(engine);
            const auto embedder = make_embedder(engine.embedder);
            MockChatProvider chat(suite.script);
            const auto ledger = std::make_shared<TokenLedger>();
            chat.attach_ledger(ledger);
            HarnessConfig hc;
            hc.retrieval = engine.retrieval;
            hc.update = engine.update;
            hc.memory_enabled = !no_memory;
            const RunReport report =
                run_suite(default_topology(), store, *embedder, chat, hc, suite.tasks);
            out << report_to_csv(report);
            const double rate =
                report.cumulative_success.empty() ? 0.0 : report.cumulative_success.back();
            err << "tasks: " << report.outcomes.size() << ", success_rate: " << format_rate(rate)
                << ", total_tokens: " << report.total_tokens
                << ", ledger_tokens: " << ledger->total_tokens() << "\n";
        } else if (app.get_subcommand("validate")->parsed()) {
            const MemoryStore store = load_store(engine.store_path);
            if (const auto violations = validate(store); !violations.empty()) {
                throw InvariantError("store invariants violated: " + violations.front());
            }
            out << "ok\n";
        } else if (app.get_subcommand("serve")->parsed()) {
            if (!engine.service) {
                throw ConfigError("serve needs service.host/service.port in the config");
            }
            SharedStore shared;
            if (std::filesystem::exists(engine.store_path)) {
                shared.replace(load_store(engine.store_path));
            } else {
                shared.replace(fresh_store(engine));
            }
            Service service(engine, shared);
            err << "listening on " << engine.service->host << ":" << engine.service->port
                << "\n";
            service.run(true);
        }
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace tiermem
