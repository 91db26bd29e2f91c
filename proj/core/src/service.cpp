#include "tiermem/service.hpp"

#include <atomic>
#include <csignal>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "tiermem/errors.hpp"
#include "tiermem/serde.hpp"
#include "tiermem/store_io.hpp"
#include "tiermem/update.hpp"

namespace tiermem {

using nlohmann::json;

namespace {

// "stage: message" → {"stage", "message"}; plain messages get a default.
json error_body(const std::string& what, const std::string& fallback_stage) {
    const std::size_t sep = what.find(": ");
    if (sep != std::string::npos && sep > 0 && what.substr(0, sep).find(' ') == std::string::npos) {
        return json{{"stage", what.substr(0, sep)}, {"message", what.substr(sep + 2)}};
    }
    return json{{"stage", fallback_stage}, {"message", what}};
}

void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

template <typename F>
void guarded(const char* fallback_stage, httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const ParseError& e) {
        reply_json(res, 400, error_body(e.what(), fallback_stage));
    } catch (const TransportError& e) {
        reply_json(res, 500, error_body(e.what(), fallback_stage));
    } catch (const Error& e) {
        reply_json(res, 409, error_body(e.what(), fallback_stage));
    } catch (const std::exception& e) {
        reply_json(res, 500, error_body(e.what(), fallback_stage));
    }
}

}  // namespace

struct Service::Impl {
    EngineConfig config;
    SharedStore& store;
    std::unique_ptr<Embedder> embedder;
    std::unique_ptr<ChatProvider> chat;
    httplib::Server server;
    std::thread worker;
    int bound_port = 0;
    std::atomic<bool> running{false};

    Impl(EngineConfig cfg, SharedStore& s) : config(std::move(cfg)), store(s) {
        embedder = make_embedder(config.embedder);
        chat = make_chat_provider(config.chat);
        wire_routes();
    }

    void flush() {
        if (config.store_path.empty()) return;
        save_store(store.snapshot(), config.store_path);
    }

    void wire_routes() {
        server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            reply_json(res, 200, json{{"status", "ok"}});
        });

        server.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
            guarded("stats", res, [&] {
                const StoreStats s = store.read([](const MemoryStore& m) { return stats(m); });
                reply_json(res, 200,
                           json{{"queries", s.queries},
                                {"query_edges", s.query_edges},
                                {"insights", s.insights},
                                {"hyper_edges", s.hyper_edges},
                                {"interactions", s.interactions},
                                {"utterances", s.utterances}});
            });
        });

        server.Get("/export", [this](const httplib::Request& req, httplib::Response& res) {
            guarded("export", res, [&] {
                if (!req.has_param("tier")) throw ParseError("export: missing \"tier\" parameter");
                const std::string tier = req.get_param_value("tier");
                const std::string format =
                    req.has_param("format") ? req.get_param_value("format") : "dot";
                const MemoryStore snapshot = store.snapshot();
                if (format == "dot") {
                    res.status = 200;
                    res.set_content(export_dot(snapshot, tier), "text/vnd.graphviz");
                } else if (format == "json") {
                    reply_json(res, 200, tiermem::export_tier_json(snapshot, tier));
                } else {
                    throw ParseError("export: unknown format \"" + format + "\"");
                }
            });
        });

        server.Post("/retrieve", [this](const httplib::Request& req, httplib::Response& res) {
            guarded("retrieve", res, [&] {
                const json body = parse_json(req.body);
                if (!body.is_object() || !body.contains("query")) {
                    throw ParseError("retrieve: body must carry a \"query\" field");
                }
                const std::string query = body["query"].get<std::string>();
                std::vector<RoleRef> roles;
                if (auto it = body.find("roles"); it != body.end() && it->is_array()) {
                    for (const auto& r : *it) {
                        if (r.is_string()) {
                            roles.push_back(RoleRef{r.get<std::string>(), r.get<std::string>()});
                        } else if (r.is_object()) {
                            roles.push_back(RoleRef{r.at("agent_id").get<std::string>(),
                                                    r.at("role_label").get<std::string>()});
                        }
                    }
                }
                if (roles.empty()) throw ParseError("retrieve: \"roles\" must list at least one role");

                RetrievalConfig rc = config.retrieval;
                if (auto it = body.find("overrides"); it != body.end() && it->is_object()) {
                    rc.k = it->value("k", rc.k);
                    rc.m = it->value("m", rc.m);
                    rc.hops = it->value("hops", rc.hops);
                    rc.concurrent_ratings = it->value("concurrent_ratings", rc.concurrent_ratings);
                }
                try {
                    validate_config(rc);
                } catch (const ConfigError& e) {
                    throw ParseError(std::string("retrieve: ") + e.what());
                }

                const MemoryStore snapshot = store.snapshot();
                const RetrievalResult result = retrieve(snapshot, *embedder, *chat, rc, query, roles);
                reply_json(res, 200, to_json(result));
            });
        });

        server.Post("/episodes", [this](const httplib::Request& req, httplib::Response& res) {
            guarded("episodes", res, [&] {
                const EpisodeRecord episode = episode_from_json(parse_json(req.body));
                const CommitSummary summary =
                    commit_episode(store, *embedder, *chat, config.update, episode);
                flush();
                reply_json(res, 200, to_json(summary));
            });
        });
    }

};

namespace {
httplib::Server* g_signal_target = nullptr;

void handle_signal(int) {
    if (g_signal_target) g_signal_target->stop();
}
}  // namespace

Service::Service(EngineConfig config, SharedStore& store)
    : impl_(std::make_unique<Impl>(std::move(config), store)) {}

Service::~Service() {
    if (impl_ && impl_->running.load()) stop();
}

void Service::run(bool install_signal_handlers) {
    const ServiceConfig service = impl_->config.service.value_or(ServiceConfig{});
    if (install_signal_handlers) {
        g_signal_target = &impl_->server;
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
    }
    impl_->running.store(true);
    if (!impl_->server.listen(service.host, service.port)) {
        impl_->running.store(false);
        throw TransportError("failed to listen on " + service.host + ":" +
                             std::to_string(service.port));
    }
    impl_->running.store(false);
    impl_->flush();
}

void Service::start() {
    const ServiceConfig service = impl_->config.service.value_or(ServiceConfig{});
    if (service.port == 0) {
        impl_->bound_port = impl_->server.bind_to_any_port(service.host);
        if (impl_->bound_port <= 0) throw TransportError("failed to bind " + service.host);
    } else {
        if (!impl_->server.bind_to_port(service.host, service.port)) {
            throw TransportError("failed to bind " + service.host + ":" +
                                 std::to_string(service.port));
        }
        impl_->bound_port = service.port;
    }
    impl_->running.store(true);
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void Service::stop() {
    impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
    impl_->running.store(false);
    impl_->flush();
}

int Service::port() const { return impl_->bound_port; }

}  // namespace tiermem
