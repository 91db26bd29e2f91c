#pragma once

#include <functional>
#include <memory>

#include "tiermem/config.hpp"
#include "tiermem/graphs.hpp"

namespace tiermem {

/// HTTP front door for the engine. Endpoints:
///   POST /episodes   — commit an episode, returns the commit summary
///   POST /retrieve   — {query, roles, overrides} → retrieval result
///   GET  /stats      — tier counts
///   GET  /export     — ?tier=...&format=dot|json
///   GET  /healthz    — liveness
/// Errors carry JSON bodies {"stage": ..., "message": ...} with
/// 400 (malformed body), 409 (invariant rejection), 500 (transport).
class Service {
public:
    Service(EngineConfig config, SharedStore& store);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Blocks until stop() is called (or the process receives SIGINT /
    /// SIGTERM when `install_signal_handlers` was requested). Flushes
    /// the store to disk on the way out.
    void run(bool install_signal_handlers = true);

    /// Starts serving on a background thread; returns once the port
    /// is accepting connections. Used by tests.
    void start();

    /// Stops the listener and flushes the store.
    void stop();

    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace tiermem
