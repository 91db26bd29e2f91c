#pragma once

#include <stdexcept>
#include <string>

namespace tiermem {

// Base for everything the engine throws on domain-level failures.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Referenced id (query, insight, utterance, tier) does not exist.
struct NotFoundError : Error {
    explicit NotFoundError(const std::string& msg) : Error(msg) {}
};

// A structural invariant would be violated; message names the invariant.
struct InvariantError : Error {
    explicit InvariantError(const std::string& msg) : Error(msg) {}
};

// Misconfiguration: dimension mismatch, unresolved env var, bad option.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Bad argument to a pure computation (dim mismatch, zero vector).
struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Malformed persisted data; message includes the byte offset when known.
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Persisted store carries a schema_version this build does not support.
struct VersionError : Error {
    explicit VersionError(const std::string& msg) : Error(msg) {}
};

// Remote provider unreachable after the configured retry.
struct TransportError : Error {
    explicit TransportError(const std::string& msg) : Error(msg) {}
};

// Runs f(), prefixing any engine error with the stage name while
// preserving the error's concrete type (callers map types to exit codes
// and HTTP statuses).
template <typename F>
auto with_stage(const char* stage, F&& f) -> decltype(f()) {
    auto tag = [&](const auto& e) { return std::string(stage) + ": " + e.what(); };
    try {
        return f();
    } catch (const NotFoundError& e) {
        throw NotFoundError(tag(e));
    } catch (const InvariantError& e) {
        throw InvariantError(tag(e));
    } catch (const ConfigError& e) {
        throw ConfigError(tag(e));
    } catch (const DomainError& e) {
        throw DomainError(tag(e));
    } catch (const ParseError& e) {
        throw ParseError(tag(e));
    } catch (const VersionError& e) {
        throw VersionError(tag(e));
    } catch (const TransportError& e) {
        throw TransportError(tag(e));
    } catch (const Error& e) {
        throw Error(tag(e));
    }
}

}  // namespace tiermem
