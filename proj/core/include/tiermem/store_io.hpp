#pragma once

#include <filesystem>
#include <string>

#include "tiermem/graphs.hpp"

namespace tiermem {

/// Serializes the store to pretty-printed JSON. Keys are emitted in a
/// stable order so identical stores produce identical bytes.
std::string store_to_json(const MemoryStore& store);

/// Parses a store from JSON. Throws ParseError (with byte offset) on
/// malformed input, VersionError on a schema_version mismatch,
/// InvariantError when the decoded store fails validation.
MemoryStore store_from_json(const std::string& text);

/// Atomic save: writes to a sibling temp file, then renames over the
/// destination so readers never observe a partial file.
void save_store(const MemoryStore& store, const std::filesystem::path& path);

/// Loads and validates a store file. Same error contract as
/// store_from_json, plus NotFoundError when the file is missing.
MemoryStore load_store(const std::filesystem::path& path);

}  // namespace tiermem
