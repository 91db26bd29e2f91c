#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tiermem/llm.hpp"
#include "tiermem/retrieval.hpp"
#include "tiermem/update.hpp"

namespace tiermem {

// JSON interchange for the wire formats (CLI output, HTTP bodies,
// fixture files). Decoding throws ParseError with a field path on any
// shape violation.

nlohmann::json to_json(const MemoryCue& cue);
MemoryCue cue_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RetrievalResult& result);
RetrievalResult retrieval_result_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EpisodeRecord& episode);
EpisodeRecord episode_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CommitSummary& summary);
CommitSummary commit_summary_from_json(const nlohmann::json& j);

nlohmann::json to_json(const InteractionGraph& graph);
InteractionGraph interaction_graph_from_json(const nlohmann::json& j);

/// Mock script rules: array of {"contains": [needles...] | "needle",
/// "reply": text}.
std::vector<MockRule> mock_rules_from_json(const nlohmann::json& j);

/// One tier as JSON: "query" → {queries, query_edges}, "insight" →
/// {insights, insight_hyper_edges}, "interaction:<query_id>" → that
/// utterance graph. Unknown tier → DomainError; unknown query →
/// NotFoundError.
nlohmann::json export_tier_json(const MemoryStore& store, const std::string& tier);

/// Strict parse helper: throws ParseError (not nlohmann's own type)
/// with the byte offset on malformed text.
nlohmann::json parse_json(const std::string& text);

}  // namespace tiermem
