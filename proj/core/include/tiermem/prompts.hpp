#pragma once

#include <map>
#include <string>
#include <vector>

namespace tiermem {

/// A chat prompt: fixed system text plus a user template with
/// `{placeholder}` slots.
struct PromptTemplate {
    std::string name;
    std::string system;
    std::string user;
};

/// The built-in template set, keyed by name:
/// relevance, extract_trajectory, lessons_compare, lessons_all_succ,
/// merge, personalize. Returned by reference to a process-wide table.
const std::map<std::string, PromptTemplate>& prompt_templates();

/// Fetches one template; throws NotFoundError for unknown names.
const PromptTemplate& get_prompt(const std::string& name);

/// Replaces each `{key}` with its value. Every identifier-shaped
/// placeholder must be bound — an unbound one throws DomainError naming
/// it, so call sites fail loudly rather than emit holes. Brace text
/// that is not an identifier passes through untouched.
std::string render_template(const std::string& text,
                            const std::map<std::string, std::string>& values);

/// First integer following the **last** occurrence of "Score" in the
/// text. Throws ParseError when "Score" is absent or no integer follows.
int parse_score(const std::string& text);

/// Items of a numbered list: lines shaped `<int>. <text>`, in order of
/// appearance. Numbering gaps are tolerated; items are trimmed; empty
/// items are dropped. Non-list lines are ignored.
std::vector<std::string> parse_numbered_list(const std::string& text);

/// ceil(bytes / 4) — a cheap, deterministic token proxy.
std::size_t proxy_token_count(const std::string& text);

}  // namespace tiermem
