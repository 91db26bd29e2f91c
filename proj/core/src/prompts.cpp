#include "tiermem/prompts.hpp"

#include <cctype>

#include "tiermem/errors.hpp"

namespace tiermem {

namespace {
#include "prompt_texts.inc"
}

const std::map<std::string, PromptTemplate>& prompt_templates() {
    static const std::map<std::string, PromptTemplate> table = {
        {"relevance", {"relevance", k_relevance_system, k_relevance_user}},
        {"extract_trajectory",
         {"extract_trajectory", k_extract_trajectory_system, k_extract_trajectory_user}},
        {"lessons_compare", {"lessons_compare", k_lessons_compare_system, k_lessons_compare_user}},
        {"lessons_all_succ",
         {"lessons_all_succ", k_lessons_all_succ_system, k_lessons_all_succ_user}},
        {"merge", {"merge", k_merge_system, k_merge_user}},
        {"personalize", {"personalize", k_personalize_system, k_personalize_user}},
    };
    return table;
}

const PromptTemplate& get_prompt(const std::string& name) {
    const auto& table = prompt_templates();
    auto it = table.find(name);
    if (it == table.end()) throw NotFoundError("unknown prompt template \"" + name + "\"");
    return it->second;
}

std::string render_template(const std::string& text,
                            const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t open = text.find('{', pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        const std::size_t close = text.find('}', open + 1);
        if (close == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        const std::string key = text.substr(open + 1, close - open - 1);
        // Placeholder keys are short identifiers; anything else (spaces,
        // nested braces, empty) is literal text and passes through.
        const bool identifier =
            !key.empty() && key.find_first_not_of(
                                "abcdefghijklmnopqrstuvwxyz"
                                "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_") == std::string::npos;
        if (!identifier) {
            out.append(text, pos, open + 1 - pos);
            pos = open + 1;
            continue;
        }
        out.append(text, pos, open - pos);
        auto it = values.find(key);
        if (it == values.end()) {
            throw DomainError("unbound placeholder \"" + key + "\"");
        }
        out.append(it->second);
        pos = close + 1;
    }
    return out;
}

int parse_score(const std::string& text) {
    const std::size_t anchor = text.rfind("Score");
    if (anchor == std::string::npos) {
        throw ParseError("no \"Score\" marker in reply");
    }
    std::size_t i = anchor;
    while (i < text.size() && !(text[i] >= '0' && text[i] <= '9')) {
        ++i;
    }
    if (i == text.size()) {
        throw ParseError("no integer follows the \"Score\" marker");
    }
    long value = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
        value = value * 10 + (text[i] - '0');
        if (value > 1000000) break;  // scores are tiny; avoid overflow on garbage
        ++i;
    }
    return static_cast<int>(value);
}

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

}  // namespace

std::vector<std::string> parse_numbered_list(const std::string& text) {
    std::vector<std::string> items;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;

        std::size_t i = 0;
        while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
        if (i == 0 || i >= line.size() || line[i] != '.') continue;
        const std::string item = trim(line.substr(i + 1));
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

std::size_t proxy_token_count(const std::string& text) {
    return (text.size() + 3) / 4;
}

}  // namespace tiermem
