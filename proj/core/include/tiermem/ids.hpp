#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace tiermem {

// Engine ids are a short prefix plus a monotone ordinal ("q0", "i12", "u3").
// id_less orders them numerically when the prefixes match ("q2" < "q10"),
// falling back to plain lexicographic order otherwise. All tie-breaking on
// ids across the engine uses this order.
bool id_less(std::string_view a, std::string_view b);

struct IdLess {
    bool operator()(const std::string& a, const std::string& b) const {
        return id_less(a, b);
    }
    // Enables heterogeneous lookup in ordered containers.
    using is_transparent = void;
    bool operator()(std::string_view a, std::string_view b) const {
        return id_less(a, b);
    }
};

std::string make_query_id(std::uint64_t ordinal);
std::string make_insight_id(std::uint64_t ordinal);
std::string make_utterance_id(std::uint64_t ordinal);

}  // namespace tiermem
