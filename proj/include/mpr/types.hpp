#pragma once

#include <string>
#include <string_view>

#include "mpr/error.hpp"

namespace mpr {

enum class AnswerType { open, closed };

inline std::string_view to_string(AnswerType t) {
    return t == AnswerType::open ? "open" : "closed";
}

inline AnswerType parse_answer_type(std::string_view s) {
    if (s == "open") return AnswerType::open;
    if (s == "closed") return AnswerType::closed;
    throw ValidationError("unknown answer type '" + std::string(s) + "'");
}

}  // namespace mpr
