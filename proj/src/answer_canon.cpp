#include "mpr/answer_canon.hpp"

#include <algorithm>
#include <cctype>

#include "mpr/error.hpp"

namespace mpr {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_terminal_punct(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace

std::string normalize(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    // "yes ." and "yes?!" both reduce to "yes".
    while (!out.empty() && (is_terminal_punct(out.back()) || out.back() == ' ')) out.pop_back();
    return out;
}

bool LabelSet::insert(std::string_view label) {
    std::string norm = normalize(label);
    if (norm.empty()) throw ValidationError("label is empty after normalization");
    if (position_.count(norm)) return false;
    position_.emplace(norm, labels_.size());
    labels_.push_back(std::move(norm));
    return true;
}

CommonSubstring lcs_length(std::string_view a, std::string_view b) {
    if (a.empty() || b.empty()) return {};
    // Rolling DP row: run[j] = length of common suffix ending at a[i-1], b[j-1].
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    std::size_t best = 0;
    std::size_t best_end = 0;  // one past the end of the match in `a`
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
            // Strict '>' keeps the earliest end position, hence the leftmost start.
            if (cur[j] > best) {
                best = cur[j];
                best_end = i;
            }
        }
        std::swap(prev, cur);
    }
    return {best, std::string(a.substr(best_end - best, best))};
}

CanonAnswer map_to_label(std::string_view generated, const LabelSet& labels) {
    if (labels.empty()) throw EmptyLabelSetError("cannot canonicalize against an empty label set");
    const std::string norm = normalize(generated);
    if (labels.contains(norm)) return {norm, norm.size(), true};

    const std::string* best_label = nullptr;
    std::size_t best_len = 0;
    for (const auto& label : labels) {
        const std::size_t len = lcs_length(norm, label).length;
        if (best_label == nullptr || len > best_len) {
            best_label = &label;
            best_len = len;
            continue;
        }
        // Equal match length: prefer the better-covered (shorter) label. Compare
        // len/|label| ratios by cross-multiplication; earlier labels win ties.
        if (len == best_len && len > 0 && len * best_label->size() > best_len * label.size()) {
            best_label = &label;
        }
    }
    return {*best_label, best_len, false};
}

}  // namespace mpr
