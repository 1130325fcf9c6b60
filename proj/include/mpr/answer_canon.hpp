#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mpr {

/// Lowercases ASCII, trims, collapses internal whitespace runs to one space
/// and strips terminal sentence punctuation (. ! ?).
std::string normalize(std::string_view text);

/// Insertion-ordered set of normalized, nonempty answer labels.
class LabelSet {
public:
    LabelSet() = default;

    /// Normalizes `label` and appends it unless already present. Returns
    /// true when a new label was added. Empty labels are rejected.
    bool insert(std::string_view label);

    bool contains(std::string_view normalized_label) const {
        return position_.count(std::string(normalized_label)) != 0;
    }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    auto begin() const { return labels_.begin(); }
    auto end() const { return labels_.end(); }

    friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.labels_ == b.labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::size_t> position_;
};

struct CommonSubstring {
    std::size_t length = 0;
    std::string substring;
};

/// Longest common contiguous substring of `a` and `b`, compared bytewise.
/// The reported substring is the leftmost such occurrence in `a`.
CommonSubstring lcs_length(std::string_view a, std::string_view b);

struct CanonAnswer {
    std::string label;
    std::size_t score = 0;
    bool exact = false;
};

/// Maps generated free text onto the closest label. Exact (normalized)
/// matches win outright; otherwise the label with the longest common
/// substring wins, ties broken by match/label length ratio and then by
/// label-set order.
CanonAnswer map_to_label(std::string_view generated, const LabelSet& labels);

}  // namespace mpr
