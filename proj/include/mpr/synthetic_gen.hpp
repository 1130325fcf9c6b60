#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpr/dataset_io.hpp"

namespace mpr {

struct QaTypePair {
    std::string q_type;
    AnswerType a_type = AnswerType::open;

    friend auto operator<=>(const QaTypePair&, const QaTypePair&) = default;
};

/// Question templates per (q_type, a_type) and answer keywords per q_type.
/// Closed templates carry exactly one "{}" slot; open templates carry none.
class TemplateBank {
public:
    void add_templates(const QaTypePair& pair, std::vector<std::string> templates);
    void add_keywords(const std::string& q_type, std::vector<std::string> keywords);

    /// Throws ConfigError when a listed pair or q_type is empty, slots are
    /// malformed, or keywords repeat after normalization.
    void validate() const;

    const std::vector<std::string>* templates(const QaTypePair& pair) const;
    const std::vector<std::string>* keywords(const std::string& q_type) const;

    /// q_types with keywords, in first-insertion order.
    const std::vector<std::string>& q_types() const noexcept { return q_type_order_; }
    const std::map<QaTypePair, std::vector<std::string>>& all_templates() const noexcept { return templates_; }

    friend bool operator==(const TemplateBank&, const TemplateBank&) = default;

private:
    std::map<QaTypePair, std::vector<std::string>> templates_;
    std::map<std::string, std::vector<std::string>> keywords_;
    std::vector<std::string> q_type_order_;
};

/// Default bank with the organ / organ system / modality / plane templates
/// and keywords for radiology captions.
TemplateBank default_template_bank();

TemplateBank load_template_bank(const std::filesystem::path& path);
TemplateBank read_template_bank(std::istream& in);
void write_template_bank(const TemplateBank& bank, std::ostream& out);

struct SynthConfig {
    std::uint64_t seed = 0;
    /// Fraction of closed questions whose slot gets a distractor and answer "no".
    double negative_ratio = 0.5;
    std::optional<std::size_t> max_pairs_per_caption;
};

/// Identifier of the pseudo-random stream `generate` consumes.
inline constexpr std::string_view kSynthPrngAlgorithm = "mt19937_64/rejection-uniform/53bit-bernoulli";

/// Case-insensitive whole-word (and whole-word-sequence) keyword matches,
/// ordered by first occurrence in the caption and deduplicated. Letters,
/// digits and non-ASCII bytes are word characters.
std::vector<std::string> match_keywords(std::string_view caption, const std::vector<std::string>& keywords);

/// Builds synthetic QA pairs: for every caption, q_type and matched keyword,
/// one open question answered by the keyword and one closed yes/no question.
std::vector<VqaExample> generate(const std::vector<CaptionExample>& captions, const TemplateBank& bank,
                                 const SynthConfig& cfg);

}  // namespace mpr
