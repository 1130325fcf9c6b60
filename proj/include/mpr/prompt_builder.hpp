#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mpr/vector_index.hpp"

namespace mpr {

/// Ordered confidence words, lowest first.
class QuantifierScale {
public:
    explicit QuantifierScale(std::vector<std::string> quantifiers);

    static QuantifierScale standard();

    std::size_t size() const noexcept { return quantifiers_.size(); }
    const std::string& operator[](std::size_t i) const { return quantifiers_[i]; }
    const std::vector<std::string>& quantifiers() const noexcept { return quantifiers_; }
    std::optional<std::size_t> index_of(std::string_view quantifier) const;

    friend bool operator==(const QuantifierScale&, const QuantifierScale&) = default;

private:
    std::vector<std::string> quantifiers_;
};

/// Text pattern with exactly one "{quantifier}" and one "{answer}".
class RetrievalPromptTemplate {
public:
    explicit RetrievalPromptTemplate(std::string pattern);

    static RetrievalPromptTemplate standard();       // "I believe the answer is {quantifier} {answer}"
    static RetrievalPromptTemplate answer_first();   // "{answer} is {quantifier} the answer"

    const std::string& pattern() const noexcept { return pattern_; }

    friend bool operator==(const RetrievalPromptTemplate&, const RetrievalPromptTemplate&) = default;

private:
    std::string pattern_;
};

struct RetrievedVote {
    Neighbor neighbor;
    std::string answer;
};

struct MajorityResult {
    std::string answer;
    std::size_t frequency = 0;
    std::string exemplar_id;

    friend bool operator==(const MajorityResult&, const MajorityResult&) = default;
};

enum class Segment { image, question, retrieval };

/// Permutation of the three prompt segments, written as a string over
/// {I, Q, R} (e.g. "IQR").
class PromptOrder {
public:
    PromptOrder() = default;
    explicit PromptOrder(std::string_view code);

    const std::array<Segment, 3>& segments() const noexcept { return order_; }
    std::string code() const;

    friend bool operator==(const PromptOrder&, const PromptOrder&) = default;

private:
    std::array<Segment, 3> order_{Segment::image, Segment::question, Segment::retrieval};
};

struct AssembledPrompt {
    Eigen::MatrixXf image_tokens;  // l_v x d
    std::string instruction;
    std::string question;
    std::optional<std::string> retrieval_text;
    PromptOrder order;

    /// Instruction followed by the question.
    std::string question_text() const { return instruction + " " + question; }

    /// Segments actually present, in prompt order.
    std::vector<Segment> present_segments() const;
};

/// Order, retrieval template and quantifier scale used to build prompts.
struct PromptConfig {
    PromptOrder order;
    RetrievalPromptTemplate retrieval_template = RetrievalPromptTemplate::standard();
    QuantifierScale scale = QuantifierScale::standard();

    nlohmann::ordered_json to_json() const;
    static PromptConfig from_json(const nlohmann::json& j);

    friend bool operator==(const PromptConfig&, const PromptConfig&) = default;
};

/// Most frequent answer among the votes. Frequency ties go to the answer
/// holding the single most similar vote, then to the smallest record id.
MajorityResult majority_answer(const std::vector<RetrievedVote>& votes);

/// Picks q_i with (i-1)/M <= frequency/k < i/M; a unanimous vote maps to q_M.
const std::string& select_quantifier(std::size_t frequency, std::size_t k, const QuantifierScale& scale);

/// Zero-based scale index chosen by `select_quantifier`.
std::size_t quantifier_index(std::size_t frequency, std::size_t k, std::size_t scale_size);

std::string render_retrieval_prompt(const RetrievalPromptTemplate& tmpl, std::string_view quantifier,
                                    std::string_view answer);

struct ParsedRetrieval {
    std::size_t quantifier_index = 0;
    std::string answer;
};

/// Inverse of `render_retrieval_prompt` for a known template and scale.
/// Prefers the longest quantifier that fits; nullopt when nothing fits.
std::optional<ParsedRetrieval> parse_retrieval_prompt(const RetrievalPromptTemplate& tmpl,
                                                      const QuantifierScale& scale, std::string_view text);

/// "Answer the {q_type} question:" or "Answer the question:" without a type.
std::string instruction_for(const std::optional<std::string>& q_type);

AssembledPrompt assemble_prompt(Eigen::MatrixXf image_tokens, std::string instruction, std::string question,
                                std::optional<std::string> retrieval_text, PromptOrder order = {});

}  // namespace mpr
