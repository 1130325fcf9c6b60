#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpr/answer_canon.hpp"
#include "mpr/model_gateway.hpp"
#include "mpr/prompt_builder.hpp"
#include "mpr/vector_index.hpp"

namespace mpr {

struct TraceNeighbor {
    std::string record_id;
    double similarity = 0.0;
    std::string answer;

    friend bool operator==(const TraceNeighbor&, const TraceNeighbor&) = default;
};

/// Everything one pass of the answer path computed.
struct AnswerTrace {
    std::string question;
    std::string image_ref;
    std::size_t k = 0;
    std::vector<TraceNeighbor> neighbors;
    std::optional<MajorityResult> majority;
    std::optional<std::string> quantifier;
    std::optional<std::string> retrieval_text;
    std::string generated;
    std::string label;
    bool exact = false;

    nlohmann::ordered_json to_json() const;
};

struct Query {
    std::string question;
    std::string image_ref;
    std::optional<std::string> q_type;
    /// Set when the query is itself a record of the index (leave-one-out).
    std::optional<std::string> id;
    /// Overrides resolution of `image_ref` (e.g. an inlined upload).
    std::optional<ImageSource> image;
};

struct PipelineConfig {
    PromptConfig prompt;
    LabelSet labels;
    /// Send readable image files inline rather than as references.
    bool inline_image_files = false;
};

/// Drops neighbors whose id equals `query_id` and keeps at most `k` of the rest.
std::vector<Neighbor> exclude_self(std::vector<Neighbor> neighbors, const std::optional<std::string>& query_id,
                                   std::size_t k);

/// encode -> top-k -> majority -> quantifier -> render -> assemble -> generate
/// -> canonicalize. Immutable once built; `answer` may run concurrently.
class RetrievalPipeline {
public:
    RetrievalPipeline(const ModelGateway& gateway, const RetrievalIndex* index, PipelineConfig config);

    AnswerTrace answer(const Query& query, std::size_t k) const;

    /// Retrieval stage only: the k voting neighbors after self-exclusion.
    std::vector<TraceNeighbor> retrieve(const Query& query, std::size_t k) const;

    const PipelineConfig& config() const noexcept { return config_; }

private:
    ImageSource image_of(const Query& query) const;

    const ModelGateway& gateway_;
    const RetrievalIndex* index_;
    PipelineConfig config_;
};

std::vector<RetrievedVote> to_votes(const std::vector<TraceNeighbor>& neighbors);

}  // namespace mpr
