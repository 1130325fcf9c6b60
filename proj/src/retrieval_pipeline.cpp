#include "mpr/retrieval_pipeline.hpp"

#include <algorithm>

namespace mpr {

using nlohmann::ordered_json;

ordered_json AnswerTrace::to_json() const {
    ordered_json j;
    j["question"] = question;
    j["image_ref"] = image_ref;
    j["k"] = k;
    j["neighbors"] = ordered_json::array();
    for (const auto& n : neighbors) {
        j["neighbors"].push_back({{"record_id", n.record_id}, {"similarity", n.similarity}, {"answer", n.answer}});
    }
    if (majority) {
        j["majority"] = {{"answer", majority->answer},
                         {"frequency", majority->frequency},
                         {"exemplar_id", majority->exemplar_id}};
    } else {
        j["majority"] = nullptr;
    }
    j["quantifier"] = quantifier ? ordered_json(*quantifier) : ordered_json(nullptr);
    j["retrieval_text"] = retrieval_text ? ordered_json(*retrieval_text) : ordered_json(nullptr);
    j["generated"] = generated;
    j["label"] = label;
    j["exact"] = exact;
    return j;
}

std::vector<Neighbor> exclude_self(std::vector<Neighbor> neighbors, const std::optional<std::string>& query_id,
                                   std::size_t k) {
    if (query_id) {
        std::erase_if(neighbors, [&](const Neighbor& n) { return n.record_id == *query_id; });
    }
    if (neighbors.size() > k) neighbors.resize(k);
    return neighbors;
}

std::vector<RetrievedVote> to_votes(const std::vector<TraceNeighbor>& neighbors) {
    std::vector<RetrievedVote> votes;
    votes.reserve(neighbors.size());
    for (const auto& n : neighbors) votes.push_back({{n.record_id, n.similarity}, n.answer});
    return votes;
}

RetrievalPipeline::RetrievalPipeline(const ModelGateway& gateway, const RetrievalIndex* index, PipelineConfig config)
    : gateway_(gateway), index_(index), config_(std::move(config)) {}

ImageSource RetrievalPipeline::image_of(const Query& query) const {
    if (query.image) return *query.image;
    return resolve_image(query.image_ref, config_.inline_image_files);
}

std::vector<TraceNeighbor> RetrievalPipeline::retrieve(const Query& query, std::size_t k) const {
    if (index_ == nullptr || index_->empty()) throw EmptyIndexError("retrieval requested without a nonempty index");
    const Embedding key = gateway_.encode_pair(query.question, image_of(query));
    // One spare neighbor covers the slot self-exclusion may free up.
    const std::size_t want = query.id ? k + 1 : k;
    const auto kept = exclude_self(top_k(*index_, key, want), query.id, k);
    std::vector<TraceNeighbor> out;
    out.reserve(kept.size());
    for (const auto& n : kept) out.push_back({n.record_id, n.similarity, index_->find(n.record_id)->answer});
    return out;
}

AnswerTrace RetrievalPipeline::answer(const Query& query, std::size_t k) const {
    AnswerTrace trace;
    trace.question = query.question;
    trace.image_ref = query.image_ref;
    trace.k = k;

    if (k > 0) {
        trace.neighbors = retrieve(query, k);
        trace.majority = majority_answer(to_votes(trace.neighbors));
        trace.quantifier = select_quantifier(trace.majority->frequency, trace.neighbors.size(), config_.prompt.scale);
        trace.retrieval_text =
            render_retrieval_prompt(config_.prompt.retrieval_template, *trace.quantifier, trace.majority->answer);
    }

    auto prompt = assemble_prompt(gateway_.encode_image_tokens(image_of(query)), instruction_for(query.q_type),
                                  query.question, trace.retrieval_text, config_.prompt.order);
    trace.generated = gateway_.generate(prompt).text;
    const CanonAnswer canon = map_to_label(trace.generated, config_.labels);
    trace.label = canon.label;
    trace.exact = canon.exact;
    return trace;
}

}  // namespace mpr
