#include "mpr/vector_index.hpp"

#include "mpr/answer_canon.hpp"

namespace mpr {

Embedding::Embedding(Vector values) : values_(std::move(values)) {
    if (values_.size() == 0) throw DimensionError("embedding must have dim > 0");
    if (!values_.allFinite()) throw ValidationError("embedding contains non-finite values");
}

Embedding::Embedding(std::span<const float> values)
    : Embedding(Vector(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())))) {}

const RetrievalRecord* RetrievalIndex::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &records_[it->second];
}

RetrievalIndex build_index(std::vector<RetrievalRecord> records, Eigen::Index dim) {
    if (dim <= 0) throw DimensionError("index dim must be positive");
    std::unordered_map<std::string, std::size_t> by_id;
    std::vector<double> norms;
    norms.reserve(records.size());
    for (auto& r : records) {
        if (r.key.dim() != dim) {
            throw DimensionError("record '" + r.id + "' has dim " + std::to_string(r.key.dim()) +
                                 ", index dim is " + std::to_string(dim));
        }
        if (!by_id.emplace(r.id, norms.size()).second) throw DuplicateIdError("duplicate record id '" + r.id + "'");
        r.answer = normalize(r.answer);
        if (r.answer.empty()) throw ValidationError("record '" + r.id + "' has an empty answer");
        const double n = r.key.values().cast<double>().norm();
        if (n == 0.0) throw ZeroNormError("record '" + r.id + "' has a zero-norm key");
        norms.push_back(n);
    }
    return RetrievalIndex(dim, std::move(records), std::move(norms), std::move(by_id));
}

std::vector<Neighbor> top_k(const RetrievalIndex& index, const Embedding& query, std::size_t k) {
    if (index.empty()) throw EmptyIndexError("top_k on an empty index");
    if (query.dim() != index.dim()) {
        throw DimensionError("query dim " + std::to_string(query.dim()) + " vs index dim " +
                             std::to_string(index.dim()));
    }
    const Eigen::VectorXd q = query.values().cast<double>();
    const double qn = q.norm();
    if (qn == 0.0) throw ZeroNormError("top_k: zero-norm query");

    const auto& records = index.records_;
    std::vector<Neighbor> all;
    all.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const double dot = records[i].key.values().cast<double>().dot(q);
        all.push_back({records[i].id, std::clamp(dot / (index.norms_[i] * qn), -1.0, 1.0)});
    }
    const std::size_t take = std::min(k, all.size());
    auto before = [](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.record_id < b.record_id;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), before);
    all.resize(take);
    return all;
}

}  // namespace mpr
