#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "mpr/error.hpp"
#include "mpr/types.hpp"

namespace mpr {

/// Dense float32 retrieval key. Always nonempty and finite.
class Embedding {
public:
    using Vector = Eigen::VectorXf;

    explicit Embedding(Vector values);
    explicit Embedding(std::span<const float> values);

    Eigen::Index dim() const noexcept { return values_.size(); }
    const Vector& values() const noexcept { return values_; }

    friend bool operator==(const Embedding& a, const Embedding& b) {
        return a.values_.size() == b.values_.size() && a.values_ == b.values_;
    }

private:
    Vector values_;
};

/// Cosine similarity of two dense vectors, accumulated in double precision
/// and clamped to [-1, 1]. Works on any Eigen vector expression.
template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    if (a.size() != b.size()) {
        throw DimensionError("cosine_similarity: dims " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    const auto ad = a.template cast<double>();
    const auto bd = b.template cast<double>();
    const double na = ad.norm();
    const double nb = bd.norm();
    if (na == 0.0 || nb == 0.0) throw ZeroNormError("cosine_similarity: zero-norm input");
    return std::clamp(ad.dot(bd) / (na * nb), -1.0, 1.0);
}

inline double cosine_similarity(const Embedding& a, const Embedding& b) {
    return cosine_similarity(a.values(), b.values());
}

struct RetrievalRecord {
    std::string id;
    Embedding key;
    std::string answer;
    std::string q_type;
    AnswerType a_type = AnswerType::open;

    friend bool operator==(const RetrievalRecord&, const RetrievalRecord&) = default;
};

struct Neighbor {
    std::string record_id;
    double similarity = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Immutable retrieval mapping set with exact cosine top-k search.
/// Safe for concurrent queries once constructed.
class RetrievalIndex {
public:
    Eigen::Index dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const std::vector<RetrievalRecord>& records() const noexcept { return records_; }

    /// Record with the given id, or nullptr.
    const RetrievalRecord* find(const std::string& id) const;

    friend bool operator==(const RetrievalIndex& a, const RetrievalIndex& b) {
        return a.dim_ == b.dim_ && a.records_ == b.records_;
    }

private:
    friend RetrievalIndex build_index(std::vector<RetrievalRecord> records, Eigen::Index dim);
    friend std::vector<Neighbor> top_k(const RetrievalIndex& index, const Embedding& query, std::size_t k);

    RetrievalIndex(Eigen::Index dim, std::vector<RetrievalRecord> records, std::vector<double> norms,
                   std::unordered_map<std::string, std::size_t> by_id)
        : dim_(dim), records_(std::move(records)), norms_(std::move(norms)), by_id_(std::move(by_id)) {}

    Eigen::Index dim_;
    std::vector<RetrievalRecord> records_;
    std::vector<double> norms_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Validates and freezes `records`. Answers are normalized on the way in.
RetrievalIndex build_index(std::vector<RetrievalRecord> records, Eigen::Index dim);

/// The min(k, m) most similar records, by similarity descending and then by
/// ascending record id.
std::vector<Neighbor> top_k(const RetrievalIndex& index, const Embedding& query, std::size_t k);

}  // namespace mpr
