#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "mpr/vector_index.hpp"
#include "oracles.hpp"

namespace mpr {
namespace {

Embedding emb(std::initializer_list<float> v) { return Embedding(std::vector<float>(v)); }

RetrievalRecord rec(std::string id, Embedding key, std::string answer = "yes") {
    return {std::move(id), std::move(key), std::move(answer), "organ", AnswerType::closed};
}

std::vector<float> random_vec(std::mt19937& rng, std::size_t d) {
    std::normal_distribution<float> n(0.f, 1.f);
    std::vector<float> v(d);
    for (auto& x : v) x = n(rng);
    return v;
}

TEST(Embedding, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(Embedding(std::vector<float>{}), DimensionError);
    EXPECT_THROW(emb({1.f, std::numeric_limits<float>::quiet_NaN()}), ValidationError);
    EXPECT_THROW(emb({std::numeric_limits<float>::infinity()}), ValidationError);
}

TEST(BuildIndex, Examples) {
    auto empty = build_index({}, 4);
    EXPECT_EQ(empty.size(), 0u);
    EXPECT_EQ(empty.dim(), 4);

    auto idx = build_index({rec("a", emb({1, 0})), rec("b", emb({0, 1})), rec("c", emb({1, 1}))}, 2);
    EXPECT_EQ(idx.size(), 3u);
    EXPECT_EQ(idx.dim(), 2);
    EXPECT_EQ(idx.records()[2].id, "c");

    EXPECT_THROW(build_index({rec("a", emb({1, 0})), rec("b", emb({1, 0, 0}))}, 2), DimensionError);
}

TEST(BuildIndex, Errors) {
    EXPECT_THROW(build_index({rec("a", emb({1, 0})), rec("a", emb({0, 1}))}, 2), DuplicateIdError);
    EXPECT_THROW(build_index({rec("a", emb({0, 0}))}, 2), ZeroNormError);
    EXPECT_THROW(build_index({rec("a", emb({1, 0}), " . ")}, 2), ValidationError);
}

TEST(BuildIndex, NormalizesAnswers) {
    auto idx = build_index({rec("a", emb({1, 0}), " X-Ray. ")}, 2);
    EXPECT_EQ(idx.records()[0].answer, "x-ray");
    EXPECT_EQ(idx.find("a")->answer, "x-ray");
    EXPECT_EQ(idx.find("zz"), nullptr);
}

TEST(CosineSimilarity, Examples) {
    EXPECT_DOUBLE_EQ(cosine_similarity(emb({1, 0}), emb({1, 0})), 1.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(emb({1, 0}), emb({0, 1})), 0.0);
    // dot = 2 + 2 + 4 = 8, norms 3 and 3
    EXPECT_NEAR(cosine_similarity(emb({1, 2, 2}), emb({2, 1, 2})), 8.0 / 9.0, 1e-12);
}

TEST(CosineSimilarity, Errors) {
    EXPECT_THROW(cosine_similarity(emb({0, 0}), emb({1, 0})), ZeroNormError);
    EXPECT_THROW(cosine_similarity(emb({1, 0}), emb({1, 0, 0})), DimensionError);
}

TEST(CosineSimilarity, WorksOnEigenExpressions) {
    Eigen::Vector3d a(1, 2, 2);
    Eigen::Vector3f b(2, 1, 2);
    EXPECT_NEAR(cosine_similarity(a, b * 4.0f), 8.0 / 9.0, 1e-12);
}

TEST(CosineSimilarity, SymmetricAndScaleInvariant) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<float> scale(0.01f, 100.f);
    for (int t = 0; t < 500; ++t) {
        auto a = random_vec(rng, 16), b = random_vec(rng, 16);
        const float c = scale(rng);
        auto bc = b;
        for (auto& x : bc) x *= c;
        const double ab = cosine_similarity(Embedding(a), Embedding(b));
        EXPECT_NEAR(ab, cosine_similarity(Embedding(b), Embedding(a)), 1e-6);
        EXPECT_NEAR(ab, cosine_similarity(Embedding(a), Embedding(bc)), 1e-6);
        EXPECT_GE(ab, -1.0);
        EXPECT_LE(ab, 1.0);
    }
}

TEST(TopK, SelfMatchAndLargeK) {
    auto idx = build_index({rec("a", emb({1, 0})), rec("b", emb({0, 1})), rec("c", emb({1, 1}))}, 2);
    auto n = top_k(idx, emb({0, 1}), 1);
    ASSERT_EQ(n.size(), 1u);
    EXPECT_EQ(n[0].record_id, "b");
    EXPECT_DOUBLE_EQ(n[0].similarity, 1.0);
    EXPECT_EQ(top_k(idx, emb({0, 1}), 10).size(), 3u);
}

TEST(TopK, TiesBreakByAscendingId) {
    auto idx = build_index({rec("z", emb({1, 0})), rec("m", emb({2, 0})), rec("a", emb({0, 1}))}, 2);
    auto n = top_k(idx, emb({1, 0}), 3);
    ASSERT_EQ(n.size(), 3u);
    EXPECT_EQ(n[0].record_id, "m");
    EXPECT_EQ(n[1].record_id, "z");
    EXPECT_EQ(n[2].record_id, "a");
}

TEST(TopK, Errors) {
    auto empty = build_index({}, 2);
    EXPECT_THROW(top_k(empty, emb({1, 0}), 1), EmptyIndexError);
    auto idx = build_index({rec("a", emb({1, 0}))}, 2);
    EXPECT_THROW(top_k(idx, emb({1, 0, 0}), 1), DimensionError);
    EXPECT_THROW(top_k(idx, emb({0, 0}), 1), ZeroNormError);
}

TEST(TopK, MatchesBruteForceOracle) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<RetrievalRecord> records;
        std::vector<std::pair<std::string, std::vector<float>>> raw;
        for (int i = 0; i < 5; ++i) {
            auto v = random_vec(rng, 8);
            records.push_back(rec("r" + std::to_string(i), Embedding(v)));
            raw.emplace_back("r" + std::to_string(i), v);
        }
        auto idx = build_index(records, 8);
        auto q = random_vec(rng, 8);
        auto got = top_k(idx, Embedding(q), 2);
        auto want = oracle::top_k(raw, q, 2);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].record_id, want[i].id);
            EXPECT_NEAR(got[i].similarity, want[i].sim, 1e-9);
        }
    }
}

TEST(TopK, PrefixProperty) {
    std::mt19937 rng(5);
    std::vector<RetrievalRecord> records;
    for (int i = 0; i < 30; ++i) records.push_back(rec("r" + std::to_string(i), Embedding(random_vec(rng, 6))));
    // Duplicate keys force exact similarity ties.
    records.push_back(rec("dup1", records[0].key));
    records.push_back(rec("dup0", records[0].key));
    auto idx = build_index(records, 6);
    for (int t = 0; t < 20; ++t) {
        Embedding q(random_vec(rng, 6));
        for (std::size_t k = 1; k < idx.size(); ++k) {
            auto a = top_k(idx, q, k);
            auto b = top_k(idx, q, k + 1);
            ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
        }
    }
}

TEST(TopK, ConcurrentQueriesAgree) {
    std::mt19937 rng(9);
    std::vector<RetrievalRecord> records;
    for (int i = 0; i < 200; ++i) records.push_back(rec("r" + std::to_string(i), Embedding(random_vec(rng, 16))));
    const auto idx = build_index(records, 16);
    const Embedding q(random_vec(rng, 16));
    const auto expected = top_k(idx, q, 15);
    std::vector<std::thread> pool;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 4; ++t) {
        pool.emplace_back([&] {
            for (int i = 0; i < 50; ++i)
                if (top_k(idx, q, 15) != expected) ++mismatches;
        });
    }
    for (auto& th : pool) th.join();
    EXPECT_EQ(mismatches.load(), 0);
}

}  // namespace
}  // namespace mpr
