#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mpr/dataset_io.hpp"
#include "mpr/model_gateway.hpp"
#include "mpr/retrieval_pipeline.hpp"

namespace mpr {

enum class EvalMode { zero_shot, in_context, knn_baseline };
enum class Backend { mock, remote };

std::string_view to_string(EvalMode mode);
EvalMode parse_eval_mode(std::string_view s);  // "zero-shot" | "in-context" | "knn"
std::string_view to_string(Backend backend);
Backend parse_backend(std::string_view s);

struct QTypeStat {
    std::size_t count = 0;
    std::size_t correct = 0;
    double accuracy() const { return count == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(count); }
};

struct ExampleOutcome {
    std::string id;
    std::string q_type;
    AnswerType a_type = AnswerType::open;
    std::string gold;
    bool correct = false;
    AnswerTrace trace;
};

struct EvalReport {
    EvalMode mode = EvalMode::zero_shot;
    std::size_t k = 0;
    std::string backend = "mock";
    std::uint64_t seed = 0;
    std::size_t label_count = 0;

    std::size_t n_total = 0;
    std::size_t n_open = 0;
    std::size_t n_closed = 0;
    std::size_t correct_open = 0;
    std::size_t correct_closed = 0;
    std::map<std::string, QTypeStat> per_qtype;
    std::vector<ExampleOutcome> per_example;  // filled when examples are kept

    bool complete = true;
    std::string error;

    double acc_open() const { return ratio(correct_open, n_open); }
    double acc_closed() const { return ratio(correct_closed, n_closed); }
    double acc_overall() const { return ratio(correct_open + correct_closed, n_total); }

private:
    static double ratio(std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    }
};

struct EvalOptions {
    EvalMode mode = EvalMode::in_context;
    std::size_t k = 1;
    PromptConfig prompt;
    /// Canonicalization labels; when empty, the union of test and index answers.
    LabelSet labels;
    std::size_t threads = 1;
    bool keep_examples = false;
    bool inline_image_files = false;
};

/// Union of gold answers from the test split and the retrieval records.
LabelSet union_label_set(const std::vector<VqaExample>& test, const RetrievalIndex* index);

/// Evaluates an already-loaded test split. Gateway failures stop the run and
/// yield the report of the examples before the first failure, with
/// `complete == false`.
EvalReport evaluate(const std::vector<VqaExample>& test, const RetrievalIndex* index, const ModelGateway& gateway,
                    const EvalOptions& options);

/// Majority vote of the k nearest retrieval records, no generation.
EvalReport knn_baseline(const RetrievalIndex& index, const std::vector<VqaExample>& test, std::size_t k,
                        const ModelGateway& gateway);

/// Encodes every example with `encode_pair` and builds an index over them.
RetrievalIndex ingest(const std::vector<VqaExample>& dataset, const ModelGateway& gateway,
                      bool inline_image_files = false);

struct EvalConfig {
    std::filesystem::path test_set;
    std::optional<std::filesystem::path> retrieval_set;  // VQA records or a binary index
    std::size_t k = 1;
    EvalMode mode = EvalMode::in_context;
    Backend backend = Backend::mock;
    std::string endpoint = "http://127.0.0.1:8080";
    std::chrono::milliseconds timeout = std::chrono::seconds(30);
    PromptConfig prompt;
    std::uint64_t seed = 0;
    std::optional<std::size_t> echo_threshold;  // mock only
    std::size_t threads = 1;
    bool verbose = false;
};

std::unique_ptr<ModelGateway> make_gateway(Backend backend, const std::string& endpoint,
                                           std::chrono::milliseconds timeout, const PromptConfig& prompt,
                                           std::optional<std::size_t> echo_threshold);

EvalReport run_eval(const EvalConfig& cfg);

/// One report per k, sharing the loaded data, index and backend. k == 0
/// runs zero-shot; other ks use cfg.mode (knn stays knn, anything else is
/// in-context).
std::vector<std::pair<std::size_t, EvalReport>> k_sweep(const EvalConfig& cfg, const std::vector<std::size_t>& ks);

enum class ReportFormat { table, records };

/// Accuracies are percentages with one decimal in the table format.
/// q_type rows are sorted by count descending, then by name.
std::string report_render(const EvalReport& report, ReportFormat format);

}  // namespace mpr
