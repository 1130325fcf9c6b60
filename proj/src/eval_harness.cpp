#include "mpr/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iomanip>
#include <sstream>
#include <thread>

namespace mpr {

using nlohmann::ordered_json;

std::string_view to_string(EvalMode mode) {
    switch (mode) {
        case EvalMode::zero_shot: return "zero-shot";
        case EvalMode::in_context: return "in-context";
        case EvalMode::knn_baseline: return "knn";
    }
    return "?";
}

EvalMode parse_eval_mode(std::string_view s) {
    if (s == "zero-shot") return EvalMode::zero_shot;
    if (s == "in-context") return EvalMode::in_context;
    if (s == "knn") return EvalMode::knn_baseline;
    throw ConfigError("unknown mode '" + std::string(s) + "' (expected zero-shot, in-context or knn)");
}

std::string_view to_string(Backend backend) { return backend == Backend::mock ? "mock" : "remote"; }

Backend parse_backend(std::string_view s) {
    if (s == "mock") return Backend::mock;
    if (s == "remote") return Backend::remote;
    throw ConfigError("unknown backend '" + std::string(s) + "' (expected mock or remote)");
}

LabelSet union_label_set(const std::vector<VqaExample>& test, const RetrievalIndex* index) {
    LabelSet labels;
    for (const auto& e : test) labels.insert(e.answer);
    if (index != nullptr) {
        for (const auto& r : index->records()) labels.insert(r.answer);
    }
    return labels;
}

namespace {

ExampleOutcome evaluate_one(const VqaExample& example, const RetrievalPipeline& pipeline, EvalMode mode,
                            std::size_t k) {
    const Query query{example.question, example.image_ref, example.q_type, example.id, std::nullopt};
    ExampleOutcome out{example.id, example.q_type, example.a_type, example.answer, false, {}};
    if (mode == EvalMode::knn_baseline) {
        auto& t = out.trace;
        t.question = example.question;
        t.image_ref = example.image_ref;
        t.k = k;
        t.neighbors = pipeline.retrieve(query, k);
        t.majority = majority_answer(to_votes(t.neighbors));
        t.label = t.majority->answer;
        t.exact = pipeline.config().labels.contains(t.label);
    } else {
        out.trace = pipeline.answer(query, k);
    }
    out.correct = out.trace.label == normalize(example.answer);
    return out;
}

}  // namespace

EvalReport evaluate(const std::vector<VqaExample>& test, const RetrievalIndex* index, const ModelGateway& gateway,
                    const EvalOptions& options) {
    const bool retrieves = options.mode != EvalMode::zero_shot;
    if (retrieves && (index == nullptr || index->empty())) {
        throw ConfigError(std::string(to_string(options.mode)) + " mode needs a nonempty retrieval set");
    }
    if (retrieves && options.k == 0) throw ConfigError(std::string(to_string(options.mode)) + " mode needs k >= 1");
    const std::size_t k = retrieves ? options.k : 0;

    LabelSet labels = options.labels.empty() ? union_label_set(test, index) : options.labels;
    const RetrievalPipeline pipeline(gateway, index, {options.prompt, labels, options.inline_image_files});

    const std::size_t n = test.size();
    std::vector<std::optional<ExampleOutcome>> outcomes(n);
    std::vector<std::exception_ptr> failures(n);
    std::atomic<std::size_t> stop_at{n};

    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < n && i < stop_at.load(); i += stride) {
            try {
                outcomes[i] = evaluate_one(test[i], pipeline, options.mode, k);
            } catch (...) {
                failures[i] = std::current_exception();
                std::size_t cur = stop_at.load();
                while (i < cur && !stop_at.compare_exchange_weak(cur, i)) {
                }
                return;
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(n, 1));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
        for (auto& th : pool) th.join();
    }

    EvalReport report;
    report.mode = options.mode;
    report.k = k;
    report.label_count = labels.size();
    const std::size_t stop = stop_at.load();
    if (stop < n) {
        try {
            std::rethrow_exception(failures[stop]);
        } catch (const GatewayError& e) {
            report.complete = false;
            report.error = "example '" + test[stop].id + "': " + e.what();
        }
    }
    for (std::size_t i = 0; i < stop; ++i) {
        auto& o = *outcomes[i];
        ++report.n_total;
        if (o.a_type == AnswerType::open) {
            ++report.n_open;
            report.correct_open += o.correct ? 1 : 0;
        } else {
            ++report.n_closed;
            report.correct_closed += o.correct ? 1 : 0;
        }
        auto& stat = report.per_qtype[o.q_type];
        ++stat.count;
        stat.correct += o.correct ? 1 : 0;
        if (options.keep_examples) report.per_example.push_back(std::move(o));
    }
    return report;
}

EvalReport knn_baseline(const RetrievalIndex& index, const std::vector<VqaExample>& test, std::size_t k,
                        const ModelGateway& gateway) {
    EvalOptions options;
    options.mode = EvalMode::knn_baseline;
    options.k = k;
    return evaluate(test, &index, gateway, options);
}

RetrievalIndex ingest(const std::vector<VqaExample>& dataset, const ModelGateway& gateway, bool inline_image_files) {
    std::vector<RetrievalRecord> records;
    records.reserve(dataset.size());
    for (const auto& e : dataset) {
        records.push_back({e.id, gateway.encode_pair(e.question, resolve_image(e.image_ref, inline_image_files)),
                           e.answer, e.q_type, e.a_type});
    }
    const Eigen::Index dim =
        records.empty() ? static_cast<Eigen::Index>(gateway.descriptor().key_dim()) : records.front().key.dim();
    return build_index(std::move(records), dim);
}

std::unique_ptr<ModelGateway> make_gateway(Backend backend, const std::string& endpoint,
                                           std::chrono::milliseconds timeout, const PromptConfig& prompt,
                                           std::optional<std::size_t> echo_threshold) {
    if (backend == Backend::remote) return std::make_unique<RemoteGateway>(endpoint, timeout);
    MockConfig mc;
    mc.prompt = prompt;
    mc.echo_threshold = echo_threshold;
    return std::make_unique<MockGateway>(std::move(mc));
}

namespace {

struct EvalContext {
    std::vector<VqaExample> test;
    std::optional<RetrievalIndex> index;
    std::unique_ptr<ModelGateway> gateway;
    LabelSet labels;
};

EvalContext load_context(const EvalConfig& cfg) {
    EvalContext ctx;
    // Real datasets carry closed questions with non yes/no answers.
    VqaLoadOptions load_opts;
    load_opts.closed_vocabulary = std::nullopt;
    ctx.test = load_vqa(cfg.test_set, load_opts);
    ctx.gateway = make_gateway(cfg.backend, cfg.endpoint, cfg.timeout, cfg.prompt, cfg.echo_threshold);
    if (cfg.retrieval_set) {
        if (is_index_file(*cfg.retrieval_set)) {
            ctx.index = load_index(*cfg.retrieval_set);
        } else {
            ctx.index = ingest(load_vqa(*cfg.retrieval_set, load_opts), *ctx.gateway, cfg.backend == Backend::remote);
        }
    }
    ctx.labels = union_label_set(ctx.test, ctx.index ? &*ctx.index : nullptr);
    return ctx;
}

EvalReport run_with(const EvalConfig& cfg, const EvalContext& ctx, EvalMode mode, std::size_t k) {
    EvalOptions options;
    options.mode = mode;
    options.k = k;
    options.prompt = cfg.prompt;
    options.labels = ctx.labels;
    options.threads = cfg.threads;
    options.keep_examples = cfg.verbose;
    options.inline_image_files = cfg.backend == Backend::remote;
    EvalReport report = evaluate(ctx.test, ctx.index ? &*ctx.index : nullptr, *ctx.gateway, options);
    report.backend = std::string(to_string(cfg.backend));
    report.seed = cfg.seed;
    return report;
}

void check_config(EvalMode mode, std::size_t k, const EvalConfig& cfg) {
    if (mode == EvalMode::zero_shot) return;
    if (!cfg.retrieval_set) throw ConfigError(std::string(to_string(mode)) + " mode needs a retrieval set");
    if (k == 0) throw ConfigError(std::string(to_string(mode)) + " mode needs k >= 1");
}

}  // namespace

EvalReport run_eval(const EvalConfig& cfg) {
    check_config(cfg.mode, cfg.k, cfg);
    const EvalContext ctx = load_context(cfg);
    return run_with(cfg, ctx, cfg.mode, cfg.k);
}

std::vector<std::pair<std::size_t, EvalReport>> k_sweep(const EvalConfig& cfg, const std::vector<std::size_t>& ks) {
    if (ks.empty()) throw ConfigError("k_sweep needs at least one k");
    auto mode_for = [&](std::size_t k) {
        if (k == 0) return EvalMode::zero_shot;
        return cfg.mode == EvalMode::knn_baseline ? EvalMode::knn_baseline : EvalMode::in_context;
    };
    for (std::size_t k : ks) check_config(mode_for(k), k, cfg);
    const EvalContext ctx = load_context(cfg);
    std::vector<std::pair<std::size_t, EvalReport>> out;
    for (std::size_t k : ks) out.emplace_back(k, run_with(cfg, ctx, mode_for(k), k));
    return out;
}

namespace {

std::string percent(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(1) << v * 100.0;
    return ss.str();
}

std::vector<std::pair<std::string, QTypeStat>> sorted_qtypes(const EvalReport& report) {
    std::vector<std::pair<std::string, QTypeStat>> rows(report.per_qtype.begin(), report.per_qtype.end());
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.second.count > b.second.count; });
    return rows;
}

}  // namespace

std::string report_render(const EvalReport& report, ReportFormat format) {
    std::ostringstream out;
    if (format == ReportFormat::table) {
        out << "# mode: " << to_string(report.mode) << "  k: " << report.k << "  backend: " << report.backend
            << "  seed: " << report.seed << '\n';
        out << "# labels: union of test and retrieval answers (" << report.label_count << " labels)\n";
        out << "# overall: example-weighted over open and closed questions\n";
        if (!report.complete) out << "# INCOMPLETE: " << report.error << '\n';
        out << std::left << std::setw(24) << "split" << std::right << std::setw(8) << "count" << std::setw(10)
            << "accuracy" << '\n';
        auto row = [&](const std::string& name, std::size_t count, double acc) {
            out << std::left << std::setw(24) << name << std::right << std::setw(8) << count << std::setw(10)
                << percent(acc) << '\n';
        };
        row("open", report.n_open, report.acc_open());
        row("closed", report.n_closed, report.acc_closed());
        row("overall", report.n_total, report.acc_overall());
        out << '\n'
            << std::left << std::setw(24) << "q_type" << std::right << std::setw(8) << "count" << std::setw(10)
            << "accuracy" << '\n';
        for (const auto& [q_type, stat] : sorted_qtypes(report)) row(q_type, stat.count, stat.accuracy());
        return out.str();
    }

    ordered_json config;
    config["metric"] = "config";
    config["mode"] = to_string(report.mode);
    config["k"] = report.k;
    config["backend"] = report.backend;
    config["seed"] = report.seed;
    config["labels"] = "union(test,retrieval)";
    config["label_count"] = report.label_count;
    config["overall"] = "example-weighted";
    config["complete"] = report.complete;
    out << config.dump() << '\n';
    auto metric = [&](const char* name, const ordered_json& value) {
        ordered_json j;
        j["metric"] = name;
        j["value"] = value;
        out << j.dump() << '\n';
    };
    metric("n_total", report.n_total);
    metric("n_open", report.n_open);
    metric("n_closed", report.n_closed);
    metric("acc_open", report.acc_open());
    metric("acc_closed", report.acc_closed());
    metric("acc_overall", report.acc_overall());
    for (const auto& [q_type, stat] : sorted_qtypes(report)) {
        ordered_json j;
        j["metric"] = "qtype_accuracy";
        j["q_type"] = q_type;
        j["count"] = stat.count;
        j["value"] = stat.accuracy();
        out << j.dump() << '\n';
    }
    for (const auto& e : report.per_example) {
        ordered_json j;
        j["metric"] = "example";
        j["id"] = e.id;
        j["q_type"] = e.q_type;
        j["a_type"] = to_string(e.a_type);
        j["gold"] = e.gold;
        j["label"] = e.trace.label;
        j["exact"] = e.trace.exact;
        j["correct"] = e.correct;
        j["trace"] = e.trace.to_json();
        out << j.dump() << '\n';
    }
    if (!report.complete) {
        ordered_json j;
        j["metric"] = "error";
        j["message"] = report.error;
        out << j.dump() << '\n';
    }
    return out.str();
}

}  // namespace mpr
