// mpr: retrieval-augmented multimodal prompting engine, command-line front end.

#include <csignal>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpr/answer_service.hpp"
#include "mpr/dataset_io.hpp"
#include "mpr/eval_harness.hpp"
#include "mpr/gateway_server.hpp"
#include "mpr/retrieval_pipeline.hpp"
#include "mpr/synthetic_gen.hpp"

namespace {

struct BackendOptions {
    std::string backend = "mock";
    std::string endpoint = "http://127.0.0.1:8080";
    long timeout_ms = 30000;
    std::string prompt_config;
    std::string order;
    std::string retrieval_template;
    std::string echo_threshold;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--backend", backend, "Model backend")->check(CLI::IsMember({"mock", "remote"}));
        cmd.add_option("--endpoint", endpoint, "Sidecar base URL for --backend remote");
        cmd.add_option("--timeout-ms", timeout_ms, "Remote call deadline in milliseconds")->check(CLI::PositiveNumber);
        cmd.add_option("--prompt-config", prompt_config, "Prompt configuration record (JSON file)");
        cmd.add_option("--order", order, "Prompt order")->check(CLI::IsMember({"IQR", "QRI", "IRQ", "QIR", "RIQ", "RQI"}));
        cmd.add_option("--template", retrieval_template, "Retrieval template with {quantifier} and {answer}");
        cmd.add_option("--echo-threshold", echo_threshold,
                       "Mock only: quantifier (name or zero-based index) from which retrieved answers are echoed");
    }

    mpr::PromptConfig prompt() const {
        mpr::PromptConfig cfg;
        if (!prompt_config.empty()) {
            cfg = mpr::PromptConfig::from_json(nlohmann::json::parse(mpr::read_file(prompt_config)));
        }
        if (!order.empty()) cfg.order = mpr::PromptOrder(order);
        if (!retrieval_template.empty()) cfg.retrieval_template = mpr::RetrievalPromptTemplate(retrieval_template);
        return cfg;
    }

    std::optional<std::size_t> echo(const mpr::PromptConfig& cfg) const {
        if (echo_threshold.empty()) return std::nullopt;
        if (auto idx = cfg.scale.index_of(echo_threshold)) return idx;
        try {
            std::size_t used = 0;
            const unsigned long v = std::stoul(echo_threshold, &used);
            if (used == echo_threshold.size()) return v;
        } catch (const std::exception&) {
        }
        throw mpr::ConfigError("--echo-threshold '" + echo_threshold + "' is neither a quantifier nor an index");
    }

    mpr::Backend kind() const { return mpr::parse_backend(backend); }

    std::unique_ptr<mpr::ModelGateway> gateway() const {
        const auto cfg = prompt();
        return mpr::make_gateway(kind(), endpoint, std::chrono::milliseconds(timeout_ms), cfg, echo(cfg));
    }
};

std::vector<std::size_t> parse_ks(const std::string& list) {
    std::vector<std::size_t> ks;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        ks.push_back(std::stoul(item));
    }
    if (ks.empty()) throw mpr::ConfigError("--sweep needs at least one k");
    return ks;
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        mpr::write_file(path, text);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-augmented multimodal prompting engine"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate synthetic VQA pairs from image-caption records");
    std::string captions_path, bank_path, synth_out;
    std::uint64_t seed = 0;
    double negative_ratio = 0.5;
    std::size_t max_pairs = 0;
    synth->add_option("--captions", captions_path, "Caption records")->required();
    synth->add_option("--bank", bank_path, "Template bank (defaults to the built-in bank)");
    synth->add_option("--seed", seed, "PRNG seed");
    synth->add_option("--negative-ratio", negative_ratio, "Fraction of closed questions answered \"no\"")
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--max-pairs-per-caption", max_pairs, "Cap on QA pairs per caption (0 = unlimited)");
    synth->add_option("--out", synth_out, "Output VQA records")->required();

    // bank
    auto* bank_cmd = app.add_subcommand("bank", "Write the built-in template bank");
    std::string bank_out;
    bank_cmd->add_option("--out", bank_out, "Output path (stdout when omitted)");

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "Encode a VQA dataset into a retrieval index");
    std::string dataset_path, index_out;
    BackendOptions ingest_backend;
    ingest_cmd->add_option("--dataset", dataset_path, "VQA records")->required();
    ingest_cmd->add_option("--out", index_out, "Output index file")->required();
    ingest_backend.add_to(*ingest_cmd);

    // answer
    auto* answer_cmd = app.add_subcommand("answer", "Answer one question about one image");
    std::string index_path, question, image, q_type;
    std::size_t k = 1;
    bool zero_shot = false, verbose = false;
    BackendOptions answer_backend;
    answer_cmd->add_option("--index", index_path, "Retrieval index")->required();
    answer_cmd->add_option("--question", question, "Question text")->required();
    answer_cmd->add_option("--image", image, "Image path or reference")->required();
    answer_cmd->add_option("--k", k, "Neighbors to retrieve");
    answer_cmd->add_option("--q-type", q_type, "Question type for the instruction snippet");
    answer_cmd->add_flag("--zero-shot", zero_shot, "Skip retrieval");
    answer_cmd->add_flag("--verbose", verbose, "Pretty-print the trace");
    answer_backend.add_to(*answer_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a test split");
    mpr::EvalConfig eval_cfg;
    std::string test_path, retrieval_path, mode = "in-context", report_out, sweep;
    BackendOptions eval_backend;
    eval_cmd->add_option("--test", test_path, "Test VQA records")->required();
    eval_cmd->add_option("--retrieval", retrieval_path, "Retrieval set: VQA records or an index file");
    eval_cmd->add_option("--k", eval_cfg.k, "Neighbors to retrieve");
    eval_cmd->add_option("--mode", mode, "Evaluation mode")->check(CLI::IsMember({"zero-shot", "in-context", "knn"}));
    eval_cmd->add_option("--seed", eval_cfg.seed, "Seed recorded in the report");
    eval_cmd->add_option("--threads", eval_cfg.threads, "Worker threads")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--sweep", sweep, "Comma-separated ks; one report per k");
    eval_cmd->add_option("--out", report_out, "Write the report records here");
    eval_cmd->add_flag("--verbose", eval_cfg.verbose, "Include per-example records");
    eval_backend.add_to(*eval_cmd);

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Serve POST /v1/answer");
    int port = 8090;
    std::string host = "127.0.0.1";
    BackendOptions serve_backend;
    serve_cmd->add_option("--port", port, "Listen port")->required();
    serve_cmd->add_option("--host", host, "Listen address");
    serve_cmd->add_option("--index", index_path, "Retrieval index")->required();
    serve_backend.add_to(*serve_cmd);

    // mock-sidecar
    auto* sidecar_cmd = app.add_subcommand("mock-sidecar", "Serve the mock backend over the gateway wire protocol");
    int sidecar_port = 8080;
    BackendOptions sidecar_backend;
    sidecar_cmd->add_option("--port", sidecar_port, "Listen port");
    sidecar_cmd->add_option("--host", host, "Listen address");
    sidecar_backend.add_to(*sidecar_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const auto captions = mpr::load_captions(captions_path);
            const auto bank = bank_path.empty() ? mpr::default_template_bank() : mpr::load_template_bank(bank_path);
            mpr::SynthConfig cfg{seed, negative_ratio, std::nullopt};
            if (max_pairs > 0) cfg.max_pairs_per_caption = max_pairs;
            const auto examples = mpr::generate(captions, bank, cfg);
            mpr::save_vqa(examples, synth_out);
            nlohmann::ordered_json meta;
            meta["prng"] = mpr::kSynthPrngAlgorithm;
            meta["seed"] = seed;
            meta["negative_ratio"] = negative_ratio;
            meta["max_pairs_per_caption"] = cfg.max_pairs_per_caption ? nlohmann::ordered_json(max_pairs) : nullptr;
            meta["captions"] = captions.size();
            meta["examples"] = examples.size();
            mpr::write_file(synth_out + ".meta.json", meta.dump() + "\n");
            std::cerr << "wrote " << examples.size() << " examples to " << synth_out << '\n';
        } else if (*bank_cmd) {
            std::ostringstream ss;
            mpr::write_template_bank(mpr::default_template_bank(), ss);
            write_or_print(bank_out, ss.str());
        } else if (*ingest_cmd) {
            mpr::VqaLoadOptions opts;
            opts.closed_vocabulary = std::nullopt;
            const auto gateway = ingest_backend.gateway();
            const auto index = mpr::ingest(mpr::load_vqa(dataset_path, opts), *gateway,
                                           ingest_backend.kind() == mpr::Backend::remote);
            mpr::save_index(index, index_out);
            std::cerr << "indexed " << index.size() << " records (dim " << index.dim() << ") into " << index_out << '\n';
        } else if (*answer_cmd) {
            const auto index = mpr::load_index(index_path);
            const auto gateway = answer_backend.gateway();
            mpr::PipelineConfig pc{answer_backend.prompt(), mpr::union_label_set({}, &index),
                                   answer_backend.kind() == mpr::Backend::remote};
            const mpr::RetrievalPipeline pipeline(*gateway, &index, std::move(pc));
            mpr::Query q{question, image, q_type.empty() ? std::nullopt : std::optional(q_type), std::nullopt,
                         std::nullopt};
            const auto trace = pipeline.answer(q, zero_shot ? 0 : k);
            std::cout << (verbose ? trace.to_json().dump(2) : trace.to_json().dump()) << '\n';
        } else if (*eval_cmd) {
            eval_cfg.test_set = test_path;
            if (!retrieval_path.empty()) eval_cfg.retrieval_set = retrieval_path;
            eval_cfg.mode = mpr::parse_eval_mode(mode);
            eval_cfg.backend = eval_backend.kind();
            eval_cfg.endpoint = eval_backend.endpoint;
            eval_cfg.timeout = std::chrono::milliseconds(eval_backend.timeout_ms);
            eval_cfg.prompt = eval_backend.prompt();
            eval_cfg.echo_threshold = eval_backend.echo(eval_cfg.prompt);

            std::vector<std::pair<std::size_t, mpr::EvalReport>> reports;
            if (sweep.empty()) {
                if (eval_cfg.mode == mpr::EvalMode::zero_shot) eval_cfg.k = 0;
                reports.emplace_back(eval_cfg.k, mpr::run_eval(eval_cfg));
            } else {
                reports = mpr::k_sweep(eval_cfg, parse_ks(sweep));
            }
            std::string tables, records;
            bool complete = true;
            for (const auto& [rk, report] : reports) {
                tables += mpr::report_render(report, mpr::ReportFormat::table) + "\n";
                records += mpr::report_render(report, mpr::ReportFormat::records);
                complete = complete && report.complete;
            }
            std::cout << tables;
            if (!report_out.empty()) mpr::write_file(report_out, records);
            if (!complete) return 3;
        } else if (*serve_cmd) {
            const auto index = mpr::load_index(index_path);
            const auto gateway = serve_backend.gateway();
            mpr::PipelineConfig pc{serve_backend.prompt(), mpr::union_label_set({}, &index),
                                   serve_backend.kind() == mpr::Backend::remote};
            const mpr::RetrievalPipeline pipeline(*gateway, &index, std::move(pc));
            mpr::AnswerService service(pipeline);
            const int bound = service.bind(host, port);
            std::cerr << "serving /v1/answer on " << host << ":" << bound << '\n';
            service.listen();
        } else if (*sidecar_cmd) {
            const auto cfg = sidecar_backend.prompt();
            mpr::MockConfig mc;
            mc.prompt = cfg;
            mc.echo_threshold = sidecar_backend.echo(cfg);
            const mpr::MockGateway gateway(mc);
            mpr::GatewayServer server(gateway);
            const int bound = server.bind(host, sidecar_port);
            std::cerr << "mock sidecar on " << host << ":" << bound << '\n';
            server.listen();
        }
    } catch (const mpr::Error& e) {
        std::cerr << "mpr: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "mpr: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
