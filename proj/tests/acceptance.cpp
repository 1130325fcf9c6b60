// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria. argv[1] is the path of the `mpr` executable.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mpr/eval_harness.hpp"
#include "mpr/synthetic_gen.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mpr;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Records the first mismatch; later ones only bump the count.
struct Check {
    Outcome out;
    std::size_t failures = 0;

    void operator()(bool ok, const std::string& what) {
        if (ok) return;
        if (failures++ == 0) out.detail = what;
        out.pass = false;
    }
    Outcome done(std::string summary) {
        if (out.pass) {
            out.detail = std::move(summary);
        } else {
            out.detail += " (" + std::to_string(failures) + " mismatches)";
        }
        return out;
    }
};

Eigen::VectorXf random_vector(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<float> g;
    Eigen::VectorXf v(d);
    for (auto& x : v) x = g(rng);
    return v;
}

std::vector<float> as_std(const Eigen::VectorXf& v) { return {v.data(), v.data() + v.size()}; }

// ---------------------------------------------------------------------------

Outcome knn_exactness() {
    Check check;
    std::mt19937_64 rng(2024);
    constexpr Eigen::Index d = 32;
    std::vector<RetrievalRecord> records;
    std::vector<std::pair<std::string, std::vector<float>>> raw;
    for (int i = 0; i < 200; ++i) {
        const auto v = random_vector(rng, d);
        const std::string id = "rec" + std::to_string(i);
        records.push_back({id, Embedding(v), "a" + std::to_string(i % 9), "organ", AnswerType::open});
        raw.emplace_back(id, as_std(v));
    }
    const auto start = std::chrono::steady_clock::now();
    const auto index = build_index(records, d);
    std::size_t compared = 0;
    for (int q = 0; q < 50; ++q) {
        const auto query = random_vector(rng, d);
        for (std::size_t k : {1u, 5u, 15u}) {
            const auto got = top_k(index, Embedding(query), k);
            const auto want = oracle::top_k(raw, as_std(query), k);
            check(got.size() == want.size(), "size mismatch at query " + std::to_string(q));
            for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
                check(got[i].record_id == want[i].id,
                      "query " + std::to_string(q) + " k=" + std::to_string(k) + " rank " + std::to_string(i));
            }
            ++compared;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    check(secs < 5.0, "took " + std::to_string(secs) + " s");
    std::ostringstream s;
    s << compared << " rankings identical, " << std::fixed << secs << " s";
    return check.done(s.str());
}

Outcome quantifier_conformance() {
    Check check;
    const auto scale = QuantifierScale::standard();
    std::size_t cells = 0;
    for (std::size_t k = 1; k <= 50; ++k) {
        std::size_t prev = 0;
        for (std::size_t f = 1; f <= k; ++f) {
            const auto got = quantifier_index(f, k, 6);
            const auto want = oracle::quantifier(f, k, 6);
            check(got == want, std::to_string(f) + "/" + std::to_string(k));
            check(select_quantifier(f, k, scale) == scale[want], "word for " + std::to_string(f) + "/" + std::to_string(k));
            check(got >= prev, "not monotone at " + std::to_string(f) + "/" + std::to_string(k));
            prev = got;
            ++cells;
        }
        check(select_quantifier(k, k, scale) == "certainly", "ratio 1 at k=" + std::to_string(k));
    }
    return check.done(std::to_string(cells) + " (f, k) cells match, monotone, ratio 1 -> certainly");
}

Outcome majority_conformance() {
    Check check;
    std::mt19937_64 rng(77);
    for (int t = 0; t < 1000; ++t) {
        const auto k = std::uniform_int_distribution<int>(1, 25)(rng);
        const auto distinct = std::uniform_int_distribution<int>(1, 10)(rng);
        std::vector<RetrievedVote> votes;
        std::vector<oracle::Vote> ov;
        for (int i = 0; i < k; ++i) {
            const std::string answer = "ans" + std::to_string(std::uniform_int_distribution<int>(0, distinct - 1)(rng));
            // Quantized similarities make ties common.
            const double sim = std::uniform_int_distribution<int>(-8, 8)(rng) / 8.0;
            const std::string id = "v" + std::to_string(std::uniform_int_distribution<int>(0, 999)(rng)) + "_" +
                                   std::to_string(i);
            votes.push_back({{id, sim}, answer});
            ov.push_back({id, sim, answer});
        }
        const auto want = oracle::majority(ov);
        const auto got = majority_answer(votes);
        const std::string tag = "instance " + std::to_string(t);
        check(got.answer == want.answer && got.frequency == want.frequency && got.exemplar_id == want.exemplar, tag);
        for (int p = 0; p < 3; ++p) {
            std::shuffle(votes.begin(), votes.end(), rng);
            check(majority_answer(votes) == got, tag + " permutation");
        }
    }
    return check.done("1000 multisets match, 3 permutations each");
}

Outcome pipeline_knn_equivalence() {
    Check check;
    testutil::TempDir dir;
    const auto captions = load_captions(testutil::data_path("captions60.jsonl"));
    const auto examples = generate(captions, default_template_bank(), {42});
    std::set<std::string> sources;
    for (const auto& e : examples) sources.insert(e.id.substr(0, e.id.find(':')));
    check(examples.size() >= 200, "only " + std::to_string(examples.size()) + " synthetic examples");
    check(sources.size() >= 50, "only " + std::to_string(sources.size()) + " source captions");
    const auto path = dir / "synthetic.jsonl";
    save_vqa(examples, path);

    EvalConfig cfg;
    cfg.test_set = path;
    cfg.retrieval_set = path;
    cfg.k = 1;
    cfg.echo_threshold = 0;
    cfg.seed = 42;
    const auto in_context = run_eval(cfg);

    MockConfig mc;
    mc.echo_threshold = 0;
    const MockGateway mock(mc);
    const auto index = ingest(load_vqa(path, {std::nullopt}), mock);
    const auto knn = knn_baseline(index, load_vqa(path, {std::nullopt}), 1, mock);

    cfg.mode = EvalMode::zero_shot;
    const auto zero_shot = run_eval(cfg);

    check(in_context.complete && knn.complete && zero_shot.complete, "incomplete report");
    check(in_context.n_total == knn.n_total, "different example counts");
    check(in_context.correct_open + in_context.correct_closed == knn.correct_open + knn.correct_closed,
          "in-context " + std::to_string(in_context.acc_overall()) + " != knn " + std::to_string(knn.acc_overall()));
    check(in_context.acc_overall() >= zero_shot.acc_overall(),
          "in-context " + std::to_string(in_context.acc_overall()) + " < zero-shot " +
              std::to_string(zero_shot.acc_overall()));
    std::ostringstream s;
    s << examples.size() << " examples from " << sources.size() << " captions; in-context "
      << in_context.acc_overall() << " == knn " << knn.acc_overall() << " >= zero-shot " << zero_shot.acc_overall();
    return check.done(s.str());
}

Outcome generator_soundness() {
    Check check;
    const auto captions = load_captions(testutil::data_path("captions20.jsonl"));
    const auto bank = default_template_bank();
    const auto examples = generate(captions, bank, {42});
    std::map<std::string, std::string> caption_of;
    for (const auto& c : captions) caption_of[c.id] = c.caption;

    std::size_t open = 0, yes = 0, no = 0;
    for (const auto& e : examples) {
        const std::string source = e.id.substr(0, e.id.find(':'));
        const auto* keywords = bank.keywords(e.q_type);
        check(keywords != nullptr, e.id + ": unknown q_type");
        if (keywords == nullptr) continue;
        if (e.a_type == AnswerType::open) {
            ++open;
            bool found = false;
            for (const auto& kw : *keywords) found = found || normalize(kw) == e.answer;
            check(found, e.id + ": open answer '" + e.answer + "' not a keyword");
            continue;
        }
        check(e.answer == "yes" || e.answer == "no", e.id + ": closed answer '" + e.answer + "'");
        // Recover the slot keyword by re-rendering every closed template.
        std::optional<std::string> slot;
        for (const auto& tmpl : *bank.templates({e.q_type, AnswerType::closed})) {
            const auto at = tmpl.find("{}");
            for (const auto& kw : *keywords) {
                if (normalize(tmpl.substr(0, at) + kw + tmpl.substr(at + 2)) == normalize(e.question)) slot = kw;
            }
        }
        check(slot.has_value(), e.id + ": slot keyword not recoverable from '" + e.question + "'");
        if (!slot) continue;
        const bool present = oracle::contains_word(caption_of[source], *slot);
        if (e.answer == "yes") {
            ++yes;
            check(present, e.id + ": yes-slot '" + *slot + "' absent from caption");
        } else {
            ++no;
            check(!present, e.id + ": no-slot '" + *slot + "' present in caption");
        }
    }
    std::ostringstream a, b;
    write_vqa(examples, a);
    write_vqa(generate(captions, bank, {42}), b);
    check(a.str() == b.str(), "seed 42 runs differ");
    check(!examples.empty() && open > 0 && yes > 0 && no > 0, "degenerate output");
    std::ostringstream s;
    s << examples.size() << " pairs (" << open << " open, " << yes << " yes, " << no << " no), seed 42 reproducible";
    return check.done(s.str());
}

Outcome canonicalization() {
    Check check;
    std::ifstream in(testutil::data_path("canon30.jsonl"));
    std::string line;
    std::size_t cases = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        LabelSet labels;
        for (const auto& l : j["labels"]) labels.insert(l.get<std::string>());
        const auto generated = j["generated"].get<std::string>();
        const auto expected = j["expected"].get<std::string>();
        const auto got = map_to_label(generated, labels);
        check(got.label == expected, "'" + generated + "' -> '" + got.label + "', want '" + expected + "'");
        check(oracle::best_label(normalize(generated), labels.labels()) == expected,
              "fixture disagrees with the DP oracle for '" + generated + "'");
        ++cases;
    }
    check(cases == 30, "fixture has " + std::to_string(cases) + " cases");

    std::mt19937_64 rng(5);
    auto word = [&](std::size_t len) {
        std::string s;
        for (std::size_t i = 0; i < len; ++i) s += static_cast<char>('a' + std::uniform_int_distribution<int>(0, 5)(rng));
        return s;
    };
    for (int t = 0; t < 100; ++t) {
        const std::string target = word(std::uniform_int_distribution<std::size_t>(1, 6)(rng));
        LabelSet labels;
        // Superstrings of the target share all of it; exact must still win.
        labels.insert(word(2) + target + word(3));
        labels.insert(target + word(4));
        for (int i = 0; i < 4; ++i) labels.insert(word(std::uniform_int_distribution<std::size_t>(1, 8)(rng)));
        labels.insert(target);
        std::string generated = target;
        for (auto& c : generated)
            if (std::uniform_int_distribution<int>(0, 1)(rng)) c = static_cast<char>(std::toupper(c));
        if (t % 3 == 0) generated = "  " + generated + ". ";
        const auto got = map_to_label(generated, labels);
        check(got.exact && got.label == target, "exact '" + target + "' lost to '" + got.label + "'");
    }
    return check.done(std::to_string(cases) + " fixture cases agree; exact match wins 100/100");
}

Outcome index_round_trip() {
    Check check;
    testutil::TempDir dir;
    std::mt19937_64 rng(9);
    for (std::size_t n : {0u, 1u, 1000u}) {
        std::vector<RetrievalRecord> records;
        for (std::size_t i = 0; i < n; ++i) {
            records.push_back({"id-" + std::to_string(i), Embedding(random_vector(rng, 24)),
                               i % 2 ? "yes" : "left lung", i % 3 ? "organ" : "plane",
                               i % 2 ? AnswerType::closed : AnswerType::open});
        }
        const auto index = build_index(records, 24);
        const auto first = dir / ("a" + std::to_string(n) + ".mpr");
        const auto second = dir / ("b" + std::to_string(n) + ".mpr");
        save_index(index, first);
        const auto loaded = load_index(first);
        save_index(loaded, second);
        check(read_file(first) == read_file(second), "size " + std::to_string(n) + ": bytes differ");
        check(loaded == index, "size " + std::to_string(n) + ": content differs");
    }
    const std::string bytes = read_file(dir / "a1000.mpr");
    auto rejects = [&](std::string corrupt, const std::string& what) {
        try {
            (void)deserialize_index(corrupt);
            check(false, what + " accepted");
        } catch (const FormatError&) {
        }
    };
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    rejects(bad_magic, "bad magic");
    rejects(bytes.substr(0, bytes.size() - 1), "truncated by one byte");
    rejects(bytes.substr(0, bytes.size() / 2), "truncated to half");
    rejects(bytes.substr(0, 3), "truncated header");
    return check.done("sizes 0, 1, 1000 byte-identical; corrupt magic and truncation rejected");
}

Outcome prompt_variants() {
    Check check;
    const auto data = load_vqa(testutil::data_path("slake_style10.jsonl"));
    std::size_t runs = 0;
    for (const char* order : {"IQR", "QRI", "IRQ"}) {
        for (const auto& tmpl : {RetrievalPromptTemplate::standard(), RetrievalPromptTemplate::answer_first()}) {
            PromptConfig pc;
            pc.order = PromptOrder(order);
            pc.retrieval_template = tmpl;
            MockConfig mc;
            mc.prompt = pc;
            mc.echo_threshold = 0;
            const MockGateway mock(mc);
            const auto index = ingest(data, mock);
            const RetrievalPipeline pipe(mock, &index, {pc, union_label_set(data, &index)});
            const std::string tag = std::string(order) + " / " + tmpl.pattern();
            try {
                for (const auto& e : data) {
                    const auto trace = pipe.answer({e.question, e.image_ref, e.q_type, e.id}, 3);
                    const auto parsed = parse_retrieval_prompt(tmpl, pc.scale, trace.retrieval_text.value());
                    check(parsed && parsed->answer == trace.majority->answer, tag + ": retrieval text does not parse");
                    check(trace.generated == trace.majority->answer, tag + ": mock did not echo");
                    const auto prompt = assemble_prompt(mock.encode_image_tokens(ImageSource::reference(e.image_ref)),
                                                        instruction_for(e.q_type), e.question, trace.retrieval_text,
                                                        pc.order);
                    check(prompt.present_segments().size() == 3 && prompt.order.code() == order,
                          tag + ": segment order");
                }
            } catch (const std::exception& ex) {
                check(false, tag + ": " + ex.what());
            }
            ++runs;
        }
    }
    const PromptConfig def;
    check(def.order.code() == "IQR", "default order " + def.order.code());
    check(def.retrieval_template == RetrievalPromptTemplate::standard(), "default template " + def.retrieval_template.pattern());
    check(def.scale == QuantifierScale::standard(), "default scale");
    check(def.retrieval_template.pattern() == "I believe the answer is {quantifier} {answer}", "default wording");
    return check.done(std::to_string(runs) + " order/template variants round-trip; default is IQR + standard template");
}

Outcome eval_determinism(const std::string& mpr) {
    Check check;
    if (mpr.empty()) {
        check(false, "no mpr executable given");
        return check.done("");
    }
    testutil::TempDir dir;
    const auto data = dir / "synthetic.jsonl";
    save_vqa(generate(load_captions(testutil::data_path("captions60.jsonl")), default_template_bank(), {7}), data);
    auto run = [&](const std::string& tag) {
        const auto records = dir / (tag + ".jsonl");
        const auto table = dir / (tag + ".txt");
        const std::string cmd = "\"" + mpr + "\" eval --test \"" + data.string() + "\" --retrieval \"" + data.string() +
                                "\" --sweep 0,1,5 --seed 7 --verbose --threads 4 --out \"" + records.string() +
                                "\" > \"" + table.string() + "\"";
        check(std::system(cmd.c_str()) == 0, "mpr eval failed: " + cmd);
        return read_file(records) + "\n--\n" + read_file(table);
    };
    const auto first = run("one");
    const auto second = run("two");
    check(!first.empty() && first == second, "reports differ between runs");
    return check.done("two seeded runs produced " + std::to_string(first.size()) + " identical bytes");
}

}  // namespace

int main(int argc, char** argv) {
    const std::string mpr = argc > 1 ? argv[1] : "";
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"knn exactness", knn_exactness},
        {"quantifier selection", quantifier_conformance},
        {"majority vote", majority_conformance},
        {"pipeline/knn equivalence", pipeline_knn_equivalence},
        {"synthetic generator soundness", generator_soundness},
        {"answer canonicalization", canonicalization},
        {"index file round-trip", index_round_trip},
        {"prompt variants", prompt_variants},
        {"eval determinism", [&] { return eval_determinism(mpr); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
