#include "mpr/prompt_builder.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace mpr {

namespace {

constexpr std::string_view kQuantifierSlot = "{quantifier}";
constexpr std::string_view kAnswerSlot = "{answer}";

std::size_t occurrences(std::string_view s, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + needle.size())) ++n;
    return n;
}

char segment_code(Segment s) {
    switch (s) {
        case Segment::image: return 'I';
        case Segment::question: return 'Q';
        case Segment::retrieval: return 'R';
    }
    return '?';
}

}  // namespace

QuantifierScale::QuantifierScale(std::vector<std::string> quantifiers) : quantifiers_(std::move(quantifiers)) {
    if (quantifiers_.empty()) throw ConfigError("quantifier scale must not be empty");
    std::set<std::string> seen;
    for (const auto& q : quantifiers_) {
        if (q.empty()) throw ConfigError("quantifier must not be empty");
        if (!seen.insert(q).second) throw ConfigError("duplicate quantifier '" + q + "'");
    }
}

QuantifierScale QuantifierScale::standard() {
    return QuantifierScale({"very unlikely", "unlikely", "maybe", "likely", "very likely", "certainly"});
}

std::optional<std::size_t> QuantifierScale::index_of(std::string_view quantifier) const {
    auto it = std::find(quantifiers_.begin(), quantifiers_.end(), quantifier);
    if (it == quantifiers_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - quantifiers_.begin());
}

RetrievalPromptTemplate::RetrievalPromptTemplate(std::string pattern) : pattern_(std::move(pattern)) {
    if (occurrences(pattern_, kQuantifierSlot) != 1 || occurrences(pattern_, kAnswerSlot) != 1) {
        throw ConfigError("retrieval template '" + pattern_ +
                          "' must contain {quantifier} and {answer} exactly once each");
    }
}

RetrievalPromptTemplate RetrievalPromptTemplate::standard() {
    return RetrievalPromptTemplate("I believe the answer is {quantifier} {answer}");
}

RetrievalPromptTemplate RetrievalPromptTemplate::answer_first() {
    return RetrievalPromptTemplate("{answer} is {quantifier} the answer");
}

PromptOrder::PromptOrder(std::string_view code) {
    if (code.size() != 3) throw ConfigError("prompt order '" + std::string(code) + "' must be a permutation of IQR");
    std::set<char> seen;
    for (std::size_t i = 0; i < 3; ++i) {
        switch (code[i]) {
            case 'I': order_[i] = Segment::image; break;
            case 'Q': order_[i] = Segment::question; break;
            case 'R': order_[i] = Segment::retrieval; break;
            default: throw ConfigError("prompt order '" + std::string(code) + "' must be a permutation of IQR");
        }
        if (!seen.insert(code[i]).second) throw ConfigError("prompt order '" + std::string(code) + "' repeats a segment");
    }
}

std::string PromptOrder::code() const {
    std::string out;
    for (auto s : order_) out.push_back(segment_code(s));
    return out;
}

std::vector<Segment> AssembledPrompt::present_segments() const {
    std::vector<Segment> out;
    for (auto s : order.segments()) {
        if (s == Segment::retrieval && !retrieval_text) continue;
        out.push_back(s);
    }
    return out;
}

nlohmann::ordered_json PromptConfig::to_json() const {
    nlohmann::ordered_json j;
    j["order"] = order.code();
    j["template"] = retrieval_template.pattern();
    j["quantifiers"] = scale.quantifiers();
    return j;
}

PromptConfig PromptConfig::from_json(const nlohmann::json& j) {
    PromptConfig cfg;
    if (!j.is_object()) throw ConfigError("prompt configuration must be an object");
    try {
        if (j.contains("order")) cfg.order = PromptOrder(j.at("order").get<std::string>());
        if (j.contains("template")) cfg.retrieval_template = RetrievalPromptTemplate(j.at("template").get<std::string>());
        if (j.contains("quantifiers")) cfg.scale = QuantifierScale(j.at("quantifiers").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad prompt configuration: ") + e.what());
    }
    return cfg;
}

MajorityResult majority_answer(const std::vector<RetrievedVote>& votes) {
    if (votes.empty()) throw EmptyRetrievalError("majority_answer needs at least one retrieved vote");
    struct Tally {
        std::size_t count = 0;
        const Neighbor* best = nullptr;
    };
    auto more_similar = [](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.record_id < b.record_id;
    };
    std::map<std::string, Tally> tallies;
    for (const auto& v : votes) {
        auto& t = tallies[v.answer];
        ++t.count;
        if (t.best == nullptr || more_similar(v.neighbor, *t.best)) t.best = &v.neighbor;
    }
    const std::pair<const std::string, Tally>* winner = nullptr;
    for (const auto& entry : tallies) {
        if (winner == nullptr || entry.second.count > winner->second.count ||
            (entry.second.count == winner->second.count && more_similar(*entry.second.best, *winner->second.best))) {
            winner = &entry;
        }
    }
    return {winner->first, winner->second.count, winner->second.best->record_id};
}

std::size_t quantifier_index(std::size_t frequency, std::size_t k, std::size_t scale_size) {
    if (k == 0) throw DomainError("select_quantifier: k must be positive");
    if (frequency == 0 || frequency > k) {
        throw DomainError("select_quantifier: frequency " + std::to_string(frequency) + " outside [1, " +
                          std::to_string(k) + "]");
    }
    if (scale_size == 0) throw DomainError("select_quantifier: empty scale");
    // (i-1)/M <= f/k < i/M  <=>  i-1 == floor(f*M/k); f == k lands on M and is clamped.
    return std::min(frequency * scale_size / k, scale_size - 1);
}

const std::string& select_quantifier(std::size_t frequency, std::size_t k, const QuantifierScale& scale) {
    return scale[quantifier_index(frequency, k, scale.size())];
}

std::string render_retrieval_prompt(const RetrievalPromptTemplate& tmpl, std::string_view quantifier,
                                    std::string_view answer) {
    std::string out = tmpl.pattern();
    // Substitute the later slot first so the earlier offset stays valid.
    const auto qpos = out.find(kQuantifierSlot);
    const auto apos = out.find(kAnswerSlot);
    if (qpos > apos) {
        out.replace(qpos, kQuantifierSlot.size(), quantifier);
        out.replace(apos, kAnswerSlot.size(), answer);
    } else {
        out.replace(apos, kAnswerSlot.size(), answer);
        out.replace(qpos, kQuantifierSlot.size(), quantifier);
    }
    return out;
}

std::optional<ParsedRetrieval> parse_retrieval_prompt(const RetrievalPromptTemplate& tmpl,
                                                      const QuantifierScale& scale, std::string_view text) {
    const std::string_view pattern = tmpl.pattern();
    const auto qpos = pattern.find(kQuantifierSlot);
    const auto apos = pattern.find(kAnswerSlot);
    const bool quantifier_first = qpos < apos;
    const auto first = std::min(qpos, apos);
    const auto first_len = quantifier_first ? kQuantifierSlot.size() : kAnswerSlot.size();
    const auto second = std::max(qpos, apos);
    const auto second_len = quantifier_first ? kAnswerSlot.size() : kQuantifierSlot.size();

    const std::string_view head = pattern.substr(0, first);
    const std::string_view mid = pattern.substr(first + first_len, second - first - first_len);
    const std::string_view tail = pattern.substr(second + second_len);

    if (text.size() < head.size() + tail.size() || !text.starts_with(head) || !text.ends_with(tail)) {
        return std::nullopt;
    }
    const std::string_view body = text.substr(head.size(), text.size() - head.size() - tail.size());

    std::vector<std::size_t> by_length(scale.size());
    for (std::size_t i = 0; i < by_length.size(); ++i) by_length[i] = i;
    std::stable_sort(by_length.begin(), by_length.end(),
                     [&](std::size_t a, std::size_t b) { return scale[a].size() > scale[b].size(); });

    for (std::size_t i : by_length) {
        const std::string& q = scale[i];
        const std::size_t fixed = q.size() + mid.size();
        if (body.size() <= fixed) continue;
        if (quantifier_first) {
            if (body.starts_with(q) && body.substr(q.size()).starts_with(mid)) {
                return ParsedRetrieval{i, std::string(body.substr(fixed))};
            }
        } else if (body.ends_with(q) && body.substr(0, body.size() - q.size()).ends_with(mid)) {
            return ParsedRetrieval{i, std::string(body.substr(0, body.size() - fixed))};
        }
    }
    return std::nullopt;
}

std::string instruction_for(const std::optional<std::string>& q_type) {
    if (!q_type || q_type->empty()) return "Answer the question:";
    return "Answer the " + *q_type + " question:";
}

AssembledPrompt assemble_prompt(Eigen::MatrixXf image_tokens, std::string instruction, std::string question,
                                std::optional<std::string> retrieval_text, PromptOrder order) {
    if (image_tokens.rows() < 1 || image_tokens.cols() < 1) throw ValidationError("image token matrix is empty");
    return {std::move(image_tokens), std::move(instruction), std::move(question), std::move(retrieval_text), order};
}

}  // namespace mpr
