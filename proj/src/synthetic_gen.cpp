#include "mpr/synthetic_gen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

namespace mpr {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kSlot = "{}";

std::size_t count_slots(std::string_view s) {
    std::size_t n = 0;
    for (auto pos = s.find(kSlot); pos != std::string_view::npos; pos = s.find(kSlot, pos + kSlot.size())) ++n;
    return n;
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::vector<std::string> words_of(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

// Draws from one mt19937_64 stream. Every helper consumes whole 64-bit
// outputs so the sequence is fixed by the standard engine definition alone.
class SynthRng {
public:
    explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

    std::size_t uniform(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t reject_below = (0 - bound) % bound;
        std::uint64_t x = engine_();
        while (x < reject_below) x = engine_();
        return static_cast<std::size_t>(x % bound);
    }

    bool bernoulli(double p) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return u < p;
    }

private:
    std::mt19937_64 engine_;
};

std::string fill_slot(const std::string& tmpl, std::string_view keyword) {
    std::string out = tmpl;
    out.replace(out.find(kSlot), kSlot.size(), keyword);
    return out;
}

std::vector<std::string> string_array(const json& obj, const char* name, std::size_t lineno) {
    auto it = obj.find(name);
    if (it == obj.end() || !it->is_array()) throw ParseError(lineno, std::string("field \"") + name + "\" must be an array");
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string()) throw ParseError(lineno, std::string("field \"") + name + "\" must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

}  // namespace

void TemplateBank::add_templates(const QaTypePair& pair, std::vector<std::string> templates) {
    auto& dst = templates_[pair];
    dst.insert(dst.end(), std::make_move_iterator(templates.begin()), std::make_move_iterator(templates.end()));
}

void TemplateBank::add_keywords(const std::string& q_type, std::vector<std::string> keywords) {
    auto [it, inserted] = keywords_.try_emplace(q_type);
    if (inserted) q_type_order_.push_back(q_type);
    it->second.insert(it->second.end(), std::make_move_iterator(keywords.begin()),
                      std::make_move_iterator(keywords.end()));
}

void TemplateBank::validate() const {
    for (const auto& [pair, list] : templates_) {
        const std::string name = pair.q_type + "/" + std::string(to_string(pair.a_type));
        if (list.empty()) throw ConfigError("no templates for " + name);
        for (const auto& t : list) {
            const std::size_t want = pair.a_type == AnswerType::closed ? 1 : 0;
            if (count_slots(t) != want) {
                throw ConfigError("template '" + t + "' for " + name + " must have " + std::to_string(want) + " slot(s)");
            }
        }
    }
    for (const auto& [q_type, list] : keywords_) {
        if (list.empty()) throw ConfigError("no keywords for " + q_type);
        std::set<std::string> seen;
        for (const auto& k : list) {
            const std::string norm = normalize(k);
            if (norm.empty()) throw ConfigError("empty keyword for " + q_type);
            if (!seen.insert(norm).second) throw ConfigError("duplicate keyword '" + k + "' for " + q_type);
        }
    }
}

const std::vector<std::string>* TemplateBank::templates(const QaTypePair& pair) const {
    auto it = templates_.find(pair);
    return it == templates_.end() ? nullptr : &it->second;
}

const std::vector<std::string>* TemplateBank::keywords(const std::string& q_type) const {
    auto it = keywords_.find(q_type);
    return it == keywords_.end() ? nullptr : &it->second;
}

TemplateBank default_template_bank() {
    TemplateBank bank;
    using enum AnswerType;
    bank.add_templates({"organ", open}, {"What part of the body is being imaged?", "What is the organ shown in this image?"});
    bank.add_templates({"organ", closed}, {"Does the picture contain {}?", "Is this a study of the {}?"});
    bank.add_templates({"organ_system", open}, {"What organ system is pictured?", "What system is this pathology in?"});
    bank.add_templates({"organ_system", closed}, {"Is this an image of the {}?", "Is the {} shown?"});
    bank.add_templates({"modality", open}, {"What kind of scan is this?", "How was this image taken?"});
    bank.add_templates({"modality", closed}, {"Is this a {}?", "Is the image a {}?"});
    bank.add_templates({"plane", open}, {"What image plane is this?", "How is the image oriented?"});
    bank.add_templates({"plane", closed}, {"Is this a {} plane?", "Is the image a {} section?"});

    bank.add_keywords("organ", {"Brain", "Heart", "Lungs", "Lung", "Liver", "Breasts", "Chest"});
    bank.add_keywords("organ_system", {"Cardiovascular System", "Respiratory System"});
    bank.add_keywords("modality", {"MRI", "T1", "T2", "CT", "X-ray", "Ultrasound", "Flair"});
    bank.add_keywords("plane", {"Axial", "Coronal", "Supratentorial", "Posteroanterior"});
    return bank;
}

TemplateBank read_template_bank(std::istream& in) {
    TemplateBank bank;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(lineno, std::string("invalid bank record: ") + e.what());
        }
        if (!obj.is_object() || !obj.contains("q_type") || !obj["q_type"].is_string()) {
            throw ParseError(lineno, "bank record needs a string \"q_type\"");
        }
        const std::string q_type = obj["q_type"].get<std::string>();
        if (obj.contains("templates")) {
            if (!obj.contains("a_type") || !obj["a_type"].is_string()) throw ParseError(lineno, "template record needs \"a_type\"");
            AnswerType a_type;
            try {
                a_type = parse_answer_type(obj["a_type"].get<std::string>());
            } catch (const ValidationError& e) {
                throw ParseError(lineno, e.what());
            }
            bank.add_templates({q_type, a_type}, string_array(obj, "templates", lineno));
        } else if (obj.contains("keywords")) {
            bank.add_keywords(q_type, string_array(obj, "keywords", lineno));
        } else {
            throw ParseError(lineno, "bank record needs \"templates\" or \"keywords\"");
        }
    }
    bank.validate();
    return bank;
}

TemplateBank load_template_bank(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    return read_template_bank(in);
}

void write_template_bank(const TemplateBank& bank, std::ostream& out) {
    for (const auto& [pair, list] : bank.all_templates()) {
        ordered_json rec;
        rec["q_type"] = pair.q_type;
        rec["a_type"] = to_string(pair.a_type);
        rec["templates"] = list;
        out << rec.dump() << '\n';
    }
    for (const auto& q_type : bank.q_types()) {
        ordered_json rec;
        rec["q_type"] = q_type;
        rec["keywords"] = *bank.keywords(q_type);
        out << rec.dump() << '\n';
    }
}

std::vector<std::string> match_keywords(std::string_view caption, const std::vector<std::string>& keywords) {
    const auto words = words_of(caption);
    struct Hit {
        std::size_t position;
        std::size_t order;
    };
    std::vector<Hit> hits;
    std::set<std::string> seen;
    for (std::size_t k = 0; k < keywords.size(); ++k) {
        const auto needle = words_of(keywords[k]);
        if (needle.empty() || needle.size() > words.size()) continue;
        if (!seen.insert(normalize(keywords[k])).second) continue;
        auto it = std::search(words.begin(), words.end(), needle.begin(), needle.end());
        if (it != words.end()) hits.push_back({static_cast<std::size_t>(it - words.begin()), k});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.position < b.position; });
    std::vector<std::string> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back(keywords[h.order]);
    return out;
}

std::vector<VqaExample> generate(const std::vector<CaptionExample>& captions, const TemplateBank& bank,
                                 const SynthConfig& cfg) {
    bank.validate();
    if (!(cfg.negative_ratio >= 0.0 && cfg.negative_ratio <= 1.0)) throw ConfigError("negative_ratio must lie in [0, 1]");
    if (cfg.max_pairs_per_caption && *cfg.max_pairs_per_caption == 0) throw ConfigError("max_pairs_per_caption must be positive");

    SynthRng rng(cfg.seed);
    std::vector<VqaExample> out;
    for (const auto& cap : captions) {
        std::vector<VqaExample> emitted;
        for (const auto& q_type : bank.q_types()) {
            const auto& keywords = *bank.keywords(q_type);
            const auto matches = match_keywords(cap.caption, keywords);
            if (matches.empty()) continue;

            const auto* open_t = bank.templates({q_type, AnswerType::open});
            const auto* closed_t = bank.templates({q_type, AnswerType::closed});
            if (open_t == nullptr) throw ConfigError("q_type '" + q_type + "' matched but has no open templates");
            if (closed_t == nullptr) throw ConfigError("q_type '" + q_type + "' matched but has no closed templates");

            std::set<std::string> matched_norm;
            for (const auto& m : matches) matched_norm.insert(normalize(m));
            std::vector<const std::string*> distractors;
            for (const auto& k : keywords) {
                if (!matched_norm.count(normalize(k))) distractors.push_back(&k);
            }

            std::size_t n_open = 0;
            std::size_t n_closed = 0;
            for (const auto& kw : matches) {
                const std::string& open_q = (*open_t)[rng.uniform(open_t->size())];
                emitted.push_back({cap.id + ":" + q_type + ":open:" + std::to_string(n_open++), cap.image_ref, open_q,
                                   normalize(kw), q_type, AnswerType::open});

                const std::string& closed_q = (*closed_t)[rng.uniform(closed_t->size())];
                const bool negative = rng.bernoulli(cfg.negative_ratio);
                VqaExample closed{cap.id + ":" + q_type + ":closed:" + std::to_string(n_closed++), cap.image_ref, "",
                                  "yes", q_type, AnswerType::closed};
                // A caption mentioning every keyword has no distractor; it stays a "yes" question.
                if (negative && !distractors.empty()) {
                    closed.question = fill_slot(closed_q, *distractors[rng.uniform(distractors.size())]);
                    closed.answer = "no";
                } else {
                    closed.question = fill_slot(closed_q, kw);
                }
                emitted.push_back(std::move(closed));
            }
        }
        if (cfg.max_pairs_per_caption && emitted.size() > *cfg.max_pairs_per_caption) {
            emitted.resize(*cfg.max_pairs_per_caption);
        }
        out.insert(out.end(), std::make_move_iterator(emitted.begin()), std::make_move_iterator(emitted.end()));
    }
    return out;
}

}  // namespace mpr
