#include "mpr/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace mpr {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kMagic = "MPR1";

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    return out;
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

json parse_line(const std::string& line, std::size_t lineno) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(lineno, std::string("invalid record: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(lineno, "record is not an object");
    return obj;
}

std::string string_field(const json& obj, const char* name, std::size_t lineno, bool nonempty) {
    auto it = obj.find(name);
    if (it == obj.end()) throw ParseError(lineno, std::string("missing field \"") + name + "\"");
    if (!it->is_string()) throw ParseError(lineno, std::string("field \"") + name + "\" is not a string");
    std::string v = it->get<std::string>();
    if (nonempty && v.empty()) throw ParseError(lineno, std::string("field \"") + name + "\" is empty");
    return v;
}

// Calls fn(line, lineno) for every non-blank line.
template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (is_blank(line)) continue;
        fn(line, lineno);
    }
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_str(std::string& out, std::string_view s) {
    if (s.size() > UINT32_MAX) throw FormatError("string too long for index format");
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::string_view take(std::size_t n) {
        if (bytes_.size() - pos_ < n) throw FormatError("truncated index file");
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint32_t u32() {
        auto s = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
        return v;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::string str() { return std::string(take(u32())); }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string to_record_line(const VqaExample& e) {
    ordered_json obj;
    obj["id"] = e.id;
    obj["image_ref"] = e.image_ref;
    obj["question"] = e.question;
    obj["answer"] = e.answer;
    obj["q_type"] = e.q_type;
    obj["a_type"] = to_string(e.a_type);
    return obj.dump();
}

std::vector<VqaExample> read_vqa(std::istream& in, const VqaLoadOptions& options) {
    std::vector<VqaExample> out;
    std::unordered_set<std::string> ids;
    for_each_record(in, [&](const std::string& line, std::size_t lineno) {
        const json obj = parse_line(line, lineno);
        VqaExample e;
        e.id = string_field(obj, "id", lineno, true);
        e.image_ref = string_field(obj, "image_ref", lineno, false);
        e.question = string_field(obj, "question", lineno, true);
        e.answer = normalize(string_field(obj, "answer", lineno, true));
        if (e.answer.empty()) throw ParseError(lineno, "answer is empty after normalization");
        e.q_type = string_field(obj, "q_type", lineno, false);
        const std::string a_type = string_field(obj, "a_type", lineno, true);
        if (a_type == "open") {
            e.a_type = AnswerType::open;
        } else if (a_type == "closed") {
            e.a_type = AnswerType::closed;
        } else {
            throw ParseError(lineno, "a_type must be \"open\" or \"closed\"");
        }
        if (e.a_type == AnswerType::closed && options.closed_vocabulary) {
            const auto& vocab = *options.closed_vocabulary;
            if (std::find(vocab.begin(), vocab.end(), e.answer) == vocab.end()) {
                throw ParseError(lineno, "closed answer '" + e.answer + "' is outside the closed vocabulary");
            }
        }
        if (!ids.insert(e.id).second) throw DuplicateIdError("line " + std::to_string(lineno) + ": duplicate id '" + e.id + "'");
        out.push_back(std::move(e));
    });
    return out;
}

std::vector<VqaExample> load_vqa(const std::filesystem::path& path, const VqaLoadOptions& options) {
    auto in = open_in(path);
    return read_vqa(in, options);
}

void write_vqa(const std::vector<VqaExample>& examples, std::ostream& out) {
    for (const auto& e : examples) out << to_record_line(e) << '\n';
}

void save_vqa(const std::vector<VqaExample>& examples, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_vqa(examples, out);
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<CaptionExample> read_captions(std::istream& in) {
    std::vector<CaptionExample> out;
    std::unordered_set<std::string> ids;
    for_each_record(in, [&](const std::string& line, std::size_t lineno) {
        const json obj = parse_line(line, lineno);
        CaptionExample c;
        c.id = string_field(obj, "id", lineno, true);
        c.image_ref = string_field(obj, "image_ref", lineno, false);
        c.caption = string_field(obj, "caption", lineno, true);
        if (c.caption.find_first_of("\r\n") != std::string::npos) {
            throw ParseError(lineno, "caption spans multiple lines");
        }
        if (!ids.insert(c.id).second) throw DuplicateIdError("line " + std::to_string(lineno) + ": duplicate id '" + c.id + "'");
        out.push_back(std::move(c));
    });
    return out;
}

std::vector<CaptionExample> load_captions(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_captions(in);
}

LabelSet extract_label_set(const std::vector<VqaExample>& examples) {
    if (examples.empty()) throw EmptyDatasetError("cannot extract a label set from an empty dataset");
    LabelSet labels;
    for (const auto& e : examples) labels.insert(e.answer);
    return labels;
}

DatasetSplit make_split(std::vector<VqaExample> train, std::vector<VqaExample> validation,
                        std::vector<VqaExample> test) {
    std::unordered_set<std::string> ids;
    for (const auto* part : {&train, &validation, &test}) {
        for (const auto& e : *part) {
            if (!ids.insert(e.id).second) throw DuplicateIdError("id '" + e.id + "' appears in more than one split");
        }
    }
    return {std::move(train), std::move(validation), std::move(test)};
}

std::string serialize_index(const RetrievalIndex& index) {
    std::string out;
    out.append(kMagic);
    put_u32(out, kIndexVersion);
    put_u32(out, static_cast<std::uint32_t>(index.dim()));
    put_u32(out, static_cast<std::uint32_t>(index.size()));
    for (const auto& r : index.records()) {
        put_str(out, r.id);
        put_str(out, r.answer);
        put_str(out, r.q_type);
        out.push_back(static_cast<char>(r.a_type == AnswerType::open ? 0 : 1));
        for (float v : r.key.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

RetrievalIndex deserialize_index(std::string_view bytes) {
    Reader rd(bytes);
    if (rd.take(4) != kMagic) throw FormatError("bad index magic");
    const std::uint32_t version = rd.u32();
    if (version != kIndexVersion) throw FormatError("unsupported index version " + std::to_string(version));
    const std::uint32_t dim = rd.u32();
    const std::uint32_t m = rd.u32();
    if (dim == 0) throw FormatError("index dim is zero");
    std::vector<RetrievalRecord> records;
    for (std::uint32_t i = 0; i < m; ++i) {
        std::string id = rd.str();
        std::string answer = rd.str();
        std::string q_type = rd.str();
        const std::uint8_t a_type = rd.u8();
        if (a_type > 1) throw FormatError("bad a_type byte in record '" + id + "'");
        Eigen::VectorXf key(dim);
        for (std::uint32_t j = 0; j < dim; ++j) key[j] = std::bit_cast<float>(rd.u32());
        try {
            records.push_back({std::move(id), Embedding(std::move(key)), std::move(answer), std::move(q_type),
                               a_type == 0 ? AnswerType::open : AnswerType::closed});
        } catch (const ValidationError& e) {
            throw FormatError(std::string("corrupt record: ") + e.what());
        }
    }
    if (!rd.done()) throw FormatError("trailing bytes after index records");
    return build_index(std::move(records), dim);
}

std::string read_file(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    auto out = open_out(path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

void save_index(const RetrievalIndex& index, const std::filesystem::path& path) {
    write_file(path, serialize_index(index));
}

RetrievalIndex load_index(const std::filesystem::path& path) { return deserialize_index(read_file(path)); }

bool is_index_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    return in.read(magic, 4) && std::string_view(magic, 4) == kMagic;
}

}  // namespace mpr
