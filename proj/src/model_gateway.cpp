#include "mpr/model_gateway.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

#include <httplib.h>

#include "mpr/dataset_io.hpp"

namespace mpr {

using nlohmann::json;

namespace {

// Byte-fold accumulator; see MockGateway. `salt` rotates the bucket and
// weight so rows of an image token matrix differ from one another.
Eigen::VectorXd byte_fold(std::string_view bytes, Eigen::Index n, unsigned salt = 0) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < bytes.size(); ++j) {
        const unsigned b = static_cast<unsigned char>(bytes[j]);
        const auto bucket = static_cast<Eigen::Index>((31 * j + b + 17 * salt) % static_cast<std::size_t>(n));
        acc[bucket] += static_cast<double>(static_cast<int>((b + salt) % 7) - 3);
    }
    const double norm = acc.norm();
    if (norm == 0.0) {
        acc.setZero();
        acc[static_cast<Eigen::Index>(salt % static_cast<unsigned>(n))] = 1.0;
        return acc;
    }
    return acc / norm;
}

void require_image(const ImageSource& image) {
    if (image.data.empty()) throw ImageNotFound("empty image reference");
}

[[noreturn]] void malformed(const std::string& what) { throw GatewayError("malformed gateway message: " + what); }

std::size_t positive_field(const json& j, const char* name) {
    if (!j.contains(name) || !j[name].is_number_integer() || j[name].get<long long>() <= 0) {
        malformed(std::string("field \"") + name + "\" must be a positive integer");
    }
    return j[name].get<std::size_t>();
}

}  // namespace

ImageSource resolve_image(const std::string& ref_or_path, bool inline_files) {
    std::error_code ec;
    if (inline_files && std::filesystem::is_regular_file(ref_or_path, ec)) {
        return ImageSource::inline_base64(httplib::detail::base64_encode(read_file(ref_or_path)));
    }
    return ImageSource::reference(ref_or_path);
}

// ---------------------------------------------------------------------------
// Mock

MockGateway::MockGateway(MockConfig config) : config_(std::move(config)) {
    const auto& d = config_.descriptor;
    if (d.text_dim == 0 || d.image_dim == 0 || d.token_dim == 0 || d.token_count == 0) {
        throw ConfigError("mock descriptor dims must be positive");
    }
    if (config_.echo_threshold) {
        echo_threshold_ = *config_.echo_threshold;
    } else {
        echo_threshold_ = config_.prompt.scale.index_of("likely").value_or(0);
    }
}

Embedding MockGateway::encode_pair(std::string_view question, const ImageSource& image) const {
    if (question.empty()) throw ValidationError("encode_pair: question is empty");
    require_image(image);
    const auto image_dim = static_cast<Eigen::Index>(config_.descriptor.image_dim);
    const auto text_dim = static_cast<Eigen::Index>(config_.descriptor.text_dim);
    Eigen::VectorXd key(image_dim + text_dim);
    key << byte_fold(image.data, image_dim), byte_fold(question, text_dim);
    key *= 1.0 / std::numbers::sqrt2;
    return Embedding(key.cast<float>().eval());
}

// Row r of the token matrix is byte_fold(image, token_dim, salt = r).
Eigen::MatrixXf MockGateway::encode_image_tokens(const ImageSource& image) const {
    require_image(image);
    const auto rows = static_cast<Eigen::Index>(config_.descriptor.token_count);
    const auto cols = static_cast<Eigen::Index>(config_.descriptor.token_dim);
    Eigen::MatrixXf tokens(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        tokens.row(r) = byte_fold(image.data, cols, static_cast<unsigned>(r)).cast<float>().transpose();
    }
    return tokens;
}

GenerationResult MockGateway::generate(const AssembledPrompt& prompt) const {
    GenerationResult result{std::string(kMockNoAnswer), prompt.order.code()};
    if (!prompt.retrieval_text) return result;
    const auto parsed =
        parse_retrieval_prompt(config_.prompt.retrieval_template, config_.prompt.scale, *prompt.retrieval_text);
    if (!parsed) throw MockParseError("retrieval text '" + *prompt.retrieval_text + "' does not match the template");
    if (parsed->quantifier_index >= echo_threshold_) result.text = parsed->answer;
    return result;
}

// ---------------------------------------------------------------------------
// Wire codecs

namespace wire {

json descriptor_to_json(const EncoderDescriptor& d) {
    return {{"name", d.name},
            {"text_dim", d.text_dim},
            {"image_dim", d.image_dim},
            {"token_dim", d.token_dim},
            {"token_count", d.token_count}};
}

EncoderDescriptor descriptor_from_json(const json& j) {
    if (!j.is_object() || !j.contains("name") || !j["name"].is_string()) malformed("descriptor needs a name");
    return {j["name"].get<std::string>(), positive_field(j, "text_dim"), positive_field(j, "image_dim"),
            positive_field(j, "token_dim"), positive_field(j, "token_count")};
}

void put_image(json& body, const ImageSource& image) {
    const bool inlined = image.kind == ImageSource::Kind::inline_base64;
    body["image_b64"] = inlined ? json(image.data) : json(nullptr);
    body["image_ref"] = inlined ? json(nullptr) : json(image.data);
}

ImageSource image_from_json(const json& body) {
    if (body.contains("image_b64") && body["image_b64"].is_string()) {
        return ImageSource::inline_base64(body["image_b64"].get<std::string>());
    }
    if (body.contains("image_ref") && body["image_ref"].is_string()) {
        return ImageSource::reference(body["image_ref"].get<std::string>());
    }
    malformed("request needs \"image_b64\" or \"image_ref\"");
}

json matrix_to_json(const Eigen::MatrixXf& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(static_cast<double>(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXf matrix_from_json(const json& rows) {
    if (!rows.is_array() || rows.empty() || !rows[0].is_array()) malformed("matrix must be a nonempty array of rows");
    const auto n_rows = static_cast<Eigen::Index>(rows.size());
    const auto n_cols = static_cast<Eigen::Index>(rows[0].size());
    Eigen::MatrixXf m(n_rows, n_cols);
    for (Eigen::Index r = 0; r < n_rows; ++r) {
        const auto& row = rows[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n_cols) malformed("ragged matrix");
        for (Eigen::Index c = 0; c < n_cols; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) malformed("matrix entries must be numbers");
            m(r, c) = v.get<float>();
        }
    }
    if (!m.allFinite()) malformed("matrix has non-finite entries");
    return m;
}

json encode_pair_request(std::string_view question, const ImageSource& image) {
    json body{{"question", std::string(question)}};
    put_image(body, image);
    return body;
}

json encode_pair_response(const Embedding& key) {
    json values = json::array();
    for (float v : key.values()) values.push_back(static_cast<double>(v));
    return {{"embedding", std::move(values)}, {"dim", key.dim()}};
}

Embedding embedding_from_response(const json& j) {
    if (!j.is_object() || !j.contains("embedding") || !j["embedding"].is_array()) malformed("missing \"embedding\"");
    const std::size_t dim = positive_field(j, "dim");
    const auto& values = j["embedding"];
    if (values.size() != dim) malformed("embedding length does not match \"dim\"");
    Eigen::VectorXf key(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
        if (!values[i].is_number()) malformed("embedding entries must be numbers");
        key[static_cast<Eigen::Index>(i)] = values[i].get<float>();
    }
    try {
        return Embedding(std::move(key));
    } catch (const Error& e) {
        malformed(e.what());
    }
}

json encode_image_request(const ImageSource& image) {
    json body = json::object();
    put_image(body, image);
    return body;
}

json encode_image_response(const Eigen::MatrixXf& tokens) {
    return {{"tokens", matrix_to_json(tokens)}, {"l_v", tokens.rows()}, {"d", tokens.cols()}};
}

Eigen::MatrixXf tokens_from_response(const json& j) {
    if (!j.is_object() || !j.contains("tokens")) malformed("missing \"tokens\"");
    Eigen::MatrixXf m = matrix_from_json(j["tokens"]);
    if (static_cast<std::size_t>(m.rows()) != positive_field(j, "l_v") ||
        static_cast<std::size_t>(m.cols()) != positive_field(j, "d")) {
        malformed("token matrix shape does not match l_v/d");
    }
    return m;
}

json generate_request(const AssembledPrompt& prompt) {
    return {{"image_tokens", matrix_to_json(prompt.image_tokens)},
            {"instruction", prompt.instruction},
            {"question", prompt.question},
            {"retrieval", prompt.retrieval_text ? json(*prompt.retrieval_text) : json(nullptr)},
            {"order", prompt.order.code()}};
}

AssembledPrompt prompt_from_request(const json& j) {
    if (!j.is_object()) malformed("generate request must be an object");
    for (const char* name : {"instruction", "question", "order"}) {
        if (!j.contains(name) || !j[name].is_string()) malformed(std::string("field \"") + name + "\" must be a string");
    }
    std::optional<std::string> retrieval;
    if (j.contains("retrieval") && !j["retrieval"].is_null()) {
        if (!j["retrieval"].is_string()) malformed("field \"retrieval\" must be a string or null");
        retrieval = j["retrieval"].get<std::string>();
    }
    PromptOrder order;
    try {
        order = PromptOrder(j["order"].get<std::string>());
    } catch (const ConfigError& e) {
        malformed(e.what());
    }
    return assemble_prompt(matrix_from_json(j.value("image_tokens", json())), j["instruction"].get<std::string>(),
                           j["question"].get<std::string>(), std::move(retrieval), order);
}

}  // namespace wire

// ---------------------------------------------------------------------------
// Remote

RemoteGateway::RemoteGateway(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {
    while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
    if (endpoint_.empty()) throw ConfigError("remote gateway needs an endpoint");
}

namespace {

json handle_response(const httplib::Result& res, const std::string& what) {
    if (!res) throw GatewayUnavailable(what + ": " + httplib::to_string(res.error()));
    json body;
    try {
        body = json::parse(res->body);
    } catch (const json::parse_error&) {
        if (res->status != 200) throw GatewayError(what + ": HTTP " + std::to_string(res->status));
        malformed(what + " returned a non-JSON body");
    }
    if (res->status == 200) return body;
    const std::string detail = body.is_object() && body.contains("error") ? body["error"].dump() : res->body;
    if (res->status == 404) throw ImageNotFound(what + ": " + detail);
    if (res->status == 503) throw GatewayUnavailable(what + ": " + detail);
    throw GatewayError(what + ": HTTP " + std::to_string(res->status) + " " + detail);
}

void configure(httplib::Client& cli, std::chrono::milliseconds timeout) {
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
}

}  // namespace

json RemoteGateway::get(const std::string& path) const {
    httplib::Client cli(endpoint_);
    configure(cli, timeout_);
    return handle_response(cli.Get(path), "GET " + path);
}

json RemoteGateway::post(const std::string& path, const json& body) const {
    httplib::Client cli(endpoint_);
    configure(cli, timeout_);
    return handle_response(cli.Post(path, body.dump(), "application/json"), "POST " + path);
}

EncoderDescriptor RemoteGateway::descriptor() const {
    std::lock_guard lock(descriptor_mutex_);
    if (!descriptor_) descriptor_ = wire::descriptor_from_json(get("/v1/descriptor"));
    return *descriptor_;
}

Embedding RemoteGateway::encode_pair(std::string_view question, const ImageSource& image) const {
    if (question.empty()) throw ValidationError("encode_pair: question is empty");
    return wire::embedding_from_response(post("/v1/encode_pair", wire::encode_pair_request(question, image)));
}

Eigen::MatrixXf RemoteGateway::encode_image_tokens(const ImageSource& image) const {
    return wire::tokens_from_response(post("/v1/encode_image", wire::encode_image_request(image)));
}

GenerationResult RemoteGateway::generate(const AssembledPrompt& prompt) const {
    const json body = post("/v1/generate", wire::generate_request(prompt));
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) malformed("missing \"text\"");
    return {body["text"].get<std::string>(), std::nullopt};
}

}  // namespace mpr
