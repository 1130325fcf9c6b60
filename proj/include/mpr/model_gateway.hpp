#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <json.hpp>

#include "mpr/prompt_builder.hpp"
#include "mpr/vector_index.hpp"

namespace mpr {

struct EncoderDescriptor {
    std::string name;
    std::size_t text_dim = 0;
    std::size_t image_dim = 0;
    std::size_t token_dim = 0;
    std::size_t token_count = 0;

    std::size_t key_dim() const noexcept { return text_dim + image_dim; }

    friend bool operator==(const EncoderDescriptor&, const EncoderDescriptor&) = default;
};

struct GenerationResult {
    std::string text;
    std::optional<std::string> raw_segments_echo;
};

/// An image handed to a backend: either an opaque reference the backend
/// resolves itself, or the file contents inlined as base64.
struct ImageSource {
    enum class Kind { reference, inline_base64 };

    Kind kind = Kind::reference;
    std::string data;

    static ImageSource reference(std::string ref) { return {Kind::reference, std::move(ref)}; }
    static ImageSource inline_base64(std::string b64) { return {Kind::inline_base64, std::move(b64)}; }
};

/// Reads `ref_or_path` and inlines it when it names a readable file and
/// `inline_files` is set; otherwise passes it through as a reference.
ImageSource resolve_image(const std::string& ref_or_path, bool inline_files);

/// Every neural operation the engine needs. Implementations must be safe to
/// call from several threads at once.
class ModelGateway {
public:
    virtual ~ModelGateway() = default;

    virtual EncoderDescriptor descriptor() const = 0;

    /// Retrieval key [image summary; question end token], dim text_dim + image_dim.
    virtual Embedding encode_pair(std::string_view question, const ImageSource& image) const = 0;

    /// token_count x token_dim image token matrix.
    virtual Eigen::MatrixXf encode_image_tokens(const ImageSource& image) const = 0;

    virtual GenerationResult generate(const AssembledPrompt& prompt) const = 0;
};

struct MockConfig {
    EncoderDescriptor descriptor{"mock-bytefold", 16, 16, 8, 4};
    PromptConfig prompt;
    /// Minimum zero-based quantifier index that makes the mock echo the
    /// retrieved answer. Defaults to the index of "likely" in the scale.
    std::optional<std::size_t> echo_threshold;
};

/// Deterministic stand-in for the neural backends.
///
/// Keys are byte-fold hashes: for each byte b at position j of the input,
/// acc[(31*j + b) mod n] += (b mod 7) - 3, followed by L2 normalization
/// (first basis vector on zero norm). The image half hashes the image data,
/// the text half hashes the question, and both halves are scaled by
/// 1/sqrt(2) so the key has unit norm while each half stays independent.
///
/// Generation echoes the answer of the retrieval segment when its quantifier
/// sits at or above the echo threshold and returns "unknown" otherwise.
class MockGateway final : public ModelGateway {
public:
    explicit MockGateway(MockConfig config = {});

    EncoderDescriptor descriptor() const override { return config_.descriptor; }
    Embedding encode_pair(std::string_view question, const ImageSource& image) const override;
    Eigen::MatrixXf encode_image_tokens(const ImageSource& image) const override;
    GenerationResult generate(const AssembledPrompt& prompt) const override;

    std::size_t echo_threshold() const noexcept { return echo_threshold_; }
    const MockConfig& config() const noexcept { return config_; }

private:
    MockConfig config_;
    std::size_t echo_threshold_;
};

inline constexpr std::string_view kMockNoAnswer = "unknown";

/// Client for the gateway wire protocol. Each call opens its own
/// connection, so concurrent calls never share transport state.
class RemoteGateway final : public ModelGateway {
public:
    explicit RemoteGateway(std::string endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(30));

    EncoderDescriptor descriptor() const override;
    Embedding encode_pair(std::string_view question, const ImageSource& image) const override;
    Eigen::MatrixXf encode_image_tokens(const ImageSource& image) const override;
    GenerationResult generate(const AssembledPrompt& prompt) const override;

private:
    nlohmann::json get(const std::string& path) const;
    nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

    std::string endpoint_;
    std::chrono::milliseconds timeout_;
    mutable std::mutex descriptor_mutex_;
    mutable std::optional<EncoderDescriptor> descriptor_;
};

namespace wire {

nlohmann::json descriptor_to_json(const EncoderDescriptor& d);
EncoderDescriptor descriptor_from_json(const nlohmann::json& j);

/// Sets "image_ref"/"image_b64" on `body`, the unused one to null.
void put_image(nlohmann::json& body, const ImageSource& image);
ImageSource image_from_json(const nlohmann::json& body);

nlohmann::json matrix_to_json(const Eigen::MatrixXf& m);
Eigen::MatrixXf matrix_from_json(const nlohmann::json& rows);

nlohmann::json encode_pair_request(std::string_view question, const ImageSource& image);
nlohmann::json encode_pair_response(const Embedding& key);
Embedding embedding_from_response(const nlohmann::json& j);

nlohmann::json encode_image_request(const ImageSource& image);
nlohmann::json encode_image_response(const Eigen::MatrixXf& tokens);
Eigen::MatrixXf tokens_from_response(const nlohmann::json& j);

nlohmann::json generate_request(const AssembledPrompt& prompt);
AssembledPrompt prompt_from_request(const nlohmann::json& j);

}  // namespace wire

}  // namespace mpr
