#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpr/answer_canon.hpp"
#include "mpr/types.hpp"
#include "mpr/vector_index.hpp"

namespace mpr {

struct VqaExample {
    std::string id;
    std::string image_ref;
    std::string question;
    std::string answer;
    std::string q_type;
    AnswerType a_type = AnswerType::open;

    friend bool operator==(const VqaExample&, const VqaExample&) = default;
};

struct CaptionExample {
    std::string id;
    std::string image_ref;
    std::string caption;

    friend bool operator==(const CaptionExample&, const CaptionExample&) = default;
};

struct VqaLoadOptions {
    /// Allowed normalized answers for closed questions; nullopt disables the check.
    std::optional<std::vector<std::string>> closed_vocabulary = std::vector<std::string>{"yes", "no"};
};

std::vector<VqaExample> load_vqa(const std::filesystem::path& path, const VqaLoadOptions& options = {});
std::vector<VqaExample> read_vqa(std::istream& in, const VqaLoadOptions& options = {});
void save_vqa(const std::vector<VqaExample>& examples, const std::filesystem::path& path);
void write_vqa(const std::vector<VqaExample>& examples, std::ostream& out);
std::string to_record_line(const VqaExample& example);

std::vector<CaptionExample> load_captions(const std::filesystem::path& path);
std::vector<CaptionExample> read_captions(std::istream& in);

/// Deduplicated normalized answers in first-occurrence order.
LabelSet extract_label_set(const std::vector<VqaExample>& examples);

struct DatasetSplit {
    std::vector<VqaExample> train;
    std::vector<VqaExample> validation;
    std::vector<VqaExample> test;
};

/// Checks id uniqueness across all three parts. Validation may be empty.
DatasetSplit make_split(std::vector<VqaExample> train, std::vector<VqaExample> validation,
                        std::vector<VqaExample> test);

// Binary index format, little-endian:
//   "MPR1" u32 version=1 u32 dim u32 m
//   per record: u32 len + id, u32 len + answer, u32 len + q_type, u8 a_type, dim x f32
inline constexpr std::uint32_t kIndexVersion = 1;

std::string serialize_index(const RetrievalIndex& index);
RetrievalIndex deserialize_index(std::string_view bytes);
void save_index(const RetrievalIndex& index, const std::filesystem::path& path);
RetrievalIndex load_index(const std::filesystem::path& path);

/// True when the file starts with the index magic.
bool is_index_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace mpr
