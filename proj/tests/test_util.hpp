#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testutil {

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("mpr-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path file(const std::string& name, const std::string& contents) const {
        auto p = path_ / name;
        std::ofstream(p, std::ios::binary) << contents;
        return p;
    }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::filesystem::path data_path(const std::string& name) {
    return std::filesystem::path(MPR_TEST_DATA_DIR) / name;
}

}  // namespace testutil
