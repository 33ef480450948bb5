#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace testsupport {

// Unique scratch directory removed (recursively) at scope exit.
class TempDir {
public:
    TempDir() {
        static std::mt19937_64 seq(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("oodratio-test-" + std::to_string(seq()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport
