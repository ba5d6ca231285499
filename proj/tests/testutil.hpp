#pragma once

// Shared helpers for the test suite. Not part of the installed library.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testutil {

// Self-cleaning unique directory for tests that touch the filesystem.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        const char* scratch = std::getenv("SOBD_SCRATCH");
        std::filesystem::path base =
            scratch ? std::filesystem::path(scratch) : std::filesystem::temp_directory_path();
        std::random_device rd;
        for (int attempt = 0; attempt < 64; ++attempt) {
            auto candidate = base / ("sobd_test_" + std::to_string(rd()));
            std::error_code ec;
            if (std::filesystem::create_directories(candidate, ec)) {
                path = candidate;
                return;
            }
        }
        throw std::runtime_error("TempDir: could not create a unique directory");
    }

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("write_text failed: " + path);
}

inline std::string read_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_binary failed: " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testutil
