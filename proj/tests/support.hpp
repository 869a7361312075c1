#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "scitikz/config.hpp"

namespace testing {

inline constexpr bool kHaveToolchain = SCITIKZ_HAVE_TOOLCHAIN;

/// Defaults plus the toolchain picked at configure time.
inline scitikz::Config toolchain_config() { return scitikz::Config::load(SCITIKZ_TEST_CONFIG); }

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("scitikz-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(SCITIKZ_TEST_DATA) / name; }

}  // namespace testing
