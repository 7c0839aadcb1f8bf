#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

namespace deceptkit::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "deceptkit") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path source_dir() { return DECEPTKIT_SOURCE_DIR; }
inline std::filesystem::path catalog_path() { return source_dir() / "config" / "datasets.json"; }

}  // namespace deceptkit::testing
