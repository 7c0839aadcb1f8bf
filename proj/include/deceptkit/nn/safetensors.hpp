#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "deceptkit/nn/tensor.hpp"

namespace deceptkit::nn {

struct TensorInfo {
  std::string dtype;  // F64, F32, F16 or BF16
  std::vector<std::int64_t> shape;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

// Lazy reader for the safetensors container: the header is parsed on open
// and tensors are read from disk one at a time.
class SafetensorsReader {
 public:
  explicit SafetensorsReader(const std::filesystem::path& path);

  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const TensorInfo& info(const std::string& name) const;
  std::vector<std::string> names() const;
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  // Rank-2 tensors keep their shape; rank-1 tensors become a single row.
  Matrix read(const std::string& name);

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::uint64_t data_offset_ = 0;
  std::map<std::string, TensorInfo> tensors_;
  std::map<std::string, std::string> metadata_;
};

struct NamedTensor {
  std::string name;
  const Matrix* value;
};

// Writes F64 tensors, each with a rank-2 shape.
void write_safetensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors,
                       const std::map<std::string, std::string>& metadata = {});

}  // namespace deceptkit::nn
