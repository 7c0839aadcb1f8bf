#include "deceptkit/nn/safetensors.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"

namespace deceptkit::nn {

static_assert(std::endian::native == std::endian::little, "safetensors data is little-endian");

namespace {

constexpr std::uint64_t kMaxHeaderBytes = 100'000'000;

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "F64") return 8;
  if (dtype == "F32") return 4;
  if (dtype == "F16" || dtype == "BF16") return 2;
  throw FormatError("unsupported safetensors dtype " + dtype);
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  std::uint32_t exponent = (h >> 10) & 0x1Fu;
  std::uint32_t mantissa = h & 0x3FFu;
  std::uint32_t bits = 0;
  if (exponent == 0) {
    if (mantissa != 0) {
      // Subnormal: renormalize.
      exponent = 127 - 15 + 1;
      while ((mantissa & 0x400u) == 0) {
        mantissa <<= 1;
        --exponent;
      }
      mantissa &= 0x3FFu;
      bits = sign | (exponent << 23) | (mantissa << 13);
    } else {
      bits = sign;
    }
  } else if (exponent == 0x1F) {
    bits = sign | 0x7F800000u | (mantissa << 13);
  } else {
    bits = sign | ((exponent + 127 - 15) << 23) | (mantissa << 13);
  }
  return std::bit_cast<float>(bits);
}

}  // namespace

SafetensorsReader::SafetensorsReader(const std::filesystem::path& path)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw FormatError("cannot open " + path.string());
  std::uint64_t header_len = 0;
  in_.read(reinterpret_cast<char*>(&header_len), 8);
  if (!in_ || header_len > kMaxHeaderBytes) throw FormatError(path.string() + ": bad safetensors header length");
  std::string header(header_len, '\0');
  in_.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in_) throw FormatError(path.string() + ": truncated safetensors header");
  data_offset_ = 8 + header_len;

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed safetensors header: " + e.what());
  }
  const auto file_size = std::filesystem::file_size(path);
  for (const auto& [name, entry] : doc.items()) {
    if (name == "__metadata__") {
      for (const auto& [k, v] : entry.items()) metadata_[k] = v.get<std::string>();
      continue;
    }
    TensorInfo info;
    info.dtype = entry.at("dtype").get<std::string>();
    info.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto offsets = entry.at("data_offsets").get<std::vector<std::uint64_t>>();
    if (offsets.size() != 2) throw FormatError(path.string() + ": bad offsets for " + name);
    info.begin = offsets[0];
    info.end = offsets[1];
    std::uint64_t count = 1;
    for (auto d : info.shape) count *= static_cast<std::uint64_t>(d);
    if (info.end < info.begin || info.end - info.begin != count * dtype_size(info.dtype) ||
        data_offset_ + info.end > file_size) {
      throw FormatError(path.string() + ": tensor " + name + " is truncated or mis-sized");
    }
    tensors_[name] = std::move(info);
  }
}

const TensorInfo& SafetensorsReader::info(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw FormatError(path_.string() + ": no tensor named " + name);
  return it->second;
}

std::vector<std::string> SafetensorsReader::names() const {
  std::vector<std::string> out;
  for (const auto& [name, info] : tensors_) out.push_back(name);
  return out;
}

Matrix SafetensorsReader::read(const std::string& name) {
  const TensorInfo& t = info(name);
  Eigen::Index rows = 1;
  Eigen::Index cols = 1;
  if (t.shape.size() == 1) {
    cols = t.shape[0];
  } else if (t.shape.size() == 2) {
    rows = t.shape[0];
    cols = t.shape[1];
  } else {
    throw FormatError(path_.string() + ": tensor " + name + " has unsupported rank " + std::to_string(t.shape.size()));
  }
  std::string bytes(t.end - t.begin, '\0');
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(data_offset_ + t.begin));
  in_.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!in_) throw FormatError(path_.string() + ": failed reading tensor " + name);

  Matrix out(rows, cols);
  const std::size_t n = static_cast<std::size_t>(rows * cols);
  const char* src = bytes.data();
  for (std::size_t i = 0; i < n; ++i) {
    double value = 0.0;
    if (t.dtype == "F64") {
      std::memcpy(&value, src + 8 * i, 8);
    } else if (t.dtype == "F32") {
      float f = 0.0F;
      std::memcpy(&f, src + 4 * i, 4);
      value = f;
    } else {
      std::uint16_t h = 0;
      std::memcpy(&h, src + 2 * i, 2);
      value = t.dtype == "BF16" ? std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16) : half_to_float(h);
    }
    out.data()[i] = value;
  }
  return out;
}

void write_safetensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors,
                       const std::map<std::string, std::string>& metadata) {
  nlohmann::ordered_json header;
  if (!metadata.empty()) header["__metadata__"] = metadata;
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    const std::uint64_t bytes = static_cast<std::uint64_t>(t.value->size()) * 8;
    header[t.name] = {{"dtype", "F64"},
                      {"shape", {t.value->rows(), t.value->cols()}},
                      {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  std::string header_text = header.dump();
  while (header_text.size() % 8 != 0) header_text.push_back(' ');
  std::string blob;
  blob.reserve(8 + header_text.size() + offset);
  const std::uint64_t header_len = header_text.size();
  blob.append(reinterpret_cast<const char*>(&header_len), 8);
  blob += header_text;
  for (const auto& t : tensors) {
    blob.append(reinterpret_cast<const char*>(t.value->data()), static_cast<std::size_t>(t.value->size()) * 8);
  }
  write_file_atomic(path, blob);
}

}  // namespace deceptkit::nn
