#include "deceptkit/corpus/corpus_io.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/common/hash.hpp"

namespace deceptkit::corpus {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kFormatName = "deceptkit.corpus";

ordered_json sample_to_json(const TextSample& s) {
  ordered_json j;
  j["id"] = s.id;
  j["dataset"] = dataset_key(s.dataset);
  j["label"] = to_string(s.label);
  j["original_label"] = s.original_label;
  j["split"] = s.split ? ordered_json(to_string(*s.split)) : ordered_json(nullptr);
  j["event_tag"] = s.event_tag ? ordered_json(*s.event_tag) : ordered_json(nullptr);
  j["text"] = s.text;
  return j;
}

TextSample sample_from_json(const json& j) {
  TextSample s;
  s.id = j.at("id").get<std::string>();
  s.dataset = parse_dataset_id(j.at("dataset").get<std::string>());
  s.label = parse_label(j.at("label").get<std::string>());
  s.original_label = j.at("original_label").get<std::string>();
  if (!j.at("split").is_null()) s.split = parse_split(j.at("split").get<std::string>());
  if (!j.at("event_tag").is_null()) s.event_tag = j.at("event_tag").get<std::string>();
  s.text = j.at("text").get<std::string>();
  if (s.text.empty()) throw FormatError("sample " + s.id + " has empty text");
  return s;
}

}  // namespace

fs::path manifest_path(const fs::path& corpus_path) {
  fs::path p = corpus_path;
  p += ".manifest.json";
  return p;
}

void export_corpus(const Corpus& corpus, const fs::path& path, const CorpusManifestExtras& extras) {
  std::vector<const TextSample*> order;
  order.reserve(corpus.size());
  for (const auto& s : corpus.samples()) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](const TextSample* a, const TextSample* b) { return a->id < b->id; });

  std::ostringstream out;
  ordered_json header;
  header["format"] = kFormatName;
  header["version"] = kCorpusFormatVersion;
  header["count"] = corpus.size();
  out << header.dump() << "\n";
  for (const auto* s : order) out << sample_to_json(*s).dump() << "\n";
  const std::string body = out.str();
  write_file_atomic(path, body);

  ordered_json manifest;
  manifest["format"] = std::string(kFormatName) + ".manifest";
  manifest["version"] = kCorpusFormatVersion;
  manifest["corpus_file"] = path.filename().string();
  manifest["sha256"] = sha256_hex(body);
  manifest["count"] = corpus.size();
  ordered_json counts = ordered_json::object();
  for (DatasetId id : kAllDatasets) {
    std::size_t total = 0;
    std::size_t deceptive = 0;
    for (const auto& s : corpus.samples()) {
      if (s.dataset != id) continue;
      ++total;
      if (s.label == Label::kDeceptive) ++deceptive;
    }
    if (total == 0) continue;
    counts[std::string(dataset_key(id))] = {{"total", total}, {"deceptive", deceptive},
                                            {"non_deceptive", total - deceptive}};
  }
  manifest["datasets"] = counts;
  manifest["seeds"] = extras.seeds;
  ordered_json raw = ordered_json::object();
  for (const auto& [dataset, files] : extras.raw_checksums) {
    ordered_json entry = ordered_json::object();
    for (const auto& [file, digest] : files) entry[file] = digest;
    raw[dataset] = entry;
  }
  manifest["raw_checksums"] = raw;
  write_file_atomic(manifest_path(path), manifest.dump(2) + "\n");
}

Corpus load_corpus(const fs::path& path) {
  const std::string body = read_file(path);
  std::istringstream in(body);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty corpus file");

  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  }
  if (!header.is_object() || header.value("format", std::string()) != kFormatName) {
    throw FormatError(path.string() + ": not a deceptkit corpus file");
  }
  const int version = header.value("version", -1);
  if (version != kCorpusFormatVersion) {
    throw FormatError(path.string() + ": corpus format version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kCorpusFormatVersion) + ")");
  }
  const auto expected_count = header.at("count").get<std::size_t>();

  std::vector<TextSample> samples;
  samples.reserve(expected_count);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      samples.push_back(sample_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (samples.size() != expected_count) {
    throw FormatError(path.string() + ": header announces " + std::to_string(expected_count) + " samples but " +
                      std::to_string(samples.size()) + " were read (truncated file?)");
  }

  const fs::path manifest_file = manifest_path(path);
  if (fs::exists(manifest_file)) {
    json manifest;
    try {
      manifest = json::parse(read_file(manifest_file));
    } catch (const json::exception& e) {
      throw FormatError(manifest_file.string() + ": " + e.what());
    }
    if (manifest.value("version", -1) != kCorpusFormatVersion) {
      throw FormatError(manifest_file.string() + ": manifest version mismatch");
    }
    if (manifest.value("sha256", std::string()) != sha256_hex(body)) {
      throw FormatError(path.string() + ": checksum does not match " + manifest_file.filename().string());
    }
  }
  return Corpus(std::move(samples));
}

}  // namespace deceptkit::corpus
