#include "deceptkit/corpus/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <unordered_map>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "deceptkit/common/csv.hpp"
#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/common/hash.hpp"
#include "deceptkit/common/unicode.hpp"

namespace deceptkit::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Everything the row loops need to turn one raw record into a sample.
class SampleBuilder {
 public:
  SampleBuilder(const DatasetSpec& spec, IngestResult& result) : spec_(spec), result_(result) {}

  void add(const std::string& row_key, std::string_view raw_text, const std::string& original_label,
           std::optional<Split> split, const std::string& where) {
    std::optional<Label> label;
    try {
      label = spec_.label_map.resolve(original_label);
    } catch (const LabelMapError& e) {
      throw LabelMapError(std::string(e.what()) + " (at " + where + ")");
    }
    if (!label) {
      ++result_.dropped_by_label;
      return;
    }
    std::string text = unicode::normalize_text(raw_text);
    if (text.empty()) {
      ++result_.empty_text;
      return;
    }
    TextSample sample;
    sample.id = std::string(dataset_key(spec_.id)) + ":" + row_key;
    sample.text = std::move(text);
    sample.label = *label;
    sample.dataset = spec_.id;
    sample.original_label = original_label;
    sample.split = split;
    sample.event_tag = spec_.event_tag;
    result_.samples.push_back(std::move(sample));
  }

 private:
  const DatasetSpec& spec_;
  IngestResult& result_;
};

fs::path require_file(const DatasetSpec& spec, const fs::path& path) {
  if (!fs::exists(path)) {
    std::string message = "dataset " + std::string(dataset_key(spec.id)) + ": raw file " + path.string() + " not found";
    if (!spec.acquisition_note.empty()) message += ". Acquisition: " + spec.acquisition_note;
    throw IngestError(message);
  }
  return path;
}

std::size_t resolve_column(const FieldRef& field, const std::unordered_map<std::string, std::size_t>& header,
                           const std::string& file) {
  if (const auto* index = std::get_if<std::size_t>(&field)) return *index;
  const auto& name = std::get<std::string>(field);
  const auto it = header.find(name);
  if (it == header.end()) throw IngestError(file + ": header has no column '" + name + "'");
  return it->second;
}

std::string json_scalar(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_null()) return "";
  return value.dump();
}

void ingest_delimited(const DatasetSpec& spec, const fs::path& root, IngestResult& result, SampleBuilder& builder) {
  for (const auto& file : spec.files) {
    const fs::path path = require_file(spec, root / file.path);
    result.file_checksums[file.path] = sha256_file(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open " + path.string());
    DelimitedReader reader(in, spec.delimiter, spec.quoted);

    std::unordered_map<std::string, std::size_t> header;
    std::vector<std::string> fields;
    if (spec.has_header) {
      if (!reader.next(fields)) continue;
      for (std::size_t i = 0; i < fields.size(); ++i) {
        std::string name = fields[i];
        if (i == 0 && name.starts_with("\xEF\xBB\xBF")) name.erase(0, 3);
        header.emplace(name, i);
      }
    }
    std::vector<std::size_t> text_columns;
    for (const auto& f : spec.text_fields) text_columns.push_back(resolve_column(f, header, file.path));
    std::optional<std::size_t> label_column;
    if (spec.label_field) label_column = resolve_column(*spec.label_field, header, file.path);
    std::optional<std::size_t> id_column;
    if (spec.id_field) id_column = resolve_column(*spec.id_field, header, file.path);

    std::size_t needed = 0;
    for (std::size_t c : text_columns) needed = std::max(needed, c + 1);
    if (label_column) needed = std::max(needed, *label_column + 1);
    if (id_column) needed = std::max(needed, *id_column + 1);

    try {
      while (reader.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        const std::string where = file.path + ":" + std::to_string(reader.record_line());
        if (fields.size() < needed) {
          throw IngestError("dataset " + std::string(dataset_key(spec.id)) + ": row " + where + " has " +
                            std::to_string(fields.size()) + " fields, expected at least " + std::to_string(needed));
        }
        std::string text;
        for (std::size_t c : text_columns) {
          if (!text.empty()) text.push_back(' ');
          text += fields[c];
        }
        const std::string original = label_column ? fields[*label_column] : *file.original_label;
        const std::string row_key =
            file.path + ":" + (id_column ? fields[*id_column] : std::to_string(reader.record_line()));
        builder.add(row_key, text, original, file.split, where);
      }
    } catch (const IngestError& e) {
      const std::string what = e.what();
      if (what.find(file.path) != std::string::npos) throw;
      throw IngestError("dataset " + std::string(dataset_key(spec.id)) + ": " + file.path + ": " + what);
    }
  }
}

void ingest_structured(const DatasetSpec& spec, const fs::path& root, IngestResult& result, SampleBuilder& builder) {
  auto name_of = [&](const FieldRef& f) {
    if (const auto* name = std::get_if<std::string>(&f)) return *name;
    throw ConfigError("dataset " + std::string(dataset_key(spec.id)) + ": structured records need named fields");
  };
  std::vector<std::string> text_keys;
  for (const auto& f : spec.text_fields) text_keys.push_back(name_of(f));
  std::optional<std::string> label_key;
  if (spec.label_field) label_key = name_of(*spec.label_field);
  std::optional<std::string> id_key;
  if (spec.id_field) id_key = name_of(*spec.id_field);

  for (const auto& file : spec.files) {
    const fs::path path = require_file(spec, root / file.path);
    result.file_checksums[file.path] = sha256_file(path);
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string where = file.path + ":" + std::to_string(line_no);
      json record;
      try {
        record = json::parse(line);
      } catch (const json::exception& e) {
        throw IngestError("dataset " + std::string(dataset_key(spec.id)) + ": row " + where + " is not valid JSON: " +
                          e.what());
      }
      if (!record.is_object()) {
        throw IngestError("dataset " + std::string(dataset_key(spec.id)) + ": row " + where + " is not an object");
      }
      auto member = [&](const std::string& key) -> std::string {
        if (!record.contains(key)) {
          throw IngestError("dataset " + std::string(dataset_key(spec.id)) + ": row " + where + " lacks field '" +
                            key + "'");
        }
        return json_scalar(record.at(key));
      };
      std::string text;
      for (const auto& key : text_keys) {
        if (!text.empty()) text.push_back(' ');
        text += member(key);
      }
      const std::string original = label_key ? member(*label_key) : *file.original_label;
      const std::string row_key = file.path + ":" + (id_key ? member(*id_key) : std::to_string(line_no));
      builder.add(row_key, text, original, file.split, where);
    }
  }
}

void ingest_directory(const DatasetSpec& spec, const fs::path& root, IngestResult& result, SampleBuilder& builder) {
  require_file(spec, root);
  const std::regex pattern(spec.path_pattern, std::regex::ECMAScript);
  std::vector<std::string> matches;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string rel = fs::relative(entry.path(), root).generic_string();
    if (std::regex_match(rel, pattern)) matches.push_back(std::move(rel));
  }
  std::sort(matches.begin(), matches.end());

  Sha256 tree_hash;
  for (const auto& rel : matches) {
    std::smatch m;
    std::regex_match(rel, m, pattern);
    if (m.size() < 2) {
      throw ConfigError("dataset " + std::string(dataset_key(spec.id)) + ": path_pattern needs a label capture group");
    }
    const std::string original = m[1].str();
    const std::string content = read_file(root / rel);
    tree_hash.update(rel);
    tree_hash.update(std::string_view("\0", 1));
    tree_hash.update(sha256_hex(content));

    std::string text;
    if (spec.file_text_field.empty()) {
      text = content;
    } else {
      json doc;
      try {
        doc = json::parse(content);
      } catch (const json::exception& e) {
        throw IngestError("dataset " + std::string(dataset_key(spec.id)) + ": file " + rel + " is not valid JSON: " +
                          e.what());
      }
      if (!doc.is_object() || !doc.contains(spec.file_text_field)) {
        throw IngestError("dataset " + std::string(dataset_key(spec.id)) + ": file " + rel + " lacks field '" +
                          spec.file_text_field + "'");
      }
      text = json_scalar(doc.at(spec.file_text_field));
    }
    builder.add(rel, text, original, std::nullopt, rel);
  }
  result.file_checksums[spec.path_pattern] = tree_hash.hex_digest();
}

}  // namespace

std::vector<std::string> check_expected_counts(const DatasetSpec& spec, const std::vector<TextSample>& samples) {
  std::size_t deceptive = 0;
  std::map<Split, std::size_t> per_split;
  for (const auto& s : samples) {
    if (s.label == Label::kDeceptive) ++deceptive;
    if (s.split) ++per_split[*s.split];
  }
  const std::size_t total = samples.size();
  const std::size_t non_deceptive = total - deceptive;
  const std::string key(dataset_key(spec.id));

  std::vector<std::string> out;
  auto check = [&](const char* what, std::size_t actual, const std::optional<std::size_t>& expected) {
    if (expected && actual != *expected) {
      out.push_back(key + ": " + what + " count " + std::to_string(actual) + " != expected " +
                    std::to_string(*expected));
    }
  };
  check("total", total, spec.expected.total);
  check("deceptive", deceptive, spec.expected.deceptive);
  check("non_deceptive", non_deceptive, spec.expected.non_deceptive);
  for (const auto& [split, expected] : spec.expected.per_split) {
    const std::size_t actual = per_split.contains(split) ? per_split.at(split) : 0;
    if (actual != expected) {
      out.push_back(key + ": " + std::string(to_string(split)) + " split count " + std::to_string(actual) +
                    " != expected " + std::to_string(expected));
    }
  }
  return out;
}

IngestResult ingest_dataset(const DatasetSpec& spec, const fs::path& raw_location) {
  IngestResult result;
  result.dataset = spec.id;
  SampleBuilder builder(spec, result);
  switch (spec.format) {
    case RawFormat::kDelimited: ingest_delimited(spec, raw_location, result, builder); break;
    case RawFormat::kStructuredRecord: ingest_structured(spec, raw_location, result, builder); break;
    case RawFormat::kDirectoryOfFiles: ingest_directory(spec, raw_location, result, builder); break;
  }
  if (result.empty_text > 0) {
    result.warnings.push_back(std::string(dataset_key(spec.id)) + ": skipped " + std::to_string(result.empty_text) +
                              " rows with empty text");
  }
  for (auto& message : check_expected_counts(spec, result.samples)) result.warnings.push_back(std::move(message));
  for (const auto& w : result.warnings) spdlog::warn("{}", w);
  return result;
}

}  // namespace deceptkit::corpus
