#include "deceptkit/corpus/dataset_spec.hpp"

#include <algorithm>
#include <fstream>

#include "deceptkit/common/error.hpp"

namespace deceptkit::corpus {

using nlohmann::json;

std::string describe(const FieldRef& field) {
  if (const auto* name = std::get_if<std::string>(&field)) return "'" + *name + "'";
  return "column " + std::to_string(std::get<std::size_t>(field));
}

namespace {

constexpr std::array<DatasetId, 3> kProvidedSplitDatasets = {DatasetId::kLiar, DatasetId::kRashkinPolitifact,
                                                             DatasetId::kCovidAaai};

RawFormat parse_format(const std::string& text) {
  if (text == "delimited") return RawFormat::kDelimited;
  if (text == "structured_record") return RawFormat::kStructuredRecord;
  if (text == "directory_of_files") return RawFormat::kDirectoryOfFiles;
  throw ConfigError("unknown raw format '" + text + "'");
}

FieldRef parse_field(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_unsigned()) return value.get<std::size_t>();
  throw ConfigError("field reference must be a column name or a non-negative index");
}

std::optional<std::size_t> optional_count(const json& obj, const char* key) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return obj.at(key).get<std::size_t>();
}

Label parse_rule_label(const std::string& text) {
  if (text == "deceptive") return Label::kDeceptive;
  if (text == "non_deceptive") return Label::kNonDeceptive;
  throw ConfigError("label rule target must be 'deceptive' or 'non_deceptive', got '" + text + "'");
}

DatasetSpec parse_spec(const json& doc) {
  DatasetSpec spec;
  spec.id = parse_dataset_id(doc.at("dataset_id").get<std::string>());
  const std::string key(dataset_key(spec.id));
  try {
    spec.format = parse_format(doc.at("format").get<std::string>());
    spec.raw_subdir = doc.value("raw_subdir", key);
    if (doc.contains("files")) {
      for (const auto& f : doc.at("files")) {
        RawFile file;
        file.path = f.at("path").get<std::string>();
        if (f.contains("split")) file.split = parse_split(f.at("split").get<std::string>());
        if (f.contains("original_label")) file.original_label = f.at("original_label").get<std::string>();
        spec.files.push_back(std::move(file));
      }
    }
    const std::string delimiter = doc.value("delimiter", std::string(","));
    if (delimiter.size() != 1) throw ConfigError("delimiter must be a single character");
    spec.delimiter = delimiter[0];
    spec.has_header = doc.value("has_header", true);
    spec.quoted = doc.value("quoted", true);
    if (doc.contains("text_fields")) {
      for (const auto& f : doc.at("text_fields")) spec.text_fields.push_back(parse_field(f));
    }
    if (doc.contains("label_field")) spec.label_field = parse_field(doc.at("label_field"));
    if (doc.contains("id_field")) spec.id_field = parse_field(doc.at("id_field"));
    spec.path_pattern = doc.value("path_pattern", std::string());
    spec.file_text_field = doc.value("file_text_field", std::string());
    spec.layout_template = doc.value("layout_template", std::string());
    spec.provided_splits = doc.value("provided_splits", false);
    if (doc.contains("expected")) {
      const auto& e = doc.at("expected");
      spec.expected.total = optional_count(e, "total");
      spec.expected.deceptive = optional_count(e, "deceptive");
      spec.expected.non_deceptive = optional_count(e, "non_deceptive");
      if (e.contains("per_split")) {
        for (const auto& [split, count] : e.at("per_split").items()) {
          spec.expected.per_split[parse_split(split)] = count.get<std::size_t>();
        }
      }
    }
    spec.count_group = doc.value("count_group", std::string());
    if (doc.contains("group_expected_total")) spec.group_expected_total = doc.at("group_expected_total").get<std::size_t>();
    if (doc.contains("event_tag") && !doc.at("event_tag").is_null()) spec.event_tag = doc.at("event_tag").get<std::string>();
    spec.acquisition_note = doc.value("acquisition", std::string());

    std::vector<LabelRule> rules;
    std::vector<std::string> drops;
    const auto& lm = doc.at("label_map");
    for (const auto& r : lm.at("rules")) {
      rules.push_back({r.at("pattern").get<std::string>(), parse_rule_label(r.at("label").get<std::string>())});
    }
    if (lm.contains("drop")) drops = lm.at("drop").get<std::vector<std::string>>();
    spec.label_map = LabelMap(spec.id, std::move(rules), std::move(drops));
  } catch (const json::exception& e) {
    throw ConfigError("dataset " + key + ": " + e.what());
  }

  const bool must_provide = std::find(kProvidedSplitDatasets.begin(), kProvidedSplitDatasets.end(), spec.id) !=
                            kProvidedSplitDatasets.end();
  if (spec.provided_splits != must_provide) {
    throw ConfigError("dataset " + key + ": provided_splits must be " + (must_provide ? "true" : "false"));
  }
  if (spec.provided_splits) {
    if (spec.format == RawFormat::kDirectoryOfFiles) {
      throw ConfigError("dataset " + key + ": provided splits need file-level split annotations");
    }
    for (const auto& f : spec.files) {
      if (!f.split) throw ConfigError("dataset " + key + ": file " + f.path + " lacks a split annotation");
    }
  }
  if (spec.format == RawFormat::kDirectoryOfFiles) {
    if (spec.path_pattern.empty()) throw ConfigError("dataset " + key + ": directory format needs path_pattern");
  } else {
    if (spec.files.empty()) throw ConfigError("dataset " + key + ": no raw files listed");
    if (spec.text_fields.empty()) throw ConfigError("dataset " + key + ": no text_fields");
    const bool all_files_labelled =
        std::all_of(spec.files.begin(), spec.files.end(), [](const RawFile& f) { return f.original_label.has_value(); });
    if (!spec.label_field && !all_files_labelled) {
      throw ConfigError("dataset " + key + ": label_field missing and not every file carries original_label");
    }
    if (!spec.has_header && spec.format == RawFormat::kDelimited) {
      auto by_name = [](const FieldRef& f) { return std::holds_alternative<std::string>(f); };
      if (std::any_of(spec.text_fields.begin(), spec.text_fields.end(), by_name) ||
          (spec.label_field && by_name(*spec.label_field)) || (spec.id_field && by_name(*spec.id_field))) {
        throw ConfigError("dataset " + key + ": headerless tables must reference columns by index");
      }
    }
  }
  return spec;
}

}  // namespace

DatasetCatalog::DatasetCatalog(std::vector<DatasetSpec> specs) : specs_(std::move(specs)) {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    for (std::size_t j = i + 1; j < specs_.size(); ++j) {
      if (specs_[i].id == specs_[j].id) {
        throw ConfigError("dataset " + std::string(dataset_key(specs_[i].id)) + " listed twice");
      }
    }
  }
}

DatasetCatalog DatasetCatalog::from_json(const json& doc) {
  const int version = doc.value("schema_version", 0);
  if (version != kSchemaVersion) {
    throw ConfigError("dataset catalog schema_version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  std::vector<DatasetSpec> specs;
  for (const auto& entry : doc.at("datasets")) specs.push_back(parse_spec(entry));
  return DatasetCatalog(std::move(specs));
}

DatasetCatalog DatasetCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset catalog " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError("dataset catalog " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

const DatasetSpec& DatasetCatalog::spec(DatasetId id) const {
  for (const auto& s : specs_) {
    if (s.id == id) return s;
  }
  throw ConfigError("catalog has no dataset " + std::string(dataset_key(id)));
}

bool DatasetCatalog::contains(DatasetId id) const {
  return std::any_of(specs_.begin(), specs_.end(), [id](const DatasetSpec& s) { return s.id == id; });
}

Label DatasetCatalog::map_label(DatasetId id, std::string_view original_label) const {
  return spec(id).label_map.map(original_label);
}

}  // namespace deceptkit::corpus
