#include "deceptkit/corpus/fixture.hpp"

#include <fstream>
#include <map>
#include <regex>

#include <json.hpp>

#include "deceptkit/common/csv.hpp"
#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/common/rng.hpp"

namespace deceptkit::corpus {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Vocabulary {
  std::vector<std::string_view> deceptive;
  std::vector<std::string_view> non_deceptive;
};

const std::vector<std::string_view> kFiller = {
    "the", "a", "people", "today", "new", "said", "in", "of", "and", "to", "this", "that",
    "we", "you", "will", "about", "after", "city", "state", "week", "our", "more", "time", "now"};

const Vocabulary& vocabulary_for(DatasetId id) {
  static const Vocabulary kSpam{{"free", "winner", "prize", "claim", "cash", "urgent", "offer", "click"},
                                {"meeting", "lunch", "tomorrow", "thanks", "report", "schedule", "call", "home"}};
  static const Vocabulary kNews{{"shocking", "hoax", "secret", "exposed", "conspiracy", "miracle", "banned", "outrage"},
                                {"announced", "reported", "according", "officials", "statement", "data", "committee",
                                 "percent"}};
  static const Vocabulary kRumour{{"unconfirmed", "breaking", "reportedly", "allegedly", "rumor", "apparently",
                                   "hearing", "claims"},
                                  {"confirmed", "police", "update", "press", "verified", "briefing", "named", "official"}};
  static const Vocabulary kCovid{{"cure", "garlic", "5g", "plandemic", "bleach", "microchip", "lab-made", "coverup"},
                                 {"cases", "tested", "guidelines", "hospital", "ministry", "vaccination", "recovered",
                                  "masks"}};
  switch (id) {
    case DatasetId::kSmsSpam:
    case DatasetId::kEnron: return kSpam;
    case DatasetId::kPheme: return kRumour;
    case DatasetId::kCovidZenodo:
    case DatasetId::kCovidAaai: return kCovid;
    default: return kNews;
  }
}

std::string synthetic_text(DatasetId id, Label label, Rng& rng) {
  const auto& vocab = vocabulary_for(id);
  const auto& cues = label == Label::kDeceptive ? vocab.deceptive : vocab.non_deceptive;
  std::vector<std::string_view> words;
  const std::size_t filler = 6 + rng.uniform_index(7);
  for (std::size_t i = 0; i < filler; ++i) words.push_back(kFiller[rng.uniform_index(kFiller.size())]);
  for (int i = 0; i < 2; ++i) words.push_back(cues[rng.uniform_index(cues.size())]);
  rng.shuffle(std::span<std::string_view>(words));
  std::string text;
  for (const auto& w : words) {
    if (!text.empty()) text.push_back(' ');
    text += w;
  }
  return text;
}

struct FixtureRow {
  std::size_t file = 0;
  std::size_t number = 0;  // unique within the dataset
  std::string original_label;
  bool dropped = false;
};

std::string fill_template(std::string tmpl, const std::string& label, std::size_t n) {
  auto replace_all = [&tmpl](const std::string& key, const std::string& value) {
    for (std::size_t pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key, pos + value.size())) {
      tmpl.replace(pos, key.size(), value);
    }
  };
  replace_all("{label}", label);
  replace_all("{n}", std::to_string(100000 + n));
  return tmpl;
}

struct RowTargets {
  std::size_t total = 0;
  std::size_t deceptive = 0;
  std::map<Split, std::size_t> per_split;  // provided-split datasets only
};

RowTargets targets_for(const DatasetSpec& spec, const DatasetCatalog& catalog, FixtureScale scale) {
  RowTargets t;
  if (scale == FixtureScale::kMini) {
    t.total = kFixtureSamplesPerDataset;
    t.deceptive = t.total / 2;
  } else {
    if (spec.expected.total) {
      t.total = *spec.expected.total;
    } else if (spec.group_expected_total) {
      std::size_t members = 0;
      std::size_t position = 0;
      for (const auto& other : catalog.specs()) {
        if (other.count_group != spec.count_group) continue;
        if (other.id == spec.id) position = members;
        ++members;
      }
      t.total = *spec.group_expected_total / members + (position < *spec.group_expected_total % members ? 1 : 0);
    } else {
      t.total = kFixtureSamplesPerDataset;
    }
    t.deceptive = spec.expected.deceptive ? *spec.expected.deceptive
                                          : (spec.expected.non_deceptive ? t.total - *spec.expected.non_deceptive
                                                                         : t.total / 2);
    t.per_split = spec.expected.per_split;
  }
  if (spec.provided_splits && t.per_split.empty()) {
    const std::size_t holdout = t.total / 5;
    t.per_split = {{Split::kTrain, t.total - 2 * holdout}, {Split::kVal, holdout}, {Split::kTest, holdout}};
  }
  return t;
}

std::vector<FixtureRow> plan_rows(const DatasetSpec& spec, const RowTargets& targets) {
  const std::size_t file_count = spec.format == RawFormat::kDirectoryOfFiles ? 1 : spec.files.size();
  std::vector<std::size_t> slots;  // file index per kept row
  if (spec.provided_splits) {
    for (const auto& [split, count] : targets.per_split) {
      std::vector<std::size_t> files;
      for (std::size_t f = 0; f < spec.files.size(); ++f) {
        if (spec.files[f].split == split) files.push_back(f);
      }
      if (files.empty()) continue;
      for (std::size_t i = 0; i < count; ++i) slots.push_back(files[i % files.size()]);
    }
  } else {
    for (std::size_t i = 0; i < targets.total; ++i) slots.push_back(i % file_count);
  }

  std::vector<std::string> deceptive_patterns;
  std::vector<std::string> honest_patterns;
  std::optional<std::regex> path_pattern;
  if (spec.format == RawFormat::kDirectoryOfFiles) path_pattern.emplace(spec.path_pattern, std::regex::ECMAScript);
  for (const auto& rule : spec.label_map.rules()) {
    // Directory datasets can only carry labels their path pattern captures.
    if (path_pattern && !std::regex_match(fill_template(spec.layout_template, rule.pattern, 0), *path_pattern)) continue;
    (rule.label == Label::kDeceptive ? deceptive_patterns : honest_patterns).push_back(rule.pattern);
  }

  if (deceptive_patterns.empty() || honest_patterns.empty()) {
    throw ConfigError("dataset " + std::string(dataset_key(spec.id)) + ": fixture needs a usable label of each class");
  }

  std::vector<FixtureRow> rows;
  std::size_t number = 0;
  std::size_t deceptive_seen = 0;
  std::size_t honest_seen = 0;
  const std::size_t n = slots.size();
  for (std::size_t i = 0; i < n; ++i) {
    FixtureRow row;
    row.file = slots[i];
    row.number = number++;
    if (spec.format != RawFormat::kDirectoryOfFiles && spec.files[row.file].original_label) {
      row.original_label = *spec.files[row.file].original_label;
    } else {
      // Spread deceptive rows evenly through the sequence.
      const bool deceptive = (i + 1) * targets.deceptive / n > i * targets.deceptive / n;
      if (deceptive) row.original_label = deceptive_patterns[deceptive_seen++ % deceptive_patterns.size()];
      else row.original_label = honest_patterns[honest_seen++ % honest_patterns.size()];
    }
    rows.push_back(std::move(row));
  }
  // A couple of rows per drop rule exercise label exclusion.
  for (const auto& pattern : spec.label_map.drop_rules()) {
    for (int k = 0; k < 2; ++k) {
      FixtureRow row;
      row.file = 0;
      row.number = number++;
      row.original_label = pattern;
      row.dropped = true;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string field_name(const FieldRef& f) { return std::get<std::string>(f); }

void write_delimited(const DatasetSpec& spec, const fs::path& dir, const std::vector<FixtureRow>& rows, Rng& rng) {
  // Column layout: every referenced column plus one unused column.
  std::vector<std::string> header;
  std::size_t width = 0;
  auto note = [&](const FieldRef& f) {
    if (spec.has_header) {
      const std::string name = field_name(f);
      if (std::find(header.begin(), header.end(), name) == header.end()) header.push_back(name);
    } else {
      width = std::max(width, std::get<std::size_t>(f) + 1);
    }
  };
  if (spec.id_field) note(*spec.id_field);
  if (spec.label_field) note(*spec.label_field);
  for (const auto& f : spec.text_fields) note(f);
  if (spec.has_header) {
    header.push_back("extra");
    width = header.size();
  }
  auto column_of = [&](const FieldRef& f) -> std::size_t {
    if (!spec.has_header) return std::get<std::size_t>(f);
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), field_name(f)) - header.begin());
  };
  const std::string sep(1, spec.delimiter);
  auto emit = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) line += sep;
      line += spec.quoted ? csv_escape(cells[i]) : cells[i];
    }
    return line + "\n";
  };

  std::vector<std::string> contents(spec.files.size());
  if (spec.has_header) {
    for (auto& c : contents) c = emit(header);
  }
  for (const auto& row : rows) {
    std::vector<std::string> cells(width, "x");
    const Label label = row.dropped ? Label::kNonDeceptive : spec.label_map.map(row.original_label);
    const std::string text = synthetic_text(spec.id, label, rng);
    for (std::size_t i = 0; i < spec.text_fields.size(); ++i) {
      cells[column_of(spec.text_fields[i])] = i == 0 ? text : "more";
    }
    if (spec.label_field) cells[column_of(*spec.label_field)] = row.original_label;
    if (spec.id_field) cells[column_of(*spec.id_field)] = std::to_string(1000 + row.number);
    contents[row.file] += emit(cells);
  }
  for (std::size_t f = 0; f < spec.files.size(); ++f) write_file_atomic(dir / spec.files[f].path, contents[f]);
}

void write_structured(const DatasetSpec& spec, const fs::path& dir, const std::vector<FixtureRow>& rows, Rng& rng) {
  std::vector<std::string> contents(spec.files.size());
  for (const auto& row : rows) {
    const Label label = row.dropped ? Label::kNonDeceptive : spec.label_map.map(row.original_label);
    ordered_json record;
    if (spec.id_field) record[field_name(*spec.id_field)] = std::to_string(1000 + row.number);
    if (spec.label_field) record[field_name(*spec.label_field)] = row.original_label;
    for (std::size_t i = 0; i < spec.text_fields.size(); ++i) {
      record[field_name(spec.text_fields[i])] = i == 0 ? synthetic_text(spec.id, label, rng) : "more";
    }
    contents[row.file] += record.dump() + "\n";
  }
  for (std::size_t f = 0; f < spec.files.size(); ++f) write_file_atomic(dir / spec.files[f].path, contents[f]);
}

void write_directory(const DatasetSpec& spec, const fs::path& dir, const std::vector<FixtureRow>& rows, Rng& rng) {
  if (spec.layout_template.empty()) {
    throw ConfigError("dataset " + std::string(dataset_key(spec.id)) + ": fixture needs layout_template");
  }
  const std::regex pattern(spec.path_pattern, std::regex::ECMAScript);
  for (const auto& row : rows) {
    const std::string rel = fill_template(spec.layout_template, row.original_label, row.number);
    if (!std::regex_match(rel, pattern)) {
      throw ConfigError("dataset " + std::string(dataset_key(spec.id)) + ": layout_template yields '" + rel +
                        "' which path_pattern rejects");
    }
    const Label label = row.dropped ? Label::kNonDeceptive : spec.label_map.map(row.original_label);
    const std::string text = synthetic_text(spec.id, label, rng);
    std::string content;
    if (spec.file_text_field.empty()) {
      content = "Subject: " + text + "\n" + text + "\n";
    } else {
      ordered_json doc;
      doc["id"] = 100000 + row.number;
      doc[spec.file_text_field] = text;
      content = doc.dump();
    }
    write_file_atomic(dir / rel, content);
  }
  // A file outside the pattern must be ignored by ingestion.
  write_file_atomic(dir / "README.txt", "fixture data\n");
}

}  // namespace

void write_fixture_raw(const DatasetCatalog& catalog, const fs::path& raw_root, std::uint64_t seed,
                       FixtureScale scale) {
  for (const auto& spec : catalog.specs()) {
    Rng rng(derive_seed(seed, dataset_key(spec.id)));
    const fs::path dir = raw_root / spec.raw_subdir;
    fs::create_directories(dir);
    const auto rows = plan_rows(spec, targets_for(spec, catalog, scale));
    switch (spec.format) {
      case RawFormat::kDelimited: write_delimited(spec, dir, rows, rng); break;
      case RawFormat::kStructuredRecord: write_structured(spec, dir, rows, rng); break;
      case RawFormat::kDirectoryOfFiles: write_directory(spec, dir, rows, rng); break;
    }
  }
}

DatasetCatalog fixture_catalog(const DatasetCatalog& catalog) {
  std::vector<DatasetSpec> specs = catalog.specs();
  std::map<std::string, std::size_t> group_totals;
  for (auto& spec : specs) {
    ExpectedCounts expected;
    std::size_t total = 0;
    std::size_t deceptive = 0;
    for (const auto& row : plan_rows(spec, targets_for(spec, catalog, FixtureScale::kMini))) {
      if (row.dropped) continue;
      ++total;
      if (spec.label_map.map(row.original_label) == Label::kDeceptive) ++deceptive;
      if (spec.provided_splits) ++expected.per_split[*spec.files[row.file].split];
    }
    expected.total = total;
    expected.deceptive = deceptive;
    expected.non_deceptive = total - deceptive;
    spec.expected = expected;
    if (!spec.count_group.empty()) group_totals[spec.count_group] += total;
  }
  for (auto& spec : specs) {
    if (!spec.count_group.empty()) spec.group_expected_total = group_totals[spec.count_group];
  }
  return DatasetCatalog(std::move(specs));
}

}  // namespace deceptkit::corpus
