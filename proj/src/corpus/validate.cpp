#include "deceptkit/corpus/validate.hpp"

#include <map>
#include <set>
#include <sstream>

#include "deceptkit/common/hash.hpp"
#include "deceptkit/corpus/ingest.hpp"

namespace deceptkit::corpus {

bool ValidationReport::counts_ok() const {
  for (const auto& row : datasets) {
    if (!row.mismatches.empty()) return false;
  }
  return group_mismatches.empty();
}

bool ValidationReport::clean() const { return counts_ok() && duplicate_ids.empty() && leakage.empty(); }

std::string ValidationReport::to_text() const {
  std::ostringstream out;
  out << "dataset                 total  deceptive  non_deceptive  status\n";
  for (const auto& row : datasets) {
    std::string name(dataset_key(row.dataset));
    name.resize(22, ' ');
    out << name << "  " << row.total << "  " << row.deceptive << "  " << row.non_deceptive << "  "
        << (row.mismatches.empty() ? "ok" : "MISMATCH") << "\n";
    for (const auto& m : row.mismatches) out << "    " << m << "\n";
  }
  for (const auto& m : group_mismatches) out << "group: " << m << "\n";
  if (!duplicate_ids.empty()) {
    out << "duplicate ids (" << duplicate_ids.size() << "):\n";
    for (const auto& id : duplicate_ids) out << "    " << id << "\n";
  }
  if (!leakage.empty()) {
    out << "train/test leakage (" << leakage.size() << " texts):\n";
    for (const auto& finding : leakage) {
      out << "    train:";
      for (const auto& id : finding.train_ids) out << " " << id;
      out << " | test:";
      for (const auto& id : finding.test_ids) out << " " << id;
      out << "\n";
    }
  }
  out << (clean() ? "validation: clean\n" : "validation: findings present\n");
  return out.str();
}

ValidationReport validate_corpus(const Corpus& corpus, const DatasetCatalog& catalog,
                                 const std::optional<SplitAssignment>& splits) {
  ValidationReport report;

  std::map<std::string, std::size_t> group_totals;
  std::map<std::string, std::size_t> group_expected;
  for (DatasetId id : kAllDatasets) {
    std::vector<TextSample> members;
    for (const auto* s : corpus.of_dataset(id)) members.push_back(*s);
    if (members.empty() && !catalog.contains(id)) continue;
    DatasetCountRow row;
    row.dataset = id;
    row.total = members.size();
    for (const auto& s : members) {
      if (s.label == Label::kDeceptive) ++row.deceptive;
    }
    row.non_deceptive = row.total - row.deceptive;
    if (catalog.contains(id)) {
      const auto& spec = catalog.spec(id);
      row.mismatches = check_expected_counts(spec, members);
      if (!spec.count_group.empty()) {
        group_totals[spec.count_group] += row.total;
        if (spec.group_expected_total) group_expected[spec.count_group] = *spec.group_expected_total;
      }
    }
    report.datasets.push_back(std::move(row));
  }
  for (const auto& [group, expected] : group_expected) {
    const std::size_t actual = group_totals[group];
    if (actual != expected) {
      report.group_mismatches.push_back(group + ": total count " + std::to_string(actual) + " != expected " +
                                        std::to_string(expected));
    }
  }

  std::set<std::string> seen;
  std::set<std::string> duplicates;
  for (const auto& s : corpus.samples()) {
    if (!seen.insert(s.id).second) duplicates.insert(s.id);
  }
  report.duplicate_ids.assign(duplicates.begin(), duplicates.end());

  if (splits) {
    std::map<std::string, LeakageFinding> by_text;
    for (const auto& s : corpus.samples()) {
      const auto it = splits->splits.find(s.id);
      if (it == splits->splits.end() || it->second == Split::kVal) continue;
      auto& finding = by_text[s.text];
      if (it->second == Split::kTrain) finding.train_ids.push_back(s.id);
      else finding.test_ids.push_back(s.id);
    }
    for (auto& [text, finding] : by_text) {
      if (finding.train_ids.empty() || finding.test_ids.empty()) continue;
      finding.text_sha256 = sha256_hex(text);
      report.leakage.push_back(std::move(finding));
    }
  }
  return report;
}

}  // namespace deceptkit::corpus
