#include "deceptkit/corpus/label_map.hpp"

#include <cctype>
#include <set>

#include "deceptkit/common/error.hpp"

namespace deceptkit::corpus {

std::string LabelMap::canonical(std::string_view label) {
  std::size_t begin = 0;
  std::size_t end = label.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(label[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(label[end - 1]))) --end;
  std::string out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    char c = label[i];
    if (c == '-' || c == '_' || c == ' ') c = ' ';
    else if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

LabelMap::LabelMap(DatasetId dataset, std::vector<LabelRule> rules, std::vector<std::string> drop_rules)
    : dataset_(dataset), rules_(std::move(rules)), drop_rules_(std::move(drop_rules)) {
  std::set<std::string> seen;
  auto check = [&](const std::string& pattern) {
    if (!seen.insert(canonical(pattern)).second) {
      throw ConfigError("label map for " + std::string(dataset_key(dataset_)) + " lists '" + pattern + "' twice");
    }
  };
  for (const auto& rule : rules_) check(rule.pattern);
  for (const auto& pattern : drop_rules_) check(pattern);
}

std::optional<Label> LabelMap::resolve(std::string_view original_label) const {
  const std::string key = canonical(original_label);
  for (const auto& rule : rules_) {
    if (canonical(rule.pattern) == key) return rule.label;
  }
  for (const auto& pattern : drop_rules_) {
    if (canonical(pattern) == key) return std::nullopt;
  }
  throw LabelMapError("dataset " + std::string(dataset_key(dataset_)) + ": no label rule for '" +
                      std::string(original_label) + "'");
}

Label LabelMap::map(std::string_view original_label) const {
  const auto label = resolve(original_label);
  if (!label) {
    throw LabelMapError("dataset " + std::string(dataset_key(dataset_)) + ": label '" + std::string(original_label) +
                        "' is excluded by a drop rule");
  }
  return *label;
}

}  // namespace deceptkit::corpus
