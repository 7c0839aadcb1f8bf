#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deceptkit/common/label.hpp"
#include "deceptkit/corpus/types.hpp"

namespace deceptkit::corpus {

struct LabelRule {
  std::string pattern;
  Label label;
};

// Maps a dataset's original label strings onto the binary schema.
//
// Patterns match case-insensitively after canonicalisation: surrounding
// whitespace is trimmed and '-', '_' and ' ' are treated as the same
// separator, so "Pants-on-Fire", "pants_on_fire" and "pants on fire" are one
// label. Rules are tried in order. A pattern may appear only once across
// rules and drop rules, so every label matches at most one entry.
class LabelMap {
 public:
  LabelMap() = default;
  // Throws ConfigError on a repeated pattern.
  LabelMap(DatasetId dataset, std::vector<LabelRule> rules, std::vector<std::string> drop_rules);

  DatasetId dataset() const { return dataset_; }
  const std::vector<LabelRule>& rules() const { return rules_; }
  const std::vector<std::string>& drop_rules() const { return drop_rules_; }

  // nullopt when the label is excluded by a drop rule. Throws LabelMapError
  // naming the label when nothing matches.
  std::optional<Label> resolve(std::string_view original_label) const;

  // Like resolve, but a dropped label is an error too.
  Label map(std::string_view original_label) const;

  static std::string canonical(std::string_view label);

 private:
  DatasetId dataset_ = DatasetId::kPheme;
  std::vector<LabelRule> rules_;
  std::vector<std::string> drop_rules_;
};

}  // namespace deceptkit::corpus
