#include "deceptkit/analysis/audit.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "deceptkit/common/csv.hpp"
#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/common/rng.hpp"
#include "deceptkit/common/unicode.hpp"

namespace deceptkit::analysis {

namespace {

// Predicted label of every sample, in sample order.
std::vector<Label> align(std::span<const LabeledPrediction> predictions, std::span<const corpus::TextSample> samples) {
  std::map<std::string, Label> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.sample_id, p.predicted).second) {
      throw DataError("sample '" + p.sample_id + "' is predicted twice");
    }
  }
  if (by_id.size() != samples.size()) {
    throw DataError(fmt::format("{} predictions for {} samples", by_id.size(), samples.size()));
  }
  std::vector<Label> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const auto it = by_id.find(s.id);
    if (it == by_id.end()) throw DataError("no prediction for sample '" + s.id + "'");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

bool contains_word(std::string_view text, std::string_view keyword) {
  const auto hay = unicode::decode_utf8(unicode::lowercase_strip_accents(text));
  const auto needle = unicode::decode_utf8(unicode::lowercase_strip_accents(keyword));
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (std::size_t start = 0; start + needle.size() <= hay.size(); ++start) {
    if (!std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(start))) continue;
    const bool left = start == 0 || !unicode::is_alphanumeric(hay[start - 1]);
    const std::size_t end = start + needle.size();
    const bool right = end == hay.size() || !unicode::is_alphanumeric(hay[end]);
    if (left && right) return true;
  }
  return false;
}

std::vector<KeywordFprRow> fpr_by_keyword(std::span<const LabeledPrediction> predictions,
                                          std::span<const corpus::TextSample> samples,
                                          std::span<const std::string> keywords) {
  if (keywords.empty()) throw ConfigError("the keyword audit needs at least one keyword");
  const auto predicted = align(predictions, samples);
  std::size_t negatives = 0;
  std::size_t false_positives = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].label != Label::kNonDeceptive) continue;
    ++negatives;
    false_positives += predicted[i] == Label::kDeceptive ? 1 : 0;
  }
  const double baseline = negatives == 0 ? 0.0 : static_cast<double>(false_positives) / static_cast<double>(negatives);

  std::vector<KeywordFprRow> rows;
  for (const auto& keyword : keywords) {
    KeywordFprRow row;
    row.keyword = keyword;
    row.baseline_fpr = baseline;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].label != Label::kNonDeceptive || !contains_word(samples[i].text, keyword)) continue;
      ++row.matched_negatives;
      row.false_positives += predicted[i] == Label::kDeceptive ? 1 : 0;
    }
    row.undefined = row.matched_negatives == 0;
    row.fpr = row.undefined ? 0.0
                            : static_cast<double>(row.false_positives) / static_cast<double>(row.matched_negatives);
    rows.push_back(row);
  }
  return rows;
}

void write_keyword_table(std::span<const KeywordFprRow> rows, const std::filesystem::path& csv) {
  std::ostringstream out;
  out << "keyword,matched_negatives,false_positives,fpr,undefined,baseline_fpr\n";
  for (const auto& r : rows) {
    out << csv_escape(r.keyword) << ',' << r.matched_negatives << ',' << r.false_positives << ','
        << (r.undefined ? std::string() : fmt::format("{:.6f}", r.fpr)) << ',' << (r.undefined ? "true" : "false")
        << ',' << fmt::format("{:.6f}", r.baseline_fpr) << '\n';
  }
  write_file_atomic(csv, out.str());
}

std::string_view to_string(ErrorType type) {
  return type == ErrorType::kFalsePositive ? "false_positive" : "false_negative";
}

ErrorType parse_error_type(std::string_view text) {
  if (text == "false_positive") return ErrorType::kFalsePositive;
  if (text == "false_negative") return ErrorType::kFalseNegative;
  throw ConfigError("error type must be false_positive or false_negative, got '" + std::string(text) + "'");
}

std::vector<ErrorSample> sample_errors(std::span<const LabeledPrediction> predictions,
                                       std::span<const corpus::TextSample> samples, ErrorType type, std::size_t k,
                                       std::uint64_t seed) {
  if (k == 0) throw ConfigError("error sampling needs k >= 1");
  const auto predicted = align(predictions, samples);
  const Label gold_label = type == ErrorType::kFalsePositive ? Label::kNonDeceptive : Label::kDeceptive;
  std::vector<std::size_t> matching;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].label == gold_label && predicted[i] != gold_label) matching.push_back(i);
  }
  if (matching.size() > k) {
    Rng rng(derive_seed(seed, "sample_errors"));
    rng.shuffle(std::span<std::size_t>(matching));
    matching.resize(k);
    std::sort(matching.begin(), matching.end());
  }
  std::vector<ErrorSample> out;
  for (std::size_t i : matching) out.push_back({samples[i].id, samples[i].text, samples[i].label, predicted[i]});
  return out;
}

void write_error_samples(std::span<const ErrorSample> errors, const std::filesystem::path& csv) {
  std::ostringstream out;
  out << "sample_id,gold,predicted,text\n";
  for (const auto& e : errors) {
    out << csv_escape(e.sample_id) << ',' << to_string(e.gold) << ',' << to_string(e.predicted) << ','
        << csv_escape(e.text) << '\n';
  }
  write_file_atomic(csv, out.str());
}

}  // namespace deceptkit::analysis
