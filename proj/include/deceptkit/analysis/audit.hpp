#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deceptkit/analysis/metrics.hpp"
#include "deceptkit/corpus/types.hpp"

namespace deceptkit::analysis {

inline const std::vector<std::string> kDefaultAuditKeywords = {"trump", "obama", "gates"};

// Case-insensitive (accent-folded) match of `keyword` in `text` bounded by
// non-alphanumeric characters or the ends of the text.
bool contains_word(std::string_view text, std::string_view keyword);

struct KeywordFprRow {
  std::string keyword;
  std::size_t matched_negatives = 0;
  std::size_t false_positives = 0;
  double fpr = 0.0;
  bool undefined = false;  // no gold-negative sample contains the keyword
  double baseline_fpr = 0.0;
};

// False-positive rate among gold-negative samples whose text contains each
// keyword, next to the FPR over all gold negatives. Every sample needs
// exactly one prediction.
std::vector<KeywordFprRow> fpr_by_keyword(std::span<const LabeledPrediction> predictions,
                                          std::span<const corpus::TextSample> samples,
                                          std::span<const std::string> keywords);

void write_keyword_table(std::span<const KeywordFprRow> rows, const std::filesystem::path& csv);

enum class ErrorType { kFalsePositive, kFalseNegative };

std::string_view to_string(ErrorType type);
ErrorType parse_error_type(std::string_view text);

struct ErrorSample {
  std::string sample_id;
  std::string text;
  Label gold = Label::kNonDeceptive;
  Label predicted = Label::kNonDeceptive;
};

// Uniform sample of k misclassifications of the given type, without
// replacement, in corpus order. Returns all of them when fewer exist.
std::vector<ErrorSample> sample_errors(std::span<const LabeledPrediction> predictions,
                                       std::span<const corpus::TextSample> samples, ErrorType type, std::size_t k,
                                       std::uint64_t seed);

void write_error_samples(std::span<const ErrorSample> errors, const std::filesystem::path& csv);

}  // namespace deceptkit::analysis
