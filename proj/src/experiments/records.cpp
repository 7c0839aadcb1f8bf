#include "deceptkit/experiments/records.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "deceptkit/common/csv.hpp"
#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"

namespace deceptkit::experiments {

namespace {

constexpr const char* kHeader = "sample_id,dataset,gold,p_non_deceptive,p_deceptive,predicted";

}  // namespace

void write_predictions(std::span<const PredictionRecord> records, const std::filesystem::path& csv) {
  std::ostringstream out;
  out << kHeader << '\n';
  for (const auto& r : records) {
    out << csv_escape(r.sample_id) << ',' << corpus::dataset_key(r.dataset) << ',' << to_string(r.gold) << ','
        << fmt::format("{:.17g},{:.17g}", r.probs[0], r.probs[1]) << ',' << to_string(r.predicted) << '\n';
  }
  if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());
  write_file_atomic(csv, out.str());
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw FormatError("cannot open " + csv.string());
  DelimitedReader reader(in, ',', true);
  std::vector<std::string> row;
  if (!reader.next(row) || fmt::format("{}", fmt::join(row, ",")) != kHeader) {
    throw FormatError(csv.string() + ": not a prediction file (bad header)");
  }
  std::vector<PredictionRecord> records;
  while (reader.next(row)) {
    if (row.size() != 6) {
      throw FormatError(fmt::format("{}:{}: expected 6 columns, got {}", csv.string(), reader.record_line(), row.size()));
    }
    try {
      PredictionRecord r;
      r.sample_id = row[0];
      r.dataset = corpus::parse_dataset_id(row[1]);
      r.gold = parse_label(row[2]);
      r.probs = {std::stod(row[3]), std::stod(row[4])};
      r.predicted = parse_label(row[5]);
      records.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError(fmt::format("{}:{}: malformed number", csv.string(), reader.record_line()));
    } catch (const Error& e) {
      throw FormatError(fmt::format("{}:{}: {}", csv.string(), reader.record_line(), e.what()));
    }
  }
  return records;
}

std::vector<analysis::LabeledPrediction> labeled(std::span<const PredictionRecord> records) {
  std::vector<analysis::LabeledPrediction> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.sample_id, r.predicted});
  return out;
}

std::map<std::string, Label> gold_of(std::span<const PredictionRecord> records) {
  std::map<std::string, Label> out;
  for (const auto& r : records) out[r.sample_id] = r.gold;
  return out;
}

std::map<corpus::DatasetId, std::vector<PredictionRecord>> by_dataset(std::span<const PredictionRecord> records) {
  std::map<corpus::DatasetId, std::vector<PredictionRecord>> out;
  for (const auto& r : records) out[r.dataset].push_back(r);
  return out;
}

}  // namespace deceptkit::experiments
