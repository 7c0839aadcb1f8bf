#include "deceptkit/backends/model_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "deceptkit/common/csv.hpp"
#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/common/hash.hpp"
#include "deceptkit/nn/safetensors.hpp"

namespace deceptkit::backends {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kFormatName = "deceptkit.model";
constexpr const char* kHistoryHeader = "epoch,train_loss,train_accuracy,val_f1,eval_train_accuracy,learning_rate";

std::string optional_cell(const std::optional<double>& v) { return v ? fmt::format("{:.17g}", *v) : ""; }

std::vector<EpochRecord> parse_history(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing " + path.string());
  DelimitedReader reader(in, ',', true);
  std::vector<std::string> row;
  if (!reader.next(row)) throw FormatError(path.string() + ": empty history");
  std::vector<EpochRecord> history;
  auto optional_value = [](const std::string& cell) -> std::optional<double> {
    if (cell.empty()) return std::nullopt;
    return std::stod(cell);
  };
  while (reader.next(row)) {
    if (row.size() != 6) throw FormatError(fmt::format("{}:{}: expected 6 columns", path.string(), reader.record_line()));
    try {
      history.push_back({std::stoi(row[0]), std::stod(row[1]), std::stod(row[2]), optional_value(row[3]),
                         optional_value(row[4]), std::stod(row[5])});
    } catch (const std::logic_error&) {
      throw FormatError(fmt::format("{}:{}: malformed number", path.string(), reader.record_line()));
    }
  }
  return history;
}

}  // namespace

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = std::string(kHistoryHeader) + "\n";
  for (const auto& r : history) {
    out += fmt::format("{},{:.17g},{:.17g},{},{},{:.17g}\n", r.epoch, r.train_loss, r.train_accuracy,
                       optional_cell(r.val_f1), optional_cell(r.eval_train_accuracy), r.learning_rate);
  }
  return out;
}

void export_model(const TrainedModel& model, const fs::path& dir) {
  const fs::path staging = dir.string() + ".partial";
  fs::remove_all(staging);
  fs::create_directories(staging);

  const auto& params = model.classifier().parameters().all();
  std::vector<nn::NamedTensor> tensors;
  tensors.reserve(params.size());
  for (const auto& p : params) tensors.push_back({p->name, &p->value});
  write_safetensors(staging / "weights.safetensors", tensors, {{"backend_kind", std::string(to_string(model.kind()))}});
  model.classifier().save_assets(staging);
  write_file_atomic(staging / "history.csv", history_csv(model.history()));

  ordered_json meta;
  meta["format"] = kFormatName;
  meta["version"] = kModelFormatVersion;
  meta["backend_kind"] = to_string(model.kind());
  meta["config"] = model.config().to_json();
  meta["architecture"] = model.classifier().architecture();
  meta["corpus_fingerprint"] = model.corpus_fingerprint();
  meta["best_epoch"] = model.best_epoch();
  meta["weights_sha256"] = sha256_file(staging / "weights.safetensors");
  write_file_atomic(staging / "model.json", meta.dump(2) + "\n");

  fs::remove_all(dir);
  if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
  fs::rename(staging, dir);
}

TrainedModel load_model(const fs::path& dir, std::optional<BackendKind> expected) {
  if (!fs::exists(dir / "model.json")) throw FormatError(dir.string() + " is not a model directory (no model.json)");
  json meta;
  try {
    meta = json::parse(read_file(dir / "model.json"));
  } catch (const json::exception& e) {
    throw FormatError((dir / "model.json").string() + ": " + e.what());
  }
  if (meta.value("format", "") != kFormatName) throw FormatError(dir.string() + ": not a deceptkit model");
  if (meta.value("version", -1) != kModelFormatVersion) {
    throw FormatError(dir.string() + ": model format version " + meta.value("version", json()).dump() +
                      " is not supported (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  const BackendKind kind = parse_backend_kind(meta.at("backend_kind").get<std::string>());
  if (expected && *expected != kind) {
    throw UnsupportedBackendError(dir.string() + " holds a " + std::string(to_string(kind)) + " model, expected " +
                                  std::string(to_string(*expected)));
  }
  const BackendConfig config = BackendConfig::from_json(meta.at("config"));
  if (config.kind != kind) throw FormatError(dir.string() + ": configuration and backend kind disagree");

  const fs::path weights = dir / "weights.safetensors";
  if (!fs::exists(weights)) throw FormatError(dir.string() + ": missing weights.safetensors");
  if (sha256_file(weights) != meta.at("weights_sha256").get<std::string>()) {
    throw FormatError(dir.string() + ": weights checksum does not match model.json");
  }

  std::shared_ptr<Classifier> net = restore_classifier(kind, meta.at("architecture"), dir);
  nn::SafetensorsReader reader(weights);
  std::set<std::string> expected_names;
  for (const auto& p : net->parameters().all()) {
    expected_names.insert(p->name);
    if (!reader.contains(p->name)) {
      throw FormatError(dir.string() + ": weights lack tensor '" + p->name + "' required by the configuration");
    }
    nn::Matrix value = reader.read(p->name);
    if (value.rows() != p->value.rows() || value.cols() != p->value.cols()) {
      throw FormatError(fmt::format("{}: tensor '{}' is {}x{}, configuration needs {}x{}", dir.string(), p->name,
                                    value.rows(), value.cols(), p->value.rows(), p->value.cols()));
    }
    p->value = std::move(value);
  }
  for (const auto& name : reader.names()) {
    if (expected_names.count(name) == 0) {
      throw FormatError(dir.string() + ": weights contain tensor '" + name + "' unknown to the configuration");
    }
  }
  return TrainedModel(config, std::move(net), parse_history(dir / "history.csv"),
                      meta.at("corpus_fingerprint").get<std::string>(), meta.at("best_epoch").get<int>());
}

}  // namespace deceptkit::backends
