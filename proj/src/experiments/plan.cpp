#include "deceptkit/experiments/plan.hpp"

#include <algorithm>
#include <set>

#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"

namespace deceptkit::experiments {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (allowed.count(key) == 0) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

void validate(const ExperimentPlan& plan) {
  if (plan.name.empty()) throw ConfigError("plan: name must not be empty");
  if (plan.corpus.empty()) throw ConfigError("plan: corpus path must not be empty");
  if (plan.backends.empty()) throw ConfigError("plan: at least one backend is required");
  std::set<backends::BackendKind> kinds;
  for (const auto& b : plan.backends) {
    if (!kinds.insert(b.kind).second) {
      throw ConfigError("plan: backend " + std::string(backends::to_string(b.kind)) + " listed twice");
    }
  }
  if (plan.seeds.empty()) throw ConfigError("plan: at least one seed is required");
  if (std::set<std::uint64_t>(plan.seeds.begin(), plan.seeds.end()).size() != plan.seeds.size()) {
    throw ConfigError("plan: seeds must be distinct");
  }
  if (plan.cv_folds < 2) throw ConfigError("plan: cv_folds must be at least 2");
  const auto& weights = plan.ensemble.options.weights;
  if (!weights.empty() && weights.size() != plan.backends.size()) {
    throw ConfigError("plan: ensemble has " + std::to_string(weights.size()) + " weights for " +
                      std::to_string(plan.backends.size()) + " backends");
  }
  if (plan.protocol == Protocol::kNewEvent) {
    const auto& f = plan.new_event.fractions;
    if (f.empty()) throw ConfigError("plan: new_event.fractions must not be empty");
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i] < 0 || f[i] > 100) throw ConfigError("plan: fractions are percentages between 0 and 100");
      if (i > 0 && f[i] <= f[i - 1]) throw ConfigError("plan: fractions must be sorted ascending without repeats");
    }
    if (plan.new_event.event_tag.empty()) throw ConfigError("plan: new_event.event_tag must not be empty");
    const double v = plan.new_event.validation_fraction;
    if (!(v >= 0.0 && v < 1.0)) throw ConfigError("plan: validation_fraction must be in [0, 1)");
  }
}

}  // namespace

std::string_view to_string(Protocol protocol) { return protocol == Protocol::kGeneral ? "general" : "new_event"; }

Protocol parse_protocol(std::string_view text) {
  if (text == "general") return Protocol::kGeneral;
  if (text == "new_event") return Protocol::kNewEvent;
  throw ConfigError("protocol must be 'general' or 'new_event', got '" + std::string(text) + "'");
}

ExperimentPlan ExperimentPlan::from_json(const json& j) {
  try {
    reject_unknown(j,
                   {"schema_version", "name", "protocol", "corpus", "catalog", "backends", "seeds", "cross_validate",
                    "cv_folds", "ensemble", "new_event", "save_models"},
                   "plan");
    const int version = j.value("schema_version", 0);
    if (version != kPlanSchemaVersion) {
      throw ConfigError("plan: schema_version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kPlanSchemaVersion) + ")");
    }
    ExperimentPlan plan;
    plan.name = j.at("name").get<std::string>();
    plan.protocol = parse_protocol(j.at("protocol").get<std::string>());
    plan.corpus = j.at("corpus").get<std::string>();
    plan.catalog = j.value("catalog", std::string("config/datasets.json"));
    for (const auto& b : j.at("backends")) plan.backends.push_back(backends::BackendConfig::from_json(b));
    if (j.contains("seeds")) plan.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    plan.cross_validate = j.value("cross_validate", false);
    plan.cv_folds = j.value("cv_folds", plan.cv_folds);
    plan.save_models = j.value("save_models", false);
    if (j.contains("ensemble")) {
      const json& e = j["ensemble"];
      reject_unknown(e, {"enabled", "mode", "weights", "tie_policy"}, "plan.ensemble");
      plan.ensemble.enabled = e.value("enabled", true);
      plan.ensemble.mode = ensemble::parse_vote_mode(e.value("mode", std::string("soft")));
      plan.ensemble.options.weights = e.value("weights", std::vector<double>{});
      plan.ensemble.options.tie_policy = ensemble::parse_tie_policy(e.value("tie_policy", std::string("non_deceptive")));
    }
    if (j.contains("new_event")) {
      const json& n = j["new_event"];
      reject_unknown(n, {"event_tag", "fractions", "validation_fraction"}, "plan.new_event");
      plan.new_event.event_tag = n.value("event_tag", plan.new_event.event_tag);
      plan.new_event.fractions = n.value("fractions", plan.new_event.fractions);
      plan.new_event.validation_fraction = n.value("validation_fraction", plan.new_event.validation_fraction);
    }
    validate(plan);
    return plan;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
}

ExperimentPlan ExperimentPlan::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json ExperimentPlan::to_json() const {
  json b = json::array();
  for (const auto& c : backends) b.push_back(c.to_json());
  const char* tie = ensemble.options.tie_policy == ensemble::TiePolicy::kNonDeceptive ? "non_deceptive" : "deceptive";
  return {{"schema_version", kPlanSchemaVersion},
          {"name", name},
          {"protocol", to_string(protocol)},
          {"corpus", corpus},
          {"catalog", catalog},
          {"backends", b},
          {"seeds", seeds},
          {"cross_validate", cross_validate},
          {"cv_folds", cv_folds},
          {"save_models", save_models},
          {"ensemble",
           {{"enabled", ensemble.enabled},
            {"mode", ensemble::to_string(ensemble.mode)},
            {"weights", ensemble.options.weights},
            {"tie_policy", tie}}},
          {"new_event",
           {{"event_tag", new_event.event_tag},
            {"fractions", new_event.fractions},
            {"validation_fraction", new_event.validation_fraction}}}};
}

std::vector<std::string> ExperimentPlan::model_names() const {
  std::vector<std::string> names;
  for (const auto& b : backends) names.emplace_back(backends::to_string(b.kind));
  if (has_ensemble()) names.emplace_back(kEnsembleModel);
  return names;
}

}  // namespace deceptkit::experiments
