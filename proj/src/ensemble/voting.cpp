#include "deceptkit/ensemble/voting.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <spdlog/spdlog.h>

#include "deceptkit/common/error.hpp"

namespace deceptkit::ensemble {

using backends::ProbabilityPrediction;
using nlohmann::json;

namespace {

constexpr double kNormTolerance = 1e-6;

void check_members(std::span<const ProbabilityPrediction> members, const VoteOptions& options) {
  if (members.size() < 2) throw DataError("an ensemble vote needs at least two members");
  for (const auto& m : members) {
    if (m.sample_id != members.front().sample_id) {
      throw DataError("ensemble members disagree on the sample: '" + members.front().sample_id + "' vs '" +
                      m.sample_id + "'");
    }
    const double sum = m.probs[0] + m.probs[1];
    if (!(m.probs[0] >= 0.0 && m.probs[1] >= 0.0) || std::abs(sum - 1.0) > kNormTolerance) {
      throw DataError("member " + std::string(backends::to_string(m.backend)) + " for '" + m.sample_id +
                      "' is not a probability distribution (sum " + std::to_string(sum) + ")");
    }
  }
  if (!options.weights.empty()) {
    if (options.weights.size() != members.size()) {
      throw ConfigError("ensemble has " + std::to_string(members.size()) + " members but " +
                        std::to_string(options.weights.size()) + " weights");
    }
    double total = 0.0;
    for (double w : options.weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("ensemble weights must be finite and non-negative");
      total += w;
    }
    if (total <= 0.0) throw ConfigError("ensemble weights sum to zero");
  }
}

double weight_of(const VoteOptions& options, std::size_t i) { return options.weights.empty() ? 1.0 : options.weights[i]; }

// Terms are summed in sorted order so that the result does not depend on
// member order.
double ordered_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum;
}

ClassProbs weighted_mean(std::span<const ProbabilityPrediction> members, const VoteOptions& options) {
  std::vector<double> non, dec, weights;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const double w = weight_of(options, i);
    non.push_back(w * members[i].probs[0]);
    dec.push_back(w * members[i].probs[1]);
    weights.push_back(w);
  }
  const double total = ordered_sum(weights);
  return {ordered_sum(non) / total, ordered_sum(dec) / total};
}

}  // namespace

std::string_view to_string(VoteMode mode) { return mode == VoteMode::kSoft ? "soft" : "hard"; }

VoteMode parse_vote_mode(std::string_view text) {
  if (text == "soft") return VoteMode::kSoft;
  if (text == "hard") return VoteMode::kHard;
  throw ConfigError("vote mode must be 'soft' or 'hard', got '" + std::string(text) + "'");
}

TiePolicy parse_tie_policy(std::string_view text) {
  if (text == "non_deceptive") return TiePolicy::kNonDeceptive;
  if (text == "deceptive") return TiePolicy::kDeceptive;
  throw ConfigError("tie policy must be 'non_deceptive' or 'deceptive', got '" + std::string(text) + "'");
}

Label decide(const ClassProbs& probs, TiePolicy policy, bool* tie) {
  if (tie != nullptr) *tie = false;
  if (probs[1] > probs[0]) return Label::kDeceptive;
  if (probs[0] > probs[1]) return Label::kNonDeceptive;
  if (tie != nullptr) *tie = true;
  const Label label = policy == TiePolicy::kNonDeceptive ? Label::kNonDeceptive : Label::kDeceptive;
  spdlog::debug("ensemble tie [{}, {}] resolved to {}", probs[0], probs[1], to_string(label));
  return label;
}

EnsemblePrediction soft_vote(std::span<const ProbabilityPrediction> members, const VoteOptions& options) {
  check_members(members, options);
  EnsemblePrediction out;
  out.sample_id = members.front().sample_id;
  out.members.assign(members.begin(), members.end());
  out.mode = VoteMode::kSoft;
  out.combined = weighted_mean(members, options);
  out.label = decide(out.combined, options.tie_policy, &out.tie);
  return out;
}

EnsemblePrediction hard_vote(std::span<const ProbabilityPrediction> members, const VoteOptions& options) {
  check_members(members, options);
  EnsemblePrediction out;
  out.sample_id = members.front().sample_id;
  out.members.assign(members.begin(), members.end());
  out.mode = VoteMode::kHard;
  ClassProbs votes{};
  double total = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const double w = weight_of(options, i);
    votes[class_index(decide(members[i].probs, options.tie_policy))] += w;
    total += w;
  }
  out.combined = {votes[0] / total, votes[1] / total};
  if (std::abs(votes[0] - votes[1]) <= 1e-12 * total) {
    // Both classes hold the same vote mass, so every member is part of the
    // tie and the soft vote over all of them decides.
    out.label = decide(weighted_mean(members, options), options.tie_policy, &out.tie);
  } else {
    out.label = votes[1] > votes[0] ? Label::kDeceptive : Label::kNonDeceptive;
  }
  return out;
}

EnsemblePrediction vote(std::span<const ProbabilityPrediction> members, VoteMode mode, const VoteOptions& options) {
  return mode == VoteMode::kSoft ? soft_vote(members, options) : hard_vote(members, options);
}

EnsembleBatch combine(std::span<const std::vector<ProbabilityPrediction>> member_sets, VoteMode mode,
                      const VoteOptions& options) {
  if (member_sets.size() < 2) throw DataError("an ensemble needs at least two member prediction sets");
  std::vector<std::map<std::string, const ProbabilityPrediction*>> index(member_sets.size());
  for (std::size_t m = 0; m < member_sets.size(); ++m) {
    for (const auto& p : member_sets[m]) {
      if (!index[m].emplace(p.sample_id, &p).second) {
        throw DataError("member set " + std::to_string(m) + " predicts '" + p.sample_id + "' twice");
      }
    }
    if (member_sets[m].size() != member_sets.front().size()) {
      throw DataError("member set " + std::to_string(m) + " has " + std::to_string(member_sets[m].size()) +
                      " predictions, expected " + std::to_string(member_sets.front().size()));
    }
  }
  EnsembleBatch out;
  out.predictions.reserve(member_sets.front().size());
  std::vector<ProbabilityPrediction> members(member_sets.size());
  for (const auto& first : member_sets.front()) {
    for (std::size_t m = 0; m < member_sets.size(); ++m) {
      const auto it = index[m].find(first.sample_id);
      if (it == index[m].end()) {
        throw DataError("member set " + std::to_string(m) + " has no prediction for '" + first.sample_id + "'");
      }
      members[m] = *it->second;
    }
    out.predictions.push_back(vote(members, mode, options));
    out.ties += out.predictions.back().tie ? 1 : 0;
  }
  if (out.ties > 0) spdlog::info("ensemble: {} of {} decisions were ties", out.ties, out.predictions.size());
  return out;
}

EnsembleBatch revote(std::span<const EnsemblePrediction> records, VoteMode mode, const VoteOptions& options) {
  EnsembleBatch out;
  out.predictions.reserve(records.size());
  for (const auto& r : records) {
    out.predictions.push_back(vote(r.members, mode, options));
    out.ties += out.predictions.back().tie ? 1 : 0;
  }
  return out;
}

json EnsemblePrediction::to_json() const {
  json members_json = json::array();
  for (const auto& m : members) {
    members_json.push_back({{"backend", backends::to_string(m.backend)}, {"probs", {m.probs[0], m.probs[1]}}});
  }
  return {{"sample_id", sample_id},
          {"mode", ensemble::to_string(mode)},
          {"combined", {combined[0], combined[1]}},
          {"label", deceptkit::to_string(label)},
          {"tie", tie},
          {"members", members_json}};
}

EnsemblePrediction EnsemblePrediction::from_json(const json& j) {
  try {
    EnsemblePrediction p;
    p.sample_id = j.at("sample_id").get<std::string>();
    p.mode = parse_vote_mode(j.at("mode").get<std::string>());
    const auto combined = j.at("combined").get<std::vector<double>>();
    if (combined.size() != kNumClasses) throw FormatError("combined must hold two probabilities");
    p.combined = {combined[0], combined[1]};
    p.label = parse_label(j.at("label").get<std::string>());
    p.tie = j.value("tie", false);
    for (const auto& m : j.at("members")) {
      const auto probs = m.at("probs").get<std::vector<double>>();
      if (probs.size() != kNumClasses) throw FormatError("member probs must hold two probabilities");
      p.members.push_back({p.sample_id, {probs[0], probs[1]},
                           backends::parse_backend_kind(m.at("backend").get<std::string>())});
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ensemble record: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("ensemble record: ") + e.what());
  }
}

}  // namespace deceptkit::ensemble
