#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "deceptkit/backends/model.hpp"
#include "deceptkit/common/label.hpp"

namespace deceptkit::ensemble {

enum class VoteMode { kSoft, kHard };

std::string_view to_string(VoteMode mode);
VoteMode parse_vote_mode(std::string_view text);

// Label given to an exact 0.5 / 0.5 split.
enum class TiePolicy { kNonDeceptive, kDeceptive };

TiePolicy parse_tie_policy(std::string_view text);

struct VoteOptions {
  // One non-negative weight per member; empty means uniform.
  std::vector<double> weights;
  TiePolicy tie_policy = TiePolicy::kNonDeceptive;
};

struct EnsemblePrediction {
  std::string sample_id;
  std::vector<backends::ProbabilityPrediction> members;
  // Soft: (weighted) mean of member probabilities. Hard: (weighted) vote
  // shares per class.
  ClassProbs combined{};
  VoteMode mode = VoteMode::kSoft;
  Label label = Label::kNonDeceptive;
  bool tie = false;  // the final decision needed the tie rule

  nlohmann::json to_json() const;
  static EnsemblePrediction from_json(const nlohmann::json& j);
};

// Argmax of a normalized two-class vector. An exact tie goes to the policy's
// label, is logged, and sets `tie`.
Label decide(const ClassProbs& probs, TiePolicy policy = TiePolicy::kNonDeceptive, bool* tie = nullptr);

// Members must number at least two, share one sample id and each sum to 1.
EnsemblePrediction soft_vote(std::span<const backends::ProbabilityPrediction> members, const VoteOptions& options = {});

// Majority of member argmax labels; an even split is decided by the soft
// vote of the members.
EnsemblePrediction hard_vote(std::span<const backends::ProbabilityPrediction> members, const VoteOptions& options = {});

EnsemblePrediction vote(std::span<const backends::ProbabilityPrediction> members, VoteMode mode,
                        const VoteOptions& options = {});

struct EnsembleBatch {
  std::vector<EnsemblePrediction> predictions;
  std::size_t ties = 0;
};

// Votes per sample over whole prediction sets. Every member set must cover
// the same sample ids; the output follows the first member's order.
EnsembleBatch combine(std::span<const std::vector<backends::ProbabilityPrediction>> member_sets, VoteMode mode,
                      const VoteOptions& options = {});

// Re-votes persisted records with a different mode or weights.
EnsembleBatch revote(std::span<const EnsemblePrediction> records, VoteMode mode, const VoteOptions& options = {});

}  // namespace deceptkit::ensemble
