#pragma once

#include <string>
#include <vector>

#include "deceptkit/common/rng.hpp"
#include "deceptkit/corpus/types.hpp"

namespace deceptkit::testing {

// Short texts whose label is signalled by topic words, alternating labels.
inline std::vector<corpus::TextSample> synthetic_samples(std::size_t n, std::uint64_t seed,
                                                         const std::string& prefix = "syn") {
  static const std::vector<std::string> deceptive = {"free", "prize", "winner", "claim", "cash", "urgent", "bonus",
                                                     "offer"};
  static const std::vector<std::string> honest = {"meeting", "agenda", "report", "notes", "schedule", "project",
                                                  "review", "budget"};
  static const std::vector<std::string> filler = {"the", "a", "today", "please", "team", "for", "now", "our"};
  Rng rng(seed);
  std::vector<corpus::TextSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_deceptive = i % 2 == 1;
    const auto& topic = is_deceptive ? deceptive : honest;
    std::string text;
    const std::size_t words = 5 + rng.uniform_index(5);
    for (std::size_t w = 0; w < words; ++w) {
      const auto& pool = rng.uniform() < 0.6 ? topic : filler;
      if (!text.empty()) text += ' ';
      text += pool[rng.uniform_index(pool.size())];
    }
    corpus::TextSample s;
    s.id = prefix + ":" + std::to_string(i);
    s.text = text;
    s.label = is_deceptive ? Label::kDeceptive : Label::kNonDeceptive;
    s.original_label = is_deceptive ? "spam" : "ham";
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace deceptkit::testing
