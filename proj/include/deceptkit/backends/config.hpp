#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace deceptkit::backends {

enum class BackendKind { kCharCnn, kTransformerFinetune, kSentenceEncoderHead };

inline constexpr BackendKind kAllBackends[] = {BackendKind::kCharCnn, BackendKind::kTransformerFinetune,
                                               BackendKind::kSentenceEncoderHead};

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);
// Short column label used in reports.
std::string_view display_name(BackendKind kind);

inline constexpr std::size_t kMaxEncoderTokens = 512;

// Hyperparameters are a JSON object holding every key of the backend's
// defaults; `grid` maps some of those keys to finite candidate lists.
struct BackendConfig {
  BackendKind kind = BackendKind::kCharCnn;
  nlohmann::json hyperparams = nlohmann::json::object();
  nlohmann::json grid = nlohmann::json::object();
  std::size_t max_token_limit = kMaxEncoderTokens;
  std::uint64_t seed = 0;

  static BackendConfig defaults(BackendKind kind);

  // Defaults for `kind` with `j` merged over them. Unknown hyperparameter
  // keys and empty or non-list grid entries are rejected.
  static BackendConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Copy with hyperparameters replaced by the given grid point.
  BackendConfig with(const nlohmann::json& overrides) const;

  // Cartesian product of the grid in key order (last key varies fastest).
  // An empty grid yields a single empty point.
  std::vector<nlohmann::json> grid_points() const;

  template <typename T>
  T get(const std::string& key) const {
    return hyperparams.at(key).get<T>();
  }
};

}  // namespace deceptkit::backends
