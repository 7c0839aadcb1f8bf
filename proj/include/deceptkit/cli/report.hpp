#pragma once

#include <string>

#include <json.hpp>

#include "deceptkit/cli/registry.hpp"

namespace deceptkit::cli {

// Markdown summary of a complete run from its result.json document. General
// runs get one row per dataset plus the pooled total, with Char-CNN, SBERT,
// BERT and Ensemble accuracy/F1 column pairs (absent models show "n/a").
// New-event runs get mean F1 per fraction and model plus the improvement
// from 0% to the next fraction.
std::string render_report(const RunEntry& entry, const nlohmann::json& result_doc);

}  // namespace deceptkit::cli
