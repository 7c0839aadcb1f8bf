#pragma once

#include <cstdint>
#include <filesystem>

#include "deceptkit/corpus/dataset_spec.hpp"

namespace deceptkit::corpus {

inline constexpr std::size_t kFixtureSamplesPerDataset = 50;

enum class FixtureScale {
  kMini,       // kFixtureSamplesPerDataset samples per dataset
  kPublished,  // the catalog's expected totals and class counts
};

// Writes a synthetic raw corpus under `raw_root` using the same file layout
// and raw formats as the real datasets described by `catalog`, so the real
// ingestion recipes run unchanged against it. Texts are generated; only the
// shapes and label distributions follow the catalog.
void write_fixture_raw(const DatasetCatalog& catalog, const std::filesystem::path& raw_root, std::uint64_t seed,
                       FixtureScale scale = FixtureScale::kMini);

// Copy of `catalog` whose expected counts describe the mini fixture instead
// of the published datasets.
DatasetCatalog fixture_catalog(const DatasetCatalog& catalog);

}  // namespace deceptkit::corpus
