#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "deceptkit/corpus/types.hpp"

namespace deceptkit::corpus {

inline constexpr int kCorpusFormatVersion = 1;

struct CorpusManifestExtras {
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::map<std::string, std::string>> raw_checksums;  // dataset -> file -> sha256
};

// Writes the corpus as JSON lines sorted by id (a header record first) and
// a sidecar "<path>.manifest.json" with counts, seeds and checksums. The
// output is byte-identical for equal corpora.
void export_corpus(const Corpus& corpus, const std::filesystem::path& path, const CorpusManifestExtras& extras = {});

// Throws FormatError on a version mismatch, a malformed or truncated file,
// or a checksum mismatch against the sidecar manifest when one exists.
Corpus load_corpus(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& corpus_path);

}  // namespace deceptkit::corpus
