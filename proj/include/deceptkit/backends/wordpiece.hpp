#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace deceptkit::backends {

struct EncodedText {
  std::vector<int> ids;           // includes the classification and separator tokens
  std::vector<std::string> tokens;
  std::size_t full_length = 0;    // token count before truncation, special tokens included
  bool truncated = false;
};

// BERT-style tokenizer: text cleanup, CJK and punctuation splitting,
// optional lowercasing with accent stripping, then greedy longest-match
// word pieces with "##" continuation prefixes.
class WordPieceTokenizer {
 public:
  WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase);

  static WordPieceTokenizer from_file(const std::filesystem::path& vocab_txt, bool lowercase);

  // Builds a vocabulary from training texts: special tokens, every
  // character seen (as word start and as continuation), then the most
  // frequent words until `max_size` entries.
  static WordPieceTokenizer build(std::span<const std::string> texts, std::size_t max_size, bool lowercase);

  std::vector<std::string> basic_tokenize(std::string_view text) const;
  std::vector<std::string> tokenize(std::string_view text) const;

  // [CLS] pieces [SEP], truncated to max_tokens in total.
  EncodedText encode(std::string_view text, std::size_t max_tokens) const;

  int id(const std::string& token) const;
  const std::string& token(int id) const { return vocab_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return vocab_.size(); }
  bool lowercase() const { return lowercase_; }
  const std::vector<std::string>& vocab() const { return vocab_; }

  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }
  int unk_id() const { return unk_; }

  void save(const std::filesystem::path& vocab_txt) const;

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> ids_;
  bool lowercase_;
  int cls_ = -1, sep_ = -1, unk_ = -1;
};

}  // namespace deceptkit::backends
