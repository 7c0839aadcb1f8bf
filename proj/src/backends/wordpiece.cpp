#include "deceptkit/backends/wordpiece.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/common/unicode.hpp"

namespace deceptkit::backends {

namespace {

constexpr std::size_t kMaxCharsPerWord = 100;
const char* const kSpecials[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase)
    : vocab_(std::move(vocab)), lowercase_(lowercase) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], static_cast<int>(i));
  auto require = [this](const char* name) {
    const auto it = ids_.find(name);
    if (it == ids_.end()) throw ConfigError(std::string("vocabulary lacks the special token ") + name);
    return it->second;
  };
  cls_ = require("[CLS]");
  sep_ = require("[SEP]");
  unk_ = require("[UNK]");
}

WordPieceTokenizer WordPieceTokenizer::from_file(const std::filesystem::path& vocab_txt, bool lowercase) {
  std::ifstream in(vocab_txt);
  if (!in) throw ConfigError("cannot open vocabulary " + vocab_txt.string());
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return WordPieceTokenizer(std::move(vocab), lowercase);
}

WordPieceTokenizer WordPieceTokenizer::build(std::span<const std::string> texts, std::size_t max_size,
                                             bool lowercase) {
  // The basic tokenizer does not depend on the vocabulary.
  const WordPieceTokenizer basic({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}, lowercase);
  std::map<std::string, std::size_t> word_counts;
  std::set<char32_t> chars;
  for (const auto& text : texts) {
    for (auto& word : basic.basic_tokenize(text)) {
      for (char32_t c : unicode::decode_utf8(word)) chars.insert(c);
      ++word_counts[word];
    }
  }
  std::vector<std::string> vocab(std::begin(kSpecials), std::end(kSpecials));
  std::set<std::string> seen(vocab.begin(), vocab.end());
  auto add = [&](const std::string& token) {
    if (seen.insert(token).second) vocab.push_back(token);
  };
  for (char32_t c : chars) {
    std::string s;
    unicode::append_utf8(s, c);
    add(s);
    add("##" + s);
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(word_counts.begin(), word_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [word, count] : ranked) {
    if (vocab.size() >= max_size) break;
    add(word);
  }
  return WordPieceTokenizer(std::move(vocab), lowercase);
}

std::vector<std::string> WordPieceTokenizer::basic_tokenize(std::string_view text) const {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char32_t c : unicode::decode_utf8(text)) {
    if (c == 0 || c == 0xFFFD || (unicode::is_control(c) && !unicode::is_whitespace(c))) continue;
    if (unicode::is_whitespace(c)) {
      flush();
      continue;
    }
    if (unicode::is_cjk(c)) {
      flush();
      std::string s;
      unicode::append_utf8(s, c);
      words.push_back(std::move(s));
      continue;
    }
    unicode::append_utf8(current, c);
  }
  flush();

  std::vector<std::string> out;
  for (auto& word : words) {
    const std::string cased = lowercase_ ? unicode::lowercase_strip_accents(word) : word;
    std::string piece;
    for (char32_t c : unicode::decode_utf8(cased)) {
      if (unicode::is_punctuation(c)) {
        if (!piece.empty()) out.push_back(std::move(piece));
        piece.clear();
        std::string p;
        unicode::append_utf8(p, c);
        out.push_back(std::move(p));
      } else {
        unicode::append_utf8(piece, c);
      }
    }
    if (!piece.empty()) out.push_back(std::move(piece));
  }
  return out;
}

std::vector<std::string> WordPieceTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> pieces;
  for (const auto& word : basic_tokenize(text)) {
    const auto cps = unicode::decode_utf8(word);
    if (cps.size() > kMaxCharsPerWord) {
      pieces.push_back("[UNK]");
      continue;
    }
    std::vector<std::string> sub;
    std::size_t start = 0;
    bool bad = false;
    while (start < cps.size()) {
      std::size_t end = cps.size();
      std::string match;
      while (start < end) {
        std::string candidate = start > 0 ? "##" : "";
        for (std::size_t i = start; i < end; ++i) unicode::append_utf8(candidate, cps[i]);
        if (ids_.count(candidate) != 0) {
          match = std::move(candidate);
          break;
        }
        --end;
      }
      if (match.empty()) {
        bad = true;
        break;
      }
      sub.push_back(std::move(match));
      start = end;
    }
    if (bad) {
      pieces.push_back("[UNK]");
    } else {
      pieces.insert(pieces.end(), sub.begin(), sub.end());
    }
  }
  return pieces;
}

EncodedText WordPieceTokenizer::encode(std::string_view text, std::size_t max_tokens) const {
  if (max_tokens < 2) throw ConfigError("max_tokens must leave room for the special tokens");
  EncodedText out;
  std::vector<std::string> pieces = tokenize(text);
  out.full_length = pieces.size() + 2;
  if (out.full_length > max_tokens) {
    pieces.resize(max_tokens - 2);
    out.truncated = true;
  }
  out.tokens.reserve(pieces.size() + 2);
  out.tokens.push_back("[CLS]");
  for (auto& p : pieces) out.tokens.push_back(std::move(p));
  out.tokens.push_back("[SEP]");
  out.ids.reserve(out.tokens.size());
  for (const auto& t : out.tokens) out.ids.push_back(id(t));
  return out;
}

int WordPieceTokenizer::id(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? unk_ : it->second;
}

void WordPieceTokenizer::save(const std::filesystem::path& vocab_txt) const {
  std::string body;
  for (const auto& t : vocab_) body += t + "\n";
  write_file_atomic(vocab_txt, body);
}

}  // namespace deceptkit::backends
