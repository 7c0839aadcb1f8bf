#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace deceptkit::backends {

// 26 letters, 10 digits, the 33-symbol punctuation list (in which '-' occurs
// twice) and newline: 70 channels. A duplicated symbol encodes to its first
// channel.
std::u32string default_alphabet();

class Alphabet {
 public:
  explicit Alphabet(std::u32string symbols);

  // Channel of a code point, or kBlank when it is not in the alphabet.
  int index(char32_t c) const;
  std::size_t size() const { return symbols_.size(); }
  const std::u32string& symbols() const { return symbols_; }
  std::string utf8() const;

  static constexpr int kBlank = -1;

 private:
  std::u32string symbols_;
  std::unordered_map<char32_t, int> index_;
};

// Fixed-length channel indices for one text. kBlank positions (padding and
// characters outside the alphabet) are all-zero one-hot columns.
struct CharEncoding {
  std::vector<int> indices;
  std::size_t alphabet_size = 0;

  std::size_t max_length() const { return indices.size(); }
};

// Lowercases, iterates code points, keeps the first max_length characters
// and pads the rest with kBlank.
CharEncoding encode_chars(std::string_view text, const Alphabet& alphabet, std::size_t max_length);

}  // namespace deceptkit::backends
