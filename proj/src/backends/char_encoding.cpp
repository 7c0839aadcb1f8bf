#include "deceptkit/backends/char_encoding.hpp"

#include "deceptkit/common/error.hpp"
#include "deceptkit/common/unicode.hpp"

namespace deceptkit::backends {

std::u32string default_alphabet() {
  return U"abcdefghijklmnopqrstuvwxyz0123456789-,;.!?:'\"/\\|_@#$%^&*~`+-=<>()[]{}\n";
}

Alphabet::Alphabet(std::u32string symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw ConfigError("character alphabet is empty");
  for (std::size_t i = 0; i < symbols_.size(); ++i) index_.emplace(symbols_[i], static_cast<int>(i));
}

int Alphabet::index(char32_t c) const {
  const auto it = index_.find(c);
  return it == index_.end() ? kBlank : it->second;
}

std::string Alphabet::utf8() const {
  std::string out;
  for (char32_t c : symbols_) unicode::append_utf8(out, c);
  return out;
}

CharEncoding encode_chars(std::string_view text, const Alphabet& alphabet, std::size_t max_length) {
  if (max_length == 0) throw ConfigError("max_length must be positive");
  CharEncoding enc;
  enc.alphabet_size = alphabet.size();
  enc.indices.assign(max_length, Alphabet::kBlank);
  std::size_t pos = 0;
  for (char32_t c : unicode::decode_utf8(text)) {
    if (pos == max_length) break;
    if (c >= U'A' && c <= U'Z') c += U'a' - U'A';
    enc.indices[pos++] = alphabet.index(c);
  }
  return enc;
}

}  // namespace deceptkit::backends
