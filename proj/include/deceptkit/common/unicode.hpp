#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace deceptkit::unicode {

// Corpus-level text normalization: invalid UTF-8 is replaced with U+FFFD,
// the text is NFC-composed, control characters are removed, whitespace runs
// collapse to one ASCII space and the ends are trimmed. Case is preserved.
std::string normalize_text(std::string_view utf8);

// Splits UTF-8 into code points. Invalid bytes decode to U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view utf8);

void append_utf8(std::string& out, char32_t code_point);

std::string encode_utf8(const std::vector<char32_t>& code_points);

bool is_whitespace(char32_t c);
bool is_control(char32_t c);
bool is_punctuation(char32_t c);
bool is_alphanumeric(char32_t c);
bool is_cjk(char32_t c);

// Full Unicode lowercase followed by NFD decomposition with combining marks
// removed. This is the uncased-encoder preprocessing.
std::string lowercase_strip_accents(std::string_view utf8);

// Lowercases ASCII letters only; other bytes are copied unchanged.
std::string ascii_lower(std::string_view text);

}  // namespace deceptkit::unicode
