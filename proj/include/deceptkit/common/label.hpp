#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace deceptkit {

// Binary deception label. The numeric value is the class index used in
// probability vectors: index 0 is non-deceptive, index 1 is deceptive.
enum class Label : std::uint8_t { kNonDeceptive = 0, kDeceptive = 1 };

inline constexpr std::size_t kNumClasses = 2;

using ClassProbs = std::array<double, kNumClasses>;

constexpr std::size_t class_index(Label label) { return static_cast<std::size_t>(label); }

constexpr Label label_from_index(std::size_t index) {
  return index == 0 ? Label::kNonDeceptive : Label::kDeceptive;
}

std::string_view to_string(Label label);

// Accepts "deceptive" / "non_deceptive". Throws FormatError otherwise.
Label parse_label(std::string_view text);

}  // namespace deceptkit
