#include "deceptkit/common/label.hpp"

#include <string>

#include "deceptkit/common/error.hpp"

namespace deceptkit {

std::string_view to_string(Label label) {
  return label == Label::kDeceptive ? "deceptive" : "non_deceptive";
}

Label parse_label(std::string_view text) {
  if (text == "deceptive") return Label::kDeceptive;
  if (text == "non_deceptive") return Label::kNonDeceptive;
  throw FormatError("unknown label '" + std::string(text) + "'");
}

}  // namespace deceptkit
