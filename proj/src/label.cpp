#include "symrel/label.hpp"

#include <algorithm>
#include <cctype>

#include "symrel/error.hpp"

namespace symrel {

std::string_view to_string(Label l) {
  return l == Label::Entailment ? "Entailment" : "Contradiction";
}

Label parse_label(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "entailment") return Label::Entailment;
  if (lower == "contradiction") return Label::Contradiction;
  throw DataError("unknown label '" + std::string(s) + "'");
}

}  // namespace symrel
