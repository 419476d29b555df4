#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace symrel {

// NLI classes. The ordinal doubles as the tie-break rank (lower wins).
enum class Label : std::uint8_t { Entailment = 0, Contradiction = 1 };

inline constexpr std::array<Label, 2> kLabels = {Label::Entailment, Label::Contradiction};

inline constexpr std::size_t ordinal(Label l) { return static_cast<std::size_t>(l); }
inline constexpr Label other(Label l) {
  return l == Label::Entailment ? Label::Contradiction : Label::Entailment;
}

std::string_view to_string(Label l);
// Accepts "Entailment"/"Contradiction" (case-insensitive). Throws DataError otherwise.
Label parse_label(std::string_view s);

}  // namespace symrel
