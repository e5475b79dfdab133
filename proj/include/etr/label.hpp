#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace etr {

/// Gold decision for a query; the index order is the class order everywhere.
enum class Label : std::size_t { Yes = 0, No = 1, Unsure = 2 };

inline constexpr std::array<Label, 3> kAllLabels{Label::Yes, Label::No, Label::Unsure};

constexpr std::size_t index_of(Label l) noexcept { return static_cast<std::size_t>(l); }

/// "yes" / "no" / "unsure".
std::string_view to_string(Label l) noexcept;
/// "Yes" / "No" / "Unsure".
std::string_view display_name(Label l) noexcept;
/// Accepts any case; throws InputError otherwise.
Label parse_label(std::string_view text);

}  // namespace etr
