#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "signet/core/types.hpp"

namespace signet::ingest {

inline constexpr int kGlyphCols = 5;
inline constexpr int kGlyphRows = 7;

/// 5x7 bitmap glyph; bit 4 of each row is the leftmost column.
struct Glyph {
  char ch;
  std::array<std::uint8_t, kGlyphRows> rows;

  bool ink(int col, int row) const noexcept {
    return ((rows[static_cast<std::size_t>(row)] >> (kGlyphCols - 1 - col)) & 1U) != 0;
  }
};

/// Upper-case letters, digits and common form punctuation.
std::span<const Glyph> glyph_table();

std::optional<Glyph> find_glyph(char ch);

/// Advance per character in font cells (glyph plus one spacing column).
inline constexpr int kAdvanceCols = kGlyphCols + 1;

/// Draws `text` (upper-cased) with its top-left corner at (x, y); every font
/// cell becomes a scale x scale block of intensity `ink`. Clipped to the grid.
void draw_text(GrayGrid& page, int x, int y, std::string_view text, int scale,
               float ink = 0.0F);

/// Pixel width of `text` at `scale`, without trailing spacing.
int text_width(std::string_view text, int scale) noexcept;

}  // namespace signet::ingest
