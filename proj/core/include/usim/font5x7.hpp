#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace usim::font5x7 {

constexpr int cell_width = 5;
constexpr int cell_height = 7;
constexpr int advance = 6; // cell + 1 px spacing

struct Glyph {
  char ch;
  std::array<std::string_view, cell_height> rows; // '#' = on
};

// The built-in monospace face: A-Z a-z 0-9 space and basic punctuation.
// Glyph shapes obey three rules the rest of the toolkit depends on:
// every occupied column range is contiguous, left padding <= 1 and
// right padding <= 2 (so intra-word component gaps stay <= 4 px), and
// all trimmed bitmaps are pairwise distinct (so glyph matching is
// unambiguous). font_sanity_test enforces all three.
std::span<const Glyph> table();

const Glyph* find(char c);

// Every character the face covers, space included.
const std::string& alphabet();

// Tight (trimmed) form used by the OCR glyph matcher.
struct TightGlyph {
  char ch = 0;
  int left_pad = 0;
  int right_pad = 0;
  int width = 0;  // trimmed columns
  int height = 0; // trimmed rows
  std::string key; // canonical row-major '0'/'1' string of the trimmed box
};

std::span<const TightGlyph> tight_table();

// Looks up a trimmed bitmap; nullopt when no glyph matches exactly.
std::optional<TightGlyph> match_tight(const std::string& key, int width, int height);

// Canonical key for a trimmed bitmap given as row-major booleans.
std::string make_key(const std::vector<uint8_t>& bits, int width, int height);

} // namespace usim::font5x7
