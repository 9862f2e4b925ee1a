#include "usim/font5x7.hpp"

#include <map>
#include <mutex>

namespace usim::font5x7 {

namespace {

// clang-format off
constexpr Glyph kGlyphs[] = {
    {'A', {".###.",
           "#...#",
           "#...#",
           "#####",
           "#...#",
           "#...#",
           "#...#"}},
    {'B', {"####.",
           "#...#",
           "#...#",
           "####.",
           "#...#",
           "#...#",
           "####."}},
    {'C', {".###.",
           "#...#",
           "#....",
           "#....",
           "#....",
           "#...#",
           ".###."}},
    {'D', {"####.",
           "#...#",
           "#...#",
           "#...#",
           "#...#",
           "#...#",
           "####."}},
    {'E', {"#####",
           "#....",
           "#....",
           "####.",
           "#....",
           "#....",
           "#####"}},
    {'F', {"#####",
           "#....",
           "#....",
           "####.",
           "#....",
           "#....",
           "#...."}},
    {'G', {".###.",
           "#...#",
           "#....",
           "#.###",
           "#...#",
           "#...#",
           ".####"}},
    {'H', {"#...#",
           "#...#",
           "#...#",
           "#####",
           "#...#",
           "#...#",
           "#...#"}},
    {'I', {".###.",
           "..#..",
           "..#..",
           "..#..",
           "..#..",
           "..#..",
           ".###."}},
    {'J', {"..###",
           "...#.",
           "...#.",
           "...#.",
           "...#.",
           "#..#.",
           ".##.."}},
    {'K', {"#...#",
           "#..#.",
           "#.#..",
           "##...",
           "#.#..",
           "#..#.",
           "#...#"}},
    {'L', {"#....",
           "#....",
           "#....",
           "#....",
           "#....",
           "#....",
           "#####"}},
    {'M', {"#...#",
           "##.##",
           "#.#.#",
           "#.#.#",
           "#...#",
           "#...#",
           "#...#"}},
    {'N', {"#...#",
           "##..#",
           "#.#.#",
           "#..##",
           "#...#",
           "#...#",
           "#...#"}},
    {'O', {".###.",
           "#...#",
           "#...#",
           "#...#",
           "#...#",
           "#...#",
           ".###."}},
    {'P', {"####.",
           "#...#",
           "#...#",
           "####.",
           "#....",
           "#....",
           "#...."}},
    {'Q', {".###.",
           "#...#",
           "#...#",
           "#...#",
           "#.#.#",
           "#..#.",
           ".##.#"}},
    {'R', {"####.",
           "#...#",
           "#...#",
           "####.",
           "#.#..",
           "#..#.",
           "#...#"}},
    {'S', {".####",
           "#....",
           "#....",
           ".###.",
           "....#",
           "....#",
           "####."}},
    {'T', {"#####",
           "..#..",
           "..#..",
           "..#..",
           "..#..",
           "..#..",
           "..#.."}},
    {'U', {"#...#",
           "#...#",
           "#...#",
           "#...#",
           "#...#",
           "#...#",
           ".###."}},
    {'V', {"#...#",
           "#...#",
           "#...#",
           "#...#",
           "#...#",
           ".#.#.",
           "..#.."}},
    {'W', {"#...#",
           "#...#",
           "#...#",
           "#.#.#",
           "#.#.#",
           "##.##",
           "#...#"}},
    {'X', {"#...#",
           "#...#",
           ".#.#.",
           "..#..",
           ".#.#.",
           "#...#",
           "#...#"}},
    {'Y', {"#...#",
           "#...#",
           ".#.#.",
           "..#..",
           "..#..",
           "..#..",
           "..#.."}},
    {'Z', {"#####",
           "....#",
           "...#.",
           "..#..",
           ".#...",
           "#....",
           "#####"}},
    {'a', {".....",
           ".....",
           ".###.",
           "....#",
           ".####",
           "#...#",
           ".####"}},
    {'b', {"#....",
           "#....",
           "####.",
           "#...#",
           "#...#",
           "#...#",
           "####."}},
    {'c', {".....",
           ".....",
           ".###.",
           "#....",
           "#....",
           "#...#",
           ".###."}},
    {'d', {"....#",
           "....#",
           ".####",
           "#...#",
           "#...#",
           "#...#",
           ".####"}},
    {'e', {".....",
           ".....",
           ".###.",
           "#...#",
           "#####",
           "#....",
           ".###."}},
    {'f', {"..##.",
           ".#..#",
           ".#...",
           "####.",
           ".#...",
           ".#...",
           ".#..."}},
    {'g', {".....",
           ".####",
           "#...#",
           "#...#",
           ".####",
           "....#",
           ".###."}},
    {'h', {"#....",
           "#....",
           "####.",
           "#...#",
           "#...#",
           "#...#",
           "#...#"}},
    {'i', {".##..",
           ".....",
           ".##..",
           "..#..",
           "..#..",
           "..#..",
           ".###."}},
    {'j', {"..##.",
           ".....",
           "..##.",
           "...#.",
           "...#.",
           "#..#.",
           ".##.."}},
    {'k', {"#....",
           "#....",
           "#..#.",
           "#.#..",
           "##...",
           "#.#..",
           "#..#."}},
    {'l', {".##..",
           "..#..",
           "..#..",
           "..#..",
           "..#..",
           "..#..",
           ".###."}},
    {'m', {".....",
           ".....",
           "##.#.",
           "#.#.#",
           "#.#.#",
           "#...#",
           "#...#"}},
    {'n', {".....",
           ".....",
           "####.",
           "#...#",
           "#...#",
           "#...#",
           "#...#"}},
    {'o', {".....",
           ".....",
           ".###.",
           "#...#",
           "#...#",
           "#...#",
           ".###."}},
    {'p', {".....",
           "####.",
           "#...#",
           "#...#",
           "####.",
           "#....",
           "#...."}},
    {'q', {".....",
           ".####",
           "#...#",
           "#...#",
           ".####",
           "....#",
           "....#"}},
    {'r', {".....",
           ".....",
           "#.##.",
           "##..#",
           "#....",
           "#....",
           "#...."}},
    {'s', {".....",
           ".....",
           ".####",
           "#....",
           ".###.",
           "....#",
           "####."}},
    {'t', {".#...",
           ".#...",
           "####.",
           ".#...",
           ".#...",
           ".#..#",
           "..##."}},
    {'u', {".....",
           ".....",
           "#...#",
           "#...#",
           "#...#",
           "#..##",
           ".##.#"}},
    {'v', {".....",
           ".....",
           "#...#",
           "#...#",
           "#...#",
           ".#.#.",
           "..#.."}},
    {'w', {".....",
           ".....",
           "#...#",
           "#...#",
           "#.#.#",
           "#.#.#",
           ".#.#."}},
    {'x', {".....",
           ".....",
           "#...#",
           ".#.#.",
           "..#..",
           ".#.#.",
           "#...#"}},
    {'y', {".....",
           "#...#",
           "#...#",
           "#...#",
           ".####",
           "....#",
           ".###."}},
    {'z', {".....",
           ".....",
           "#####",
           "...#.",
           "..#..",
           ".#...",
           "#####"}},
    {'0', {".###.",
           "#...#",
           "#..##",
           "#.#.#",
           "##..#",
           "#...#",
           ".###."}},
    {'1', {"..#..",
           ".##..",
           "..#..",
           "..#..",
           "..#..",
           "..#..",
           ".###."}},
    {'2', {".###.",
           "#...#",
           "....#",
           "...#.",
           "..#..",
           ".#...",
           "#####"}},
    {'3', {"#####",
           "...#.",
           "..#..",
           "...#.",
           "....#",
           "#...#",
           ".###."}},
    {'4', {"...#.",
           "..##.",
           ".#.#.",
           "#..#.",
           "#####",
           "...#.",
           "...#."}},
    {'5', {"#####",
           "#....",
           "####.",
           "....#",
           "....#",
           "#...#",
           ".###."}},
    {'6', {"..##.",
           ".#...",
           "#....",
           "####.",
           "#...#",
           "#...#",
           ".###."}},
    {'7', {"#####",
           "....#",
           "...#.",
           "..#..",
           ".#...",
           ".#...",
           ".#..."}},
    {'8', {".###.",
           "#...#",
           "#...#",
           ".###.",
           "#...#",
           "#...#",
           ".###."}},
    {'9', {".###.",
           "#...#",
           "#...#",
           ".####",
           "....#",
           "...#.",
           ".##.."}},
    {'.', {".....",
           ".....",
           ".....",
           ".....",
           ".....",
           ".##..",
           ".##.."}},
    {',', {".....",
           ".....",
           ".....",
           ".....",
           ".##..",
           "..#..",
           ".#..."}},
    {':', {".....",
           ".##..",
           ".##..",
           ".....",
           ".##..",
           ".##..",
           "....."}},
    {';', {".....",
           ".##..",
           ".##..",
           ".....",
           ".##..",
           "..#..",
           ".#..."}},
    {'!', {".##..",
           ".##..",
           ".##..",
           ".##..",
           ".....",
           ".##..",
           "....."}},
    {'?', {".###.",
           "#...#",
           "....#",
           "...#.",
           "..#..",
           ".....",
           "..#.."}},
    {'\'', {".##..",
            ".#...",
            ".....",
            ".....",
            ".....",
            ".....",
            "....."}},
    {'-', {".....",
           ".....",
           ".....",
           ".###.",
           ".....",
           ".....",
           "....."}},
    {'_', {".....",
           ".....",
           ".....",
           ".....",
           ".....",
           ".....",
           "#####"}},
    {'+', {".....",
           "..#..",
           "..#..",
           "#####",
           "..#..",
           "..#..",
           "....."}},
    {'=', {".....",
           ".....",
           "####.",
           ".....",
           "####.",
           ".....",
           "....."}},
    {'/', {"....#",
           "...#.",
           "...#.",
           "..#..",
           ".#...",
           ".#...",
           "#...."}},
    {'(', {"...#.",
           "..#..",
           ".#...",
           ".#...",
           ".#...",
           "..#..",
           "...#."}},
    {')', {".#...",
           "..#..",
           "...#.",
           "...#.",
           "...#.",
           "..#..",
           ".#..."}},
    {'*', {".....",
           ".#.#.",
           "..#..",
           "#####",
           "..#..",
           ".#.#.",
           "....."}},
    {'@', {".###.",
           "#...#",
           "#.###",
           "#.#.#",
           "#.###",
           "#....",
           ".###."}},
    {'#', {".#.#.",
           ".#.#.",
           "#####",
           ".#.#.",
           "#####",
           ".#.#.",
           ".#.#."}},
    {'%', {"##..#",
           "##..#",
           "...#.",
           "..#..",
           ".#...",
           "#..##",
           "#..##"}},
    {'&', {".##..",
           "#..#.",
           "#..#.",
           ".##..",
           "#.#.#",
           "#..#.",
           ".##.#"}},
    {' ', {".....",
           ".....",
           ".....",
           ".....",
           ".....",
           ".....",
           "....."}},
};
// clang-format on

struct TightIndex {
  std::vector<TightGlyph> tights;
  std::map<std::string, size_t> by_key;
  std::string alphabet;
};

TightIndex build_index() {
  TightIndex index;
  for (const Glyph& g : kGlyphs) {
    index.alphabet.push_back(g.ch);
    if (g.ch == ' ') continue; // empty cell, handled by gap logic
    int min_c = cell_width, max_c = -1, min_r = cell_height, max_r = -1;
    for (int r = 0; r < cell_height; ++r) {
      for (int c = 0; c < cell_width; ++c) {
        if (g.rows[r][c] != '#') continue;
        min_c = std::min(min_c, c);
        max_c = std::max(max_c, c);
        min_r = std::min(min_r, r);
        max_r = std::max(max_r, r);
      }
    }
    TightGlyph t;
    t.ch = g.ch;
    t.left_pad = min_c;
    t.right_pad = cell_width - 1 - max_c;
    t.width = max_c - min_c + 1;
    t.height = max_r - min_r + 1;
    std::vector<uint8_t> bits;
    bits.reserve(static_cast<size_t>(t.width) * t.height);
    for (int r = min_r; r <= max_r; ++r)
      for (int c = min_c; c <= max_c; ++c)
        bits.push_back(g.rows[r][c] == '#' ? 1 : 0);
    t.key = make_key(bits, t.width, t.height);
    index.by_key.emplace(t.key, index.tights.size());
    index.tights.push_back(std::move(t));
  }
  return index;
}

const TightIndex& index() {
  static const TightIndex idx = build_index();
  return idx;
}

} // namespace

std::span<const Glyph> table() { return kGlyphs; }

const Glyph* find(char c) {
  for (const Glyph& g : kGlyphs)
    if (g.ch == c) return &g;
  return nullptr;
}

const std::string& alphabet() { return index().alphabet; }

std::span<const TightGlyph> tight_table() { return index().tights; }

std::string make_key(const std::vector<uint8_t>& bits, int width, int height) {
  std::string key;
  key.reserve(bits.size() + 16);
  key += std::to_string(width);
  key.push_back('x');
  key += std::to_string(height);
  key.push_back(':');
  for (uint8_t b : bits) key.push_back(b ? '1' : '0');
  return key;
}

std::optional<TightGlyph> match_tight(const std::string& key, int width, int height) {
  if (width > cell_width || height > cell_height) return std::nullopt;
  auto it = index().by_key.find(key);
  if (it == index().by_key.end()) return std::nullopt;
  return index().tights[it->second];
}

} // namespace usim::font5x7
