#pragma once

// Embedded 5x7 bitmap font for label text. Covers A-Z, a-z, 0-9 and basic
// punctuation; "_d" renders digit d as a subscript.

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace geo::font {

constexpr int kGlyphWidth = 5;
constexpr int kGlyphHeight = 7;
constexpr int kAdvance = 6;

using Glyph = std::array<std::uint8_t, kGlyphHeight>;  // bit 4 = leftmost column

namespace detail {

constexpr std::uint8_t row(const char (&r)[6]) {
  std::uint8_t v = 0;
  for (int i = 0; i < 5; ++i) v = static_cast<std::uint8_t>((v << 1) | (r[i] == '#' ? 1 : 0));
  return v;
}

constexpr Glyph g(const char (&a)[6], const char (&b)[6], const char (&c)[6], const char (&d)[6],
                  const char (&e)[6], const char (&f)[6], const char (&h)[6]) {
  return {row(a), row(b), row(c), row(d), row(e), row(f), row(h)};
}

struct Entry {
  char ch;
  Glyph glyph;
};

// clang-format off
inline constexpr Entry kTable[] = {
  {'A', g(".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#")},
  {'B', g("####.", "#...#", "#...#", "####.", "#...#", "#...#", "####.")},
  {'C', g(".###.", "#...#", "#....", "#....", "#....", "#...#", ".###.")},
  {'D', g("####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####.")},
  {'E', g("#####", "#....", "#....", "####.", "#....", "#....", "#####")},
  {'F', g("#####", "#....", "#....", "####.", "#....", "#....", "#....")},
  {'G', g(".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####")},
  {'H', g("#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#")},
  {'I', g(".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###.")},
  {'J', g("..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##..")},
  {'K', g("#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#")},
  {'L', g("#....", "#....", "#....", "#....", "#....", "#....", "#####")},
  {'M', g("#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#")},
  {'N', g("#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#")},
  {'O', g(".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###.")},
  {'P', g("####.", "#...#", "#...#", "####.", "#....", "#....", "#....")},
  {'Q', g(".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#")},
  {'R', g("####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#")},
  {'S', g(".####", "#....", "#....", ".###.", "....#", "....#", "####.")},
  {'T', g("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#..")},
  {'U', g("#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###.")},
  {'V', g("#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#..")},
  {'W', g("#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#.")},
  {'X', g("#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#")},
  {'Y', g("#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#..")},
  {'Z', g("#####", "....#", "...#.", "..#..", ".#...", "#....", "#####")},
  {'a', g(".....", ".....", ".###.", "....#", ".####", "#...#", ".####")},
  {'b', g("#....", "#....", "#.##.", "##..#", "#...#", "#...#", "####.")},
  {'c', g(".....", ".....", ".###.", "#....", "#....", "#...#", ".###.")},
  {'d', g("....#", "....#", ".##.#", "#..##", "#...#", "#...#", ".####")},
  {'e', g(".....", ".....", ".###.", "#...#", "#####", "#....", ".###.")},
  {'f', g("..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#...")},
  {'g', g(".....", ".####", "#...#", "#...#", ".####", "....#", ".###.")},
  {'h', g("#....", "#....", "#.##.", "##..#", "#...#", "#...#", "#...#")},
  {'i', g("..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###.")},
  {'j', g("...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##..")},
  {'k', g("#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#.")},
  {'l', g(".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###.")},
  {'m', g(".....", ".....", "##.#.", "#.#.#", "#.#.#", "#...#", "#...#")},
  {'n', g(".....", ".....", "#.##.", "##..#", "#...#", "#...#", "#...#")},
  {'o', g(".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###.")},
  {'p', g(".....", ".....", "####.", "#...#", "####.", "#....", "#....")},
  {'q', g(".....", ".....", ".##.#", "#..##", ".####", "....#", "....#")},
  {'r', g(".....", ".....", "#.##.", "##..#", "#....", "#....", "#....")},
  {'s', g(".....", ".....", ".###.", "#....", ".###.", "....#", "####.")},
  {'t', g(".#...", ".#...", "###..", ".#...", ".#...", ".#..#", "..##.")},
  {'u', g(".....", ".....", "#...#", "#...#", "#...#", "#..##", ".##.#")},
  {'v', g(".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#..")},
  {'w', g(".....", ".....", "#...#", "#...#", "#.#.#", "#.#.#", ".#.#.")},
  {'x', g(".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#")},
  {'y', g(".....", ".....", "#...#", "#...#", ".####", "....#", ".###.")},
  {'z', g(".....", ".....", "#####", "...#.", "..#..", ".#...", "#####")},
  {'0', g(".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###.")},
  {'1', g("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###.")},
  {'2', g(".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####")},
  {'3', g("#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###.")},
  {'4', g("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#.")},
  {'5', g("#####", "#....", "####.", "....#", "....#", "#...#", ".###.")},
  {'6', g("..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###.")},
  {'7', g("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#...")},
  {'8', g(".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###.")},
  {'9', g(".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##..")},
  {'.', g(".....", ".....", ".....", ".....", ".....", ".##..", ".##..")},
  {',', g(".....", ".....", ".....", ".....", ".##..", "..#..", ".#...")},
  {':', g(".....", ".##..", ".##..", ".....", ".##..", ".##..", ".....")},
  {';', g(".....", ".##..", ".##..", ".....", ".##..", "..#..", ".#...")},
  {'\'', g("..#..", "..#..", ".#...", ".....", ".....", ".....", ".....")},
  {'"', g(".#.#.", ".#.#.", ".....", ".....", ".....", ".....", ".....")},
  {'(', g("...#.", "..#..", ".#...", ".#...", ".#...", "..#..", "...#.")},
  {')', g(".#...", "..#..", "...#.", "...#.", "...#.", "..#..", ".#...")},
  {'[', g(".###.", ".#...", ".#...", ".#...", ".#...", ".#...", ".###.")},
  {']', g(".###.", "...#.", "...#.", "...#.", "...#.", "...#.", ".###.")},
  {'-', g(".....", ".....", ".....", "#####", ".....", ".....", ".....")},
  {'+', g(".....", "..#..", "..#..", "#####", "..#..", "..#..", ".....")},
  {'=', g(".....", ".....", "#####", ".....", "#####", ".....", ".....")},
  {'/', g(".....", "....#", "...#.", "..#..", ".#...", "#....", ".....")},
  {'?', g(".###.", "#...#", "....#", "...#.", "..#..", ".....", "..#..")},
  {'!', g("..#..", "..#..", "..#..", "..#..", "..#..", ".....", "..#..")},
  {'*', g(".....", "..#..", "#.#.#", ".###.", "#.#.#", "..#..", ".....")},
  {'<', g("...#.", "..#..", ".#...", "#....", ".#...", "..#..", "...#.")},
  {'>', g(".#...", "..#..", "...#.", "....#", "...#.", "..#..", ".#...")},
  {'_', g(".....", ".....", ".....", ".....", ".....", ".....", "#####")},
};
// clang-format on

}  // namespace detail

// Glyph for `c`; nullopt for characters outside the embedded set (space
// included, which advances without ink).
inline std::optional<Glyph> glyph(char c) {
  for (const auto& e : detail::kTable)
    if (e.ch == c) return e.glyph;
  return std::nullopt;
}

inline bool glyph_bit(const Glyph& gl, int col, int row) {
  return (gl[static_cast<std::size_t>(row)] >> (kGlyphWidth - 1 - col)) & 1u;
}

}  // namespace geo::font
