#pragma once

#include <cstdint>
#include <optional>

namespace usim {

// X11-style key symbols, the subset the toolkit emits. Printable ASCII
// maps to itself; a few control keys live in the 0xFF00 page.
namespace keysym {
constexpr uint32_t backspace = 0xFF08;
constexpr uint32_t tab = 0xFF09;
constexpr uint32_t enter = 0xFF0D;
constexpr uint32_t shift_left = 0xFFE1;
} // namespace keysym

struct KeyStroke {
  uint32_t sym = 0;
  bool shifted = false; // wrap in Shift press/release
};

// Keystroke needed to type one character. Uppercase letters become
// shift + lowercase keysym; other printable ASCII is sent verbatim.
std::optional<KeyStroke> keystroke_for_char(char c);

// Character produced by a keysym given the current shift state, or
// nullopt for non-printing symbols (shift itself, unknown codes).
std::optional<char> char_for_keysym(uint32_t sym, bool shift_held);

} // namespace usim
