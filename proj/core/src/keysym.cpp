#include "usim/keysym.hpp"

namespace usim {

std::optional<KeyStroke> keystroke_for_char(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  if (c == '\n') return KeyStroke{keysym::enter, false};
  if (c == '\t') return KeyStroke{keysym::tab, false};
  if (u < 0x20 || u > 0x7E) return std::nullopt;
  if (c >= 'A' && c <= 'Z')
    return KeyStroke{static_cast<uint32_t>(c - 'A' + 'a'), true};
  return KeyStroke{static_cast<uint32_t>(u), false};
}

std::optional<char> char_for_keysym(uint32_t sym, bool shift_held) {
  if (sym == keysym::enter) return '\n';
  if (sym == keysym::tab) return '\t';
  if (sym >= 0x20 && sym <= 0x7E) {
    char c = static_cast<char>(sym);
    if (shift_held && c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    return c;
  }
  return std::nullopt;
}

} // namespace usim
