#pragma once

// Script classification and a curated Latin/Cyrillic/Greek confusables table.
// Coverage is deliberately limited to the lookalikes seen in masquerading
// mail; it is not a full UTS #39 skeleton implementation.

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bec/util/utf8.hpp"

namespace bec::unicode {

enum class Script { none, inherited, latin, greek, cyrillic, other };

inline std::string_view to_string(Script s) {
  switch (s) {
    case Script::none: return "none";
    case Script::inherited: return "inherited";
    case Script::latin: return "latin";
    case Script::greek: return "greek";
    case Script::cyrillic: return "cyrillic";
    case Script::other: return "other";
  }
  return "?";
}

/// Invisible format characters abused to split words.
inline bool is_invisible(char32_t cp) {
  switch (cp) {
    case 0x00AD:  // soft hyphen
    case 0x034F:  // combining grapheme joiner
    case 0x180E:  // mongolian vowel separator
    case 0x200B:  // zero width space
    case 0x200C:  // zero width non-joiner
    case 0x200D:  // zero width joiner
    case 0x2060:  // word joiner
    case 0x2061: case 0x2062: case 0x2063: case 0x2064:
    case 0xFEFF:  // zero width no-break space
      return true;
    default:
      return false;
  }
}

/// Script of a code point; `none` for digits, punctuation, symbols, spaces.
inline Script script_of(char32_t cp) {
  if ((cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z')) return Script::latin;
  if (cp < 0x80) return Script::none;
  if (cp == 0xAA || cp == 0xBA) return Script::latin;
  if (cp >= 0xC0 && cp <= 0x24F) return (cp == 0xD7 || cp == 0xF7) ? Script::none : Script::latin;
  if (cp >= 0x250 && cp <= 0x2AF) return Script::latin;  // IPA extensions
  if (cp >= 0x300 && cp <= 0x36F) return Script::inherited;
  if (cp >= 0x370 && cp <= 0x3FF) {
    if (cp == 0x37E || cp == 0x387 || cp == 0x375 || (cp >= 0x384 && cp <= 0x385)) return Script::none;
    return Script::greek;
  }
  if (cp >= 0x400 && cp <= 0x52F) {
    if (cp >= 0x483 && cp <= 0x489) return Script::inherited;
    return Script::cyrillic;
  }
  if (cp >= 0x1AB0 && cp <= 0x1AFF) return Script::inherited;
  if (cp >= 0x1DC0 && cp <= 0x1DFF) return Script::inherited;
  if (cp >= 0x1D00 && cp <= 0x1D7F) return Script::latin;
  if (cp >= 0x1E00 && cp <= 0x1EFF) return Script::latin;
  if (cp >= 0x1F00 && cp <= 0x1FFF) return Script::greek;
  if (cp >= 0x2C60 && cp <= 0x2C7F) return Script::latin;
  if (cp >= 0x2DE0 && cp <= 0x2DFF) return Script::cyrillic;
  if (cp >= 0xA640 && cp <= 0xA69F) return Script::cyrillic;
  if (cp >= 0xA720 && cp <= 0xA7FF) return Script::latin;
  if (cp >= 0xAB30 && cp <= 0xAB6F) return Script::latin;
  if (cp >= 0xFE00 && cp <= 0xFE0F) return Script::inherited;  // variation selectors
  if (cp >= 0xFE20 && cp <= 0xFE2F) return Script::inherited;
  if ((cp >= 0xFF21 && cp <= 0xFF3A) || (cp >= 0xFF41 && cp <= 0xFF5A)) return Script::latin;
  // non-letter blocks
  if (cp >= 0x80 && cp <= 0xBF) return Script::none;
  if (cp >= 0x2000 && cp <= 0x2BFF) return Script::none;  // punctuation, symbols, arrows, box drawing
  if (cp >= 0x3000 && cp <= 0x303F) return Script::none;
  if (cp >= 0xFE10 && cp <= 0xFE1F) return Script::none;
  if (cp >= 0xFE30 && cp <= 0xFE6F) return Script::none;
  if (cp >= 0xFF00 && cp <= 0xFF20) return Script::none;
  if (cp >= 0xFF3B && cp <= 0xFF40) return Script::none;
  if (cp >= 0xFF5B && cp <= 0xFF65) return Script::none;
  if (cp >= 0xFFF0 && cp <= 0xFFFF) return Script::none;
  if (cp >= 0xE000 && cp <= 0xF8FF) return Script::none;   // private use
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return Script::none;  // emoji & pictographs
  if (cp >= 0xE0000) return Script::none;
  if (is_invisible(cp)) return Script::none;
  return Script::other;
}

inline bool is_letter(char32_t cp) {
  Script s = script_of(cp);
  return s == Script::latin || s == Script::greek || s == Script::cyrillic || s == Script::other;
}

struct Confusable {
  char32_t cp;
  Script script;
  char ascii;  // the Latin letter it imitates
};

// Cyrillic and Greek letters that render like basic Latin letters.
inline constexpr Confusable kConfusables[] = {
    // Cyrillic lowercase
    {0x0430, Script::cyrillic, 'a'}, {0x0435, Script::cyrillic, 'e'}, {0x043E, Script::cyrillic, 'o'},
    {0x0440, Script::cyrillic, 'p'}, {0x0441, Script::cyrillic, 'c'}, {0x0443, Script::cyrillic, 'y'},
    {0x0445, Script::cyrillic, 'x'}, {0x0455, Script::cyrillic, 's'}, {0x0456, Script::cyrillic, 'i'},
    {0x0458, Script::cyrillic, 'j'}, {0x04BB, Script::cyrillic, 'h'}, {0x0501, Script::cyrillic, 'd'},
    {0x051B, Script::cyrillic, 'q'}, {0x051D, Script::cyrillic, 'w'}, {0x0475, Script::cyrillic, 'v'},
    {0x04CF, Script::cyrillic, 'l'},
    // Cyrillic uppercase
    {0x0410, Script::cyrillic, 'A'}, {0x0412, Script::cyrillic, 'B'}, {0x0415, Script::cyrillic, 'E'},
    {0x041A, Script::cyrillic, 'K'}, {0x041C, Script::cyrillic, 'M'}, {0x041D, Script::cyrillic, 'H'},
    {0x041E, Script::cyrillic, 'O'}, {0x0420, Script::cyrillic, 'P'}, {0x0421, Script::cyrillic, 'C'},
    {0x0422, Script::cyrillic, 'T'}, {0x0425, Script::cyrillic, 'X'}, {0x0423, Script::cyrillic, 'Y'},
    {0x0405, Script::cyrillic, 'S'}, {0x0406, Script::cyrillic, 'I'}, {0x0408, Script::cyrillic, 'J'},
    {0x04C0, Script::cyrillic, 'I'}, {0x051C, Script::cyrillic, 'W'},
    // Greek lowercase
    {0x03BF, Script::greek, 'o'}, {0x03B1, Script::greek, 'a'}, {0x03BD, Script::greek, 'v'},
    {0x03C1, Script::greek, 'p'}, {0x03B9, Script::greek, 'i'}, {0x03BA, Script::greek, 'k'},
    {0x03C5, Script::greek, 'u'}, {0x03B3, Script::greek, 'y'}, {0x03F2, Script::greek, 'c'},
    {0x03F3, Script::greek, 'j'},
    // Greek uppercase
    {0x0391, Script::greek, 'A'}, {0x0392, Script::greek, 'B'}, {0x0395, Script::greek, 'E'},
    {0x0396, Script::greek, 'Z'}, {0x0397, Script::greek, 'H'}, {0x0399, Script::greek, 'I'},
    {0x039A, Script::greek, 'K'}, {0x039C, Script::greek, 'M'}, {0x039D, Script::greek, 'N'},
    {0x039F, Script::greek, 'O'}, {0x03A1, Script::greek, 'P'}, {0x03A4, Script::greek, 'T'},
    {0x03A5, Script::greek, 'Y'}, {0x03A7, Script::greek, 'X'}, {0x03F9, Script::greek, 'C'},
    {0x037F, Script::greek, 'J'},
};

/// The Latin letter a code point imitates, if it is a listed confusable.
/// Basic Latin letters map to themselves.
inline std::optional<char> latin_skeleton(char32_t cp) {
  if ((cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z')) return static_cast<char>(cp);
  for (const auto& c : kConfusables) {
    if (c.cp == cp) return c.ascii;
  }
  return std::nullopt;
}

/// Is there a letter in `script` that looks like `ascii`?
inline std::optional<char32_t> lookalike_in(Script script, char ascii) {
  if (script == Script::latin) {
    if ((ascii >= 'A' && ascii <= 'Z') || (ascii >= 'a' && ascii <= 'z')) return static_cast<char32_t>(ascii);
    return std::nullopt;
  }
  for (const auto& c : kConfusables) {
    if (c.script == script && c.ascii == ascii) return c.cp;
  }
  return std::nullopt;
}

/// Maps lookalikes (including fullwidth forms and dotted/at-sign variants) to
/// ASCII and drops invisible characters. Used to recover hidden addresses.
inline std::string fold_to_ascii(std::string_view s) {
  std::string out;
  for (char32_t cp : utf8::to_code_points(s)) {
    if (is_invisible(cp)) continue;
    if (cp >= 0xFF01 && cp <= 0xFF5E) {
      out.push_back(static_cast<char>(cp - 0xFEE0));
      continue;
    }
    switch (cp) {
      case 0xFE6B: case 0x2AF8: out.push_back('@'); continue;  // small/other commercial at
      case 0x2024: case 0x3002: case 0xFE52: case 0x0701: out.push_back('.'); continue;
      case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2212: out.push_back('-'); continue;
      default: break;
    }
    if (auto a = latin_skeleton(cp); a && cp >= 0x80) {
      out.push_back(*a);
      continue;
    }
    utf8::append(out, cp);
  }
  return out;
}

/// Removes invisible format characters.
inline std::string strip_invisibles(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : utf8::to_code_points(s)) {
    if (!is_invisible(cp)) utf8::append(out, cp);
  }
  return out;
}

}  // namespace bec::unicode
