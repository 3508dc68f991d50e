#pragma once

// Transfer-encoding and charset decoding used by the email parser.
// Everything here is lenient: bad input degrades, it never throws.

#include <iconv.h>

#include <array>
#include <cerrno>
#include <string>
#include <string_view>

#include "bec/util/text.hpp"
#include "bec/util/utf8.hpp"

namespace bec::codec {

namespace detail {

inline int base64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+' || c == '-') return 62;
  if (c == '/' || c == '_') return 63;
  return -1;
}

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

}  // namespace detail

struct Decoded {
  std::string bytes;
  bool clean = true;  // false when garbage had to be skipped
};

/// Base64 decode that skips characters outside the alphabet, like mail clients do.
inline Decoded base64_decode(std::string_view in) {
  Decoded out;
  unsigned buffer = 0;
  int bits = 0;
  for (char c : in) {
    if (c == '=') break;
    int v = detail::base64_value(c);
    if (v < 0) {
      if (!text::is_space(c)) out.clean = false;
      continue;
    }
    buffer = (buffer << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.bytes.push_back(static_cast<char>((buffer >> bits) & 0xFF));
    }
  }
  return out;
}

inline std::string base64_encode(std::string_view in) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    unsigned n = (static_cast<unsigned char>(in[i]) << 16) |
                 (static_cast<unsigned char>(in[i + 1]) << 8) |
                 static_cast<unsigned char>(in[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (i + 1 == in.size()) {
    unsigned n = static_cast<unsigned char>(in[i]) << 16;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += "==";
  } else if (i + 2 == in.size()) {
    unsigned n = (static_cast<unsigned char>(in[i]) << 16) |
                 (static_cast<unsigned char>(in[i + 1]) << 8);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

/// Quoted-printable. With `header_mode` set, '_' decodes to a space (RFC 2047 "Q").
inline Decoded quoted_printable_decode(std::string_view in, bool header_mode = false) {
  Decoded out;
  out.bytes.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    char c = in[i];
    if (c == '=') {
      if (i + 2 < in.size()) {
        int hi = detail::hex_value(in[i + 1]);
        int lo = detail::hex_value(in[i + 2]);
        if (hi >= 0 && lo >= 0) {
          out.bytes.push_back(static_cast<char>(hi * 16 + lo));
          i += 2;
          continue;
        }
      }
      // soft line break: "=" followed by optional whitespace then newline
      std::size_t j = i + 1;
      while (j < in.size() && (in[j] == ' ' || in[j] == '\t')) ++j;
      if (j < in.size() && (in[j] == '\r' || in[j] == '\n')) {
        if (in[j] == '\r' && j + 1 < in.size() && in[j + 1] == '\n') ++j;
        i = j;
        continue;
      }
      if (j == in.size() && !header_mode) {
        i = j;
        continue;
      }
      out.clean = false;
      out.bytes.push_back(c);
    } else if (header_mode && c == '_') {
      out.bytes.push_back(' ');
    } else {
      out.bytes.push_back(c);
    }
  }
  return out;
}

inline std::string latin1_to_utf8(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  for (char c : in) utf8::append(out, static_cast<unsigned char>(c));
  return out;
}

/// Converts `bytes` in `charset` to UTF-8 via iconv. When the charset is unknown
/// or the conversion fails, falls back to a byte-per-code-point Latin-1 mapping
/// and reports clean = false.
inline Decoded to_utf8(std::string_view bytes, std::string_view charset) {
  std::string cs = text::to_lower(text::trim(charset));
  if (cs.size() >= 2 && cs.front() == '"' && cs.back() == '"') cs = cs.substr(1, cs.size() - 2);
  if (cs.empty() || cs == "us-ascii" || cs == "ascii" || cs == "utf-8" || cs == "utf8") {
    Decoded d;
    d.clean = utf8::sanitize(bytes, d.bytes) == 0;
    if (!d.clean && cs != "utf-8" && cs != "utf8") {
      // undeclared 8-bit content: most clients assume Latin-1/Windows-1252
      d.bytes = latin1_to_utf8(bytes);
    }
    return d;
  }
  if (cs == "iso-8859-1" || cs == "latin1" || cs == "latin-1") {
    return {latin1_to_utf8(bytes), true};
  }
  iconv_t cd = iconv_open("UTF-8", cs.c_str());
  if (cd == reinterpret_cast<iconv_t>(-1)) return {latin1_to_utf8(bytes), false};
  std::string input(bytes);
  std::string out(input.size() * 4 + 16, '\0');
  char* in_ptr = input.data();
  std::size_t in_left = input.size();
  char* out_ptr = out.data();
  std::size_t out_left = out.size();
  std::size_t rc = iconv(cd, &in_ptr, &in_left, &out_ptr, &out_left);
  iconv_close(cd);
  if (rc == static_cast<std::size_t>(-1) || in_left != 0) {
    return {latin1_to_utf8(bytes), false};
  }
  out.resize(out.size() - out_left);
  Decoded d;
  d.clean = utf8::sanitize(out, d.bytes) == 0;
  return d;
}

}  // namespace bec::codec
