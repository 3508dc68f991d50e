#pragma once

// RFC 2047 encoded-word decoding for header values.

#include <string>
#include <string_view>

#include "bec/ingest/codec.hpp"
#include "bec/util/text.hpp"

namespace bec {

struct HeaderDecodeResult {
  std::string text;
  bool flagged = false;  // at least one encoded-word could not be decoded cleanly
};

namespace detail {

struct EncodedWord {
  std::size_t end = 0;  // one past the closing "?="
  std::string charset;
  char encoding = 0;
  std::string_view payload;
};

// Matches "=?charset?X?payload?=" starting at `pos`.
inline bool match_encoded_word(std::string_view s, std::size_t pos, EncodedWord& word) {
  if (pos + 1 >= s.size() || s[pos] != '=' || s[pos + 1] != '?') return false;
  std::size_t q1 = s.find('?', pos + 2);
  if (q1 == std::string_view::npos || q1 == pos + 2) return false;
  if (q1 + 2 >= s.size() || s[q1 + 2] != '?') return false;
  char enc = s[q1 + 1];
  if (enc != 'B' && enc != 'b' && enc != 'Q' && enc != 'q') return false;
  std::size_t close = s.find("?=", q1 + 3);
  if (close == std::string_view::npos) return false;
  std::string_view charset = s.substr(pos + 2, q1 - pos - 2);
  for (char c : charset) {
    if (text::is_space(c) || c == '?') return false;
  }
  // RFC 2231 language suffix: charset*lang
  if (auto star = charset.find('*'); star != std::string_view::npos) charset = charset.substr(0, star);
  word.end = close + 2;
  word.charset = std::string(charset);
  word.encoding = static_cast<char>(enc | 0x20);
  word.payload = s.substr(q1 + 3, close - q1 - 3);
  return true;
}

}  // namespace detail

/// Joins folded header lines (CRLF/LF followed by whitespace).
inline std::string unfold_header(std::string_view value) {
  std::string out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    char c = value[i];
    if (c == '\r' || c == '\n') {
      continue;
    }
    out.push_back(c);
  }
  return out;
}

/// Decodes all B and Q encoded-words. Whitespace between two adjacent
/// encoded-words is dropped; undecodable words are kept verbatim and flagged.
inline HeaderDecodeResult decode_encoded_words_ex(std::string_view raw) {
  const std::string unfolded = unfold_header(raw);
  std::string_view s = unfolded;
  HeaderDecodeResult result;
  std::string pending_space;
  bool last_was_word = false;
  std::size_t i = 0;
  while (i < s.size()) {
    detail::EncodedWord word;
    if (detail::match_encoded_word(s, i, word)) {
      codec::Decoded bytes = word.encoding == 'b'
                                 ? codec::base64_decode(word.payload)
                                 : codec::quoted_printable_decode(word.payload, true);
      codec::Decoded txt = codec::to_utf8(bytes.bytes, word.charset);
      if (!last_was_word) result.text += pending_space;
      pending_space.clear();
      if (!bytes.clean || !txt.clean) {
        result.flagged = true;
        result.text.append(s.substr(i, word.end - i));
      } else {
        result.text += txt.bytes;
      }
      last_was_word = true;
      i = word.end;
      continue;
    }
    if (s[i] == ' ' || s[i] == '\t') {
      pending_space.push_back(s[i]);
      ++i;
      continue;
    }
    result.text += pending_space;
    pending_space.clear();
    last_was_word = false;
    std::size_t start = i;
    ++i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && !(s[i] == '=' && i + 1 < s.size() && s[i + 1] == '?')) ++i;
    codec::Decoded literal = codec::to_utf8(s.substr(start, i - start), "");
    if (!literal.clean) result.flagged = true;
    result.text += literal.bytes;
  }
  result.text += pending_space;
  return result;
}

inline std::string decode_encoded_words(std::string_view raw) {
  return decode_encoded_words_ex(raw).text;
}

}  // namespace bec
