#pragma once

// Tag-soup HTML rendering to plain text, roughly what a mail client shows.

#include <string>
#include <string_view>
#include <vector>

#include "bec/util/text.hpp"
#include "bec/util/utf8.hpp"

namespace bec::html {

namespace detail {

inline bool is_block_tag(std::string_view name) {
  static constexpr std::string_view kBlocks[] = {
      "br", "p", "div", "li", "tr", "h1", "h2", "h3", "h4", "h5", "h6",
      "ul", "ol", "table", "blockquote", "hr", "pre", "section", "article"};
  for (auto b : kBlocks) {
    if (text::iequals(name, b)) return true;
  }
  return false;
}

inline bool is_paragraph_tag(std::string_view name) {
  return text::iequals(name, "p") || text::iequals(name, "div") ||
         text::iequals(name, "table") || text::iequals(name, "blockquote") ||
         (name.size() == 2 && (name[0] == 'h' || name[0] == 'H') && name[1] >= '1' && name[1] <= '6');
}

inline bool named_entity(std::string_view name, char32_t& cp) {
  struct Entity { std::string_view name; char32_t cp; };
  static constexpr Entity kEntities[] = {
      {"amp", '&'},    {"lt", '<'},      {"gt", '>'},     {"quot", '"'},
      {"apos", '\''},  {"nbsp", 0xA0},   {"shy", 0xAD},   {"copy", 0xA9},
      {"reg", 0xAE},   {"euro", 0x20AC}, {"ndash", 0x2013}, {"mdash", 0x2014},
      {"hellip", 0x2026}, {"zwj", 0x200D}, {"zwnj", 0x200C},
      {"lsquo", 0x2018}, {"rsquo", 0x2019}, {"ldquo", 0x201C}, {"rdquo", 0x201D}};
  for (const auto& e : kEntities) {
    if (e.name == name) {
      cp = e.cp;
      return true;
    }
  }
  return false;
}

inline std::string tag_name(std::string_view tag) {
  std::size_t i = 0;
  if (i < tag.size() && tag[i] == '/') ++i;
  std::size_t start = i;
  while (i < tag.size() && (std::isalnum(static_cast<unsigned char>(tag[i])) || tag[i] == '-')) ++i;
  return text::to_lower(tag.substr(start, i - start));
}

}  // namespace detail

/// Decodes character references. Unknown entities are kept literally.
inline std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    std::size_t semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out.push_back('&');
      continue;
    }
    std::string_view ref = s.substr(i + 1, semi - i - 1);
    char32_t cp = 0;
    bool ok = false;
    if (!ref.empty() && ref[0] == '#') {
      std::string_view digits = ref.substr(1);
      int base = 10;
      if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
        base = 16;
        digits.remove_prefix(1);
      }
      unsigned long v = 0;
      ok = !digits.empty();
      for (char c : digits) {
        int d = std::isdigit(static_cast<unsigned char>(c)) ? c - '0'
                : (base == 16 && std::isxdigit(static_cast<unsigned char>(c))) ? (text::lower(c) - 'a' + 10)
                                                                              : -1;
        if (d < 0 || v > 0x10FFFF) {
          ok = false;
          break;
        }
        v = v * base + d;
      }
      if (ok) cp = static_cast<char32_t>(v > 0x10FFFF ? utf8::kReplacement : v);
    } else {
      ok = detail::named_entity(ref, cp);
    }
    if (!ok) {
      out.push_back('&');
      continue;
    }
    utf8::append(out, cp == 0xA0 ? char32_t{' '} : cp);
    i = semi;
  }
  return out;
}

struct Rendered {
  std::string text;
  std::vector<std::string> hrefs;  // anchor targets in document order
  // text before entity decoding and cleanup; hrefs[k] sits at raw_text offset href_offsets[k]
  std::string raw_text;
  std::vector<std::size_t> href_offsets;
};

/// Renders HTML to text: tags stripped, block boundaries become newlines,
/// script/style/head contents dropped, entities decoded.
inline Rendered render(std::string_view html) {
  Rendered out;
  std::string raw;
  raw.reserve(html.size());
  auto newline = [&](int count) {
    int have = 0;
    for (auto it = raw.rbegin(); it != raw.rend() && (*it == '\n' || *it == ' '); ++it) {
      if (*it == '\n') ++have;
    }
    for (; have < count; ++have) raw.push_back('\n');
  };
  std::size_t i = 0;
  while (i < html.size()) {
    char c = html[i];
    if (c != '<') {
      if (text::is_space(c)) {
        if (!raw.empty() && raw.back() != ' ' && raw.back() != '\n') raw.push_back(' ');
      } else {
        raw.push_back(c);
      }
      ++i;
      continue;
    }
    if (html.substr(i, 4) == "<!--") {
      std::size_t end = html.find("-->", i + 4);
      i = end == std::string_view::npos ? html.size() : end + 3;
      continue;
    }
    std::size_t close = html.find('>', i + 1);
    if (close == std::string_view::npos) {
      // unterminated tag: render the rest as text like a browser would
      raw.append(html.substr(i));
      break;
    }
    std::string_view tag = html.substr(i + 1, close - i - 1);
    std::string name = detail::tag_name(tag);
    bool closing = !tag.empty() && tag[0] == '/';
    i = close + 1;
    if (!closing && (name == "script" || name == "style" || name == "head" || name == "title")) {
      std::string end_tag = "</" + name;
      std::size_t pos = i;
      std::size_t found = std::string_view::npos;
      while (pos < html.size()) {
        std::size_t lt = html.find("</", pos);
        if (lt == std::string_view::npos) break;
        if (text::istarts_with(html.substr(lt), end_tag)) {
          found = lt;
          break;
        }
        pos = lt + 2;
      }
      if (found == std::string_view::npos) {
        i = html.size();
      } else {
        std::size_t gt = html.find('>', found);
        i = gt == std::string_view::npos ? html.size() : gt + 1;
      }
      continue;
    }
    if (name == "a" && !closing) {
      std::string lowered = text::to_lower(tag);
      std::size_t h = lowered.find("href");
      while (h != std::string::npos) {
        std::size_t j = h + 4;
        while (j < tag.size() && text::is_space(tag[j])) ++j;
        if (j < tag.size() && tag[j] == '=') {
          ++j;
          while (j < tag.size() && text::is_space(tag[j])) ++j;
          std::string value;
          if (j < tag.size() && (tag[j] == '"' || tag[j] == '\'')) {
            char q = tag[j];
            std::size_t endq = tag.find(q, j + 1);
            value = std::string(tag.substr(j + 1, (endq == std::string_view::npos ? tag.size() : endq) - j - 1));
          } else {
            std::size_t k = j;
            while (k < tag.size() && !text::is_space(tag[k])) ++k;
            value = std::string(tag.substr(j, k - j));
          }
          out.hrefs.push_back(decode_entities(text::trim(value)));
          out.href_offsets.push_back(raw.size());
          break;
        }
        h = lowered.find("href", h + 4);
      }
    }
    if (detail::is_block_tag(name)) {
      newline(detail::is_paragraph_tag(name) ? 2 : 1);
    }
  }
  out.raw_text = raw;
  std::string decoded = decode_entities(raw);
  // trim spaces around newlines
  std::string cleaned;
  cleaned.reserve(decoded.size());
  for (std::size_t k = 0; k < decoded.size(); ++k) {
    char ch = decoded[k];
    if (ch == ' ' && (cleaned.empty() || cleaned.back() == '\n')) continue;
    if (ch == '\n') {
      while (!cleaned.empty() && cleaned.back() == ' ') cleaned.pop_back();
    }
    cleaned.push_back(ch);
  }
  out.text = std::string(text::trim(cleaned));
  return out;
}

}  // namespace bec::html
