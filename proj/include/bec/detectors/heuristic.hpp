#pragma once

// Header and text heuristics: sender address masquerade, homoglyph
// masquerade and zero-width/invisible character abuse.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bec/detectors/detection.hpp"
#include "bec/detectors/unicode.hpp"
#include "bec/ingest/email.hpp"
#include "bec/util/text.hpp"
#include "bec/util/utf8.hpp"

namespace bec {

struct HeuristicConfig {
  std::size_t zero_width_threshold = 3;  // invisible chars inside words per email
  double masquerade_exact_score = 1.0;
  double masquerade_folded_score = 0.7;
};

namespace detail {

inline bool is_local_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("._%+-!#$&'*/=?^`{|}~").find(c) != std::string_view::npos;
}

inline bool is_domain_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-'; }

}  // namespace detail

/// Finds substrings of `s` that match a plain ASCII addr-spec grammar.
inline std::vector<std::string> find_embedded_addresses(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t at = s.find('@'); at != std::string_view::npos; at = s.find('@', at + 1)) {
    std::size_t l = at;
    while (l > 0 && detail::is_local_char(s[l - 1])) --l;
    std::size_t r = at + 1;
    while (r < s.size() && detail::is_domain_char(s[r])) ++r;
    std::string_view local = s.substr(l, at - l);
    std::string_view domain = s.substr(at + 1, r - at - 1);
    while (!local.empty() && (local.front() == '.' || local.front() == '\'')) local.remove_prefix(1);
    while (!domain.empty() && (domain.back() == '.' || domain.back() == '-')) domain.remove_suffix(1);
    if (local.empty() || domain.empty() || local.back() == '.') continue;
    auto dot = domain.rfind('.');
    if (dot == std::string_view::npos || dot == 0) continue;
    std::string_view tld = domain.substr(dot + 1);
    if (tld.size() < 2 || !std::all_of(tld.begin(), tld.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); })) {
      continue;
    }
    out.push_back(std::string(local) + "@" + text::to_lower(domain));
  }
  return out;
}

inline std::string domain_of(std::string_view address) {
  auto at = address.rfind('@');
  return at == std::string_view::npos ? std::string{} : text::to_lower(address.substr(at + 1));
}

/// Fires when the display name carries an address whose domain differs from
/// the actual sender domain. Exact grammar match scores 1.0; a match that only
/// appears after folding lookalike characters scores 0.7.
inline std::optional<Detection> detect_address_masquerade(const ParsedEmail& email, TypeId type_id,
                                                          const HeuristicConfig& config = {}) {
  const std::string& name = email.from_display_name;
  const bool ascii = std::all_of(name.begin(), name.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
  if (ascii && name.find('@') == std::string::npos) return std::nullopt;
  const std::string actual_domain = unicode::fold_to_ascii(domain_of(email.from_address));
  auto make = [&](const std::string& embedded, double score, bool folded) {
    Detection d{type_id, score, {}};
    d.metadata["embedded"] = embedded;
    d.metadata["actual"] = email.from_address;
    d.metadata["display_name"] = name;
    d.metadata["match"] = folded ? "after_confusable_folding" : "exact";
    return d;
  };
  std::vector<std::string> exact = find_embedded_addresses(name);
  for (const auto& addr : exact) {
    if (unicode::fold_to_ascii(domain_of(addr)) != text::to_lower(actual_domain)) {
      return make(addr, config.masquerade_exact_score, false);
    }
  }
  const std::string folded = unicode::fold_to_ascii(name);
  if (folded != name) {
    for (const auto& addr : find_embedded_addresses(folded)) {
      if (std::find(exact.begin(), exact.end(), addr) != exact.end()) continue;
      if (domain_of(addr) != text::to_lower(actual_domain)) return make(addr, config.masquerade_folded_score, true);
    }
  }
  return std::nullopt;
}

namespace detail {

struct Word {
  std::vector<char32_t> cps;
};

// Splits into runs of letters, combining marks and invisibles.
inline std::vector<Word> split_words(std::string_view s, bool include_invisibles) {
  std::vector<Word> words;
  Word cur;
  for (char32_t cp : utf8::to_code_points(s)) {
    unicode::Script sc = unicode::script_of(cp);
    bool part = unicode::is_letter(cp) || sc == unicode::Script::inherited ||
                (include_invisibles && unicode::is_invisible(cp));
    if (part) {
      cur.cps.push_back(cp);
    } else if (!cur.cps.empty()) {
      words.push_back(std::move(cur));
      cur = {};
    }
  }
  if (!cur.cps.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace detail

/// Fires when a word mixes scripts and a minority-script letter is a known
/// lookalike of a letter in the word's dominant script.
inline std::optional<Detection> detect_unicode_masquerade(std::string_view text_in, TypeId type_id) {
  using unicode::Script;
  std::vector<std::string> words;
  std::vector<char32_t> offenders;
  std::map<char32_t, char32_t> transliteration;
  for (const auto& word : detail::split_words(text_in, false)) {
    std::size_t counts[3] = {0, 0, 0};  // latin, greek, cyrillic
    for (char32_t cp : word.cps) {
      switch (unicode::script_of(cp)) {
        case Script::latin: ++counts[0]; break;
        case Script::greek: ++counts[1]; break;
        case Script::cyrillic: ++counts[2]; break;
        default: break;
      }
    }
    int present = (counts[0] > 0) + (counts[1] > 0) + (counts[2] > 0);
    if (present < 2) continue;
    // ties resolve toward Latin, then Cyrillic
    Script dominant = Script::latin;
    std::size_t best = counts[0];
    if (counts[2] > best) { dominant = Script::cyrillic; best = counts[2]; }
    if (counts[1] > best) { dominant = Script::greek; best = counts[1]; }
    bool masqueraded = false;
    for (char32_t cp : word.cps) {
      Script sc = unicode::script_of(cp);
      if (sc == dominant || (sc != Script::latin && sc != Script::greek && sc != Script::cyrillic)) continue;
      auto skeleton = unicode::latin_skeleton(cp);
      if (!skeleton) continue;
      auto look = unicode::lookalike_in(dominant, *skeleton);
      if (!look) continue;
      masqueraded = true;
      if (!transliteration.count(cp)) {
        offenders.push_back(cp);
        transliteration[cp] = *look;
      }
    }
    if (masqueraded) words.push_back(utf8::from_code_points(word.cps));
  }
  if (words.empty()) return std::nullopt;
  Detection d{type_id, std::min(1.0, 0.4 + 0.2 * static_cast<double>(words.size() - 1)), {}};
  std::vector<std::string> cps;
  for (char32_t cp : offenders) {
    cps.push_back(utf8::format_code_point(cp) + " " + utf8::encode(cp) + "->" + utf8::encode(transliteration[cp]));
  }
  d.metadata["code_points"] = text::join(cps, ", ");
  d.metadata["words"] = text::join(words, " ");
  d.metadata["masqueraded_words"] = std::to_string(words.size());
  return d;
}

/// Fires when at least `threshold` invisible characters sit inside words.
inline std::optional<Detection> detect_zero_width_abuse(std::string_view text_in, TypeId type_id,
                                                        const HeuristicConfig& config = {}) {
  std::size_t total = 0;
  std::vector<std::string> deobfuscated;
  std::vector<char32_t> kinds;
  for (const auto& word : detail::split_words(text_in, true)) {
    // only invisibles with letters on both sides count as "inside" the word
    std::size_t first = word.cps.size(), last = 0;
    for (std::size_t i = 0; i < word.cps.size(); ++i) {
      if (!unicode::is_invisible(word.cps[i])) {
        first = std::min(first, i);
        last = i;
      }
    }
    if (first >= word.cps.size()) continue;
    std::size_t inside = 0;
    for (std::size_t i = first; i < last; ++i) {
      if (unicode::is_invisible(word.cps[i])) {
        ++inside;
        if (std::find(kinds.begin(), kinds.end(), word.cps[i]) == kinds.end()) kinds.push_back(word.cps[i]);
      }
    }
    if (inside == 0) continue;
    total += inside;
    deobfuscated.push_back(unicode::strip_invisibles(utf8::from_code_points(word.cps)));
  }
  if (total < config.zero_width_threshold || total == 0) return std::nullopt;
  double score = std::min(1.0, 0.5 + 0.1 * static_cast<double>(total - config.zero_width_threshold));
  Detection d{type_id, score, {}};
  d.metadata["words"] = text::join(deobfuscated, " ");
  d.metadata["invisible_count"] = std::to_string(total);
  std::vector<std::string> names;
  for (char32_t cp : kinds) names.push_back(utf8::format_code_point(cp));
  d.metadata["code_points"] = text::join(names, ", ");
  return d;
}

/// Text the Unicode detectors scan: display name, subject and body.
inline std::string visible_text(const ParsedEmail& email) {
  return email.from_display_name + "\n" + email.subject + "\n" + email.body_text;
}

}  // namespace bec
