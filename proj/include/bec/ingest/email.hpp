#pragma once

// Lenient RFC 5322 / MIME parsing into a normalized, detector-friendly view.
//
// parse_email() is total: any byte sequence yields a ParsedEmail. Problems are
// reported through parse_warnings instead of exceptions. Header values are
// stored fully decoded; addresses are parsed from the raw header so that
// decoded display names cannot inject angle brackets.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bec/ingest/codec.hpp"
#include "bec/ingest/encoded_words.hpp"
#include "bec/ingest/html.hpp"
#include "bec/util/text.hpp"
#include "bec/util/utf8.hpp"

namespace bec {

struct RawEmail {
  std::string bytes;
  std::string source_id;
};

enum class SegmentKind { sentence, paragraph };
enum class SegmentOrigin { subject, body };

inline std::string_view to_string(SegmentKind k) { return k == SegmentKind::sentence ? "sentence" : "paragraph"; }
inline std::string_view to_string(SegmentOrigin o) { return o == SegmentOrigin::subject ? "subject" : "body"; }

/// Half-open byte range [start, end) into the UTF-8 origin text.
struct CharRange {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const CharRange&, const CharRange&) = default;
};

struct Segment {
  std::string text;
  SegmentKind kind = SegmentKind::sentence;
  SegmentOrigin origin = SegmentOrigin::body;
  CharRange char_range;
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Header {
  std::string name;
  std::string value;  // decoded
};

struct ParsedEmail {
  std::string source_id;
  std::vector<Header> headers;
  std::string from_display_name;
  std::string from_address;
  std::optional<std::string> envelope_sender;
  std::vector<std::string> recipients;
  std::string subject;
  std::string body_text;
  std::string body_html;  // source of the first HTML part, kept for anchor extraction
  std::optional<std::int64_t> date_epoch;
  std::vector<Segment> segments;
  std::vector<std::string> urls;
  std::vector<std::string> parse_warnings;

  /// First header with this name (case-insensitive), decoded.
  std::optional<std::string> header(std::string_view name) const {
    for (const auto& h : headers) {
      if (text::iequals(h.name, name)) return h.value;
    }
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Addresses

struct Mailbox {
  std::string display_name;  // decoded
  std::string address;
};

namespace detail {

// Splits on `sep` outside quotes, comments and angle brackets.
inline std::vector<std::string_view> split_structured(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  int paren = 0;
  bool quoted = false;
  bool angle = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (quoted) {
      if (c == '\\') ++i;
      else if (c == '"') quoted = false;
      continue;
    }
    if (c == '"') quoted = true;
    else if (c == '(') ++paren;
    else if (c == ')' && paren > 0) --paren;
    else if (c == '<' && paren == 0) angle = true;
    else if (c == '>') angle = false;
    else if (c == sep && paren == 0 && !angle) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  parts.push_back(s.substr(start));
  return parts;
}

inline std::string strip_comments(std::string_view s) {
  std::string out;
  int depth = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (quoted) {
      out.push_back(c);
      if (c == '\\' && i + 1 < s.size()) out.push_back(s[++i]);
      else if (c == '"') quoted = false;
      continue;
    }
    if (depth == 0 && c == '"') {
      quoted = true;
      out.push_back(c);
    } else if (c == '(') {
      ++depth;
    } else if (c == ')' && depth > 0) {
      --depth;
    } else if (depth == 0) {
      out.push_back(c);
    }
  }
  return out;
}

inline std::string unquote_phrase(std::string_view s) {
  std::string out;
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '"') {
      quoted = !quoted;
      continue;
    }
    if (quoted && c == '\\' && i + 1 < s.size()) {
      out.push_back(s[++i]);
      continue;
    }
    out.push_back(c);
  }
  return text::collapse_whitespace(out);
}

inline std::string clean_address(std::string_view s) {
  std::string out;
  for (char c : text::trim(s)) {
    if (!text::is_space(c) && c != '<' && c != '>') out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// Parses one mailbox ("Name <addr>", "addr", "<addr>", "addr (Name)").
inline Mailbox parse_mailbox(std::string_view raw) {
  Mailbox mb;
  std::string_view s = text::trim(raw);
  // the angle-addr is the last '<' outside quotes
  std::size_t lt = std::string_view::npos;
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (quoted) {
      if (s[i] == '\\') ++i;
      else if (s[i] == '"') quoted = false;
    } else if (s[i] == '"') {
      quoted = true;
    } else if (s[i] == '<') {
      lt = i;
    }
  }
  if (lt != std::string_view::npos) {
    std::size_t gt = s.find('>', lt);
    std::string_view addr = s.substr(lt + 1, (gt == std::string_view::npos ? s.size() : gt) - lt - 1);
    mb.address = detail::clean_address(detail::strip_comments(addr));
    std::string phrase = detail::unquote_phrase(detail::strip_comments(s.substr(0, lt)));
    mb.display_name = text::collapse_whitespace(decode_encoded_words(phrase));
    return mb;
  }
  // bare addr-spec, possibly with a trailing comment carrying the name
  std::string without = detail::strip_comments(s);
  mb.address = detail::clean_address(without);
  auto open = s.find('(');
  auto close = s.rfind(')');
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    mb.display_name = text::collapse_whitespace(decode_encoded_words(s.substr(open + 1, close - open - 1)));
  }
  if (mb.address.find('@') == std::string::npos && mb.display_name.empty()) {
    // no address at all: treat the text as a display name
    mb.display_name = text::collapse_whitespace(decode_encoded_words(detail::unquote_phrase(without)));
    mb.address.clear();
  }
  return mb;
}

/// Parses an address list, flattening RFC 5322 groups.
inline std::vector<Mailbox> parse_address_list(std::string_view raw) {
  std::vector<Mailbox> out;
  std::string flattened;
  // "Group: a, b;" -> "a, b"
  {
    bool quoted = false;
    int angle = 0;
    for (char c : raw) {
      if (c == '"') quoted = !quoted;
      if (!quoted && c == '<') ++angle;
      if (!quoted && c == '>' && angle > 0) --angle;
      if (!quoted && angle == 0 && (c == ':' || c == ';')) {
        if (c == ':') {
          // drop the group display name accumulated since the last comma
          auto comma = flattened.rfind(',');
          flattened.erase(comma == std::string::npos ? 0 : comma + 1);
        } else {
          flattened.push_back(',');
        }
        continue;
      }
      flattened.push_back(c);
    }
  }
  for (auto part : detail::split_structured(flattened, ',')) {
    if (text::trim(part).empty()) continue;
    Mailbox mb = parse_mailbox(part);
    if (!mb.address.empty()) out.push_back(std::move(mb));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dates

/// Parses an RFC 5322 date-time (obsolete forms tolerated). Returns Unix seconds.
inline std::optional<std::int64_t> parse_rfc5322_date(std::string_view raw) {
  std::string s = detail::strip_comments(raw);
  std::vector<std::string> tok;
  {
    std::string cur;
    for (char c : s) {
      if (text::is_space(c) || c == ',') {
        if (!cur.empty()) tok.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) tok.push_back(std::move(cur));
  }
  static constexpr std::string_view kMonths[] = {"jan", "feb", "mar", "apr", "may", "jun",
                                                 "jul", "aug", "sep", "oct", "nov", "dec"};
  std::size_t i = 0;
  if (i < tok.size() && !tok[i].empty() && std::isalpha(static_cast<unsigned char>(tok[i][0]))) ++i;  // weekday
  if (i + 3 >= tok.size()) return std::nullopt;
  auto day = text::parse_number<int>(tok[i]);
  int month = 0;
  for (int m = 0; m < 12; ++m) {
    if (text::istarts_with(tok[i + 1], kMonths[m])) month = m + 1;
  }
  auto year = text::parse_number<int>(tok[i + 2]);
  if (!day || !month || !year) return std::nullopt;
  if (*year < 50) *year += 2000;
  else if (*year < 1000) *year += 1900;
  auto hms = text::split(tok[i + 3], ':');
  if (hms.size() < 2) return std::nullopt;
  auto hh = text::parse_number<int>(hms[0]);
  auto mm = text::parse_number<int>(hms[1]);
  auto ss = hms.size() > 2 ? text::parse_number<int>(hms[2]) : std::optional<int>(0);
  if (!hh || !mm || !ss) return std::nullopt;
  int offset_min = 0;
  if (i + 4 < tok.size()) {
    const std::string& z = tok[i + 4];
    if ((z[0] == '+' || z[0] == '-') && z.size() == 5) {
      auto v = text::parse_number<int>(z.substr(1));
      if (v) offset_min = (z[0] == '-' ? -1 : 1) * ((*v / 100) * 60 + *v % 100);
    } else {
      struct Zone { std::string_view name; int hours; };
      static constexpr Zone kZones[] = {{"EST", -5}, {"EDT", -4}, {"CST", -6}, {"CDT", -5},
                                        {"MST", -7}, {"MDT", -6}, {"PST", -8}, {"PDT", -7}};
      for (const auto& zone : kZones) {
        if (text::iequals(z, zone.name)) offset_min = zone.hours * 60;
      }
    }
  }
  using namespace std::chrono;
  year_month_day ymd{std::chrono::year{*year}, std::chrono::month{static_cast<unsigned>(month)},
                     std::chrono::day{static_cast<unsigned>(*day)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t days = sys_days{ymd}.time_since_epoch().count();
  return days * 86400 + *hh * 3600 + *mm * 60 + *ss - offset_min * 60;
}

// ---------------------------------------------------------------------------
// Segments and URLs

namespace detail {

inline bool is_abbreviation(std::string_view before) {
  static constexpr std::string_view kAbbrev[] = {"mr", "mrs", "ms", "dr", "st", "jr", "sr",
                                                 "inc", "ltd", "co", "vs", "etc", "e.g", "i.e", "no"};
  std::size_t start = before.size();
  while (start > 0 && (std::isalpha(static_cast<unsigned char>(before[start - 1])) || before[start - 1] == '.')) --start;
  std::string word = text::to_lower(before.substr(start));
  for (auto a : kAbbrev) {
    if (word == a) return true;
  }
  return false;
}

// A sentence continues with an uppercase letter, digit, quote or any non-ASCII lead byte.
inline bool starts_sentence(char c) {
  auto u = static_cast<unsigned char>(c);
  return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '"' || c == '\'' || c == '(' || u >= 0x80;
}

inline void push_trimmed(std::vector<Segment>& out, std::string_view origin_text, std::size_t start,
                         std::size_t end, SegmentKind kind, SegmentOrigin origin) {
  while (start < end && text::is_space(origin_text[start])) ++start;
  while (end > start && text::is_space(origin_text[end - 1])) --end;
  if (start == end) return;
  out.push_back(Segment{std::string(origin_text.substr(start, end - start)), kind, origin, {start, end}});
}

// Rule-based split: terminal punctuation, optional closing quotes/brackets,
// whitespace, then a capitalized continuation.
inline void split_sentences(std::vector<Segment>& out, std::string_view origin_text, std::size_t start,
                            std::size_t end, SegmentOrigin origin) {
  std::size_t sentence_start = start;
  std::size_t i = start;
  while (i < end) {
    char c = origin_text[i];
    if (c == '.' || c == '!' || c == '?') {
      std::size_t j = i + 1;
      while (j < end && (origin_text[j] == '.' || origin_text[j] == '!' || origin_text[j] == '?')) ++j;
      while (j < end && (origin_text[j] == '"' || origin_text[j] == '\'' || origin_text[j] == ')')) ++j;
      std::size_t k = j;
      while (k < end && text::is_space(origin_text[k])) ++k;
      bool boundary = k > j && (k == end || starts_sentence(origin_text[k]));
      if (boundary && c == '.' && j == i + 1 && is_abbreviation(origin_text.substr(sentence_start, i - sentence_start))) {
        boundary = false;
      }
      if (boundary) {
        push_trimmed(out, origin_text, sentence_start, j, SegmentKind::sentence, origin);
        sentence_start = k;
        i = k;
        continue;
      }
      i = j;
      continue;
    }
    ++i;
  }
  push_trimmed(out, origin_text, sentence_start, end, SegmentKind::sentence, origin);
}

}  // namespace detail

/// Subject becomes one sentence segment; the body is split into paragraphs on
/// blank lines, each paragraph followed by its sentences.
inline std::vector<Segment> extract_segments(const ParsedEmail& email) {
  std::vector<Segment> out;
  detail::push_trimmed(out, email.subject, 0, email.subject.size(), SegmentKind::sentence, SegmentOrigin::subject);
  std::string_view body = email.body_text;
  std::size_t pos = 0;
  while (pos < body.size()) {
    // skip blank lines
    while (pos < body.size() && text::is_space(body[pos])) ++pos;
    if (pos >= body.size()) break;
    std::size_t para_start = pos;
    std::size_t para_end = body.size();
    std::size_t line_start = pos;
    while (line_start < body.size()) {
      std::size_t nl = body.find('\n', line_start);
      if (nl == std::string_view::npos) {
        para_end = body.size();
        line_start = body.size();
        break;
      }
      std::size_t next = nl + 1;
      std::size_t next_nl = body.find('\n', next);
      std::string_view next_line = body.substr(next, (next_nl == std::string_view::npos ? body.size() : next_nl) - next);
      if (text::trim(next_line).empty()) {
        para_end = nl;
        line_start = next;
        break;
      }
      line_start = next;
    }
    detail::push_trimmed(out, body, para_start, para_end, SegmentKind::paragraph, SegmentOrigin::body);
    detail::split_sentences(out, body, para_start, para_end, SegmentOrigin::body);
    pos = para_end;
  }
  return out;
}

namespace detail {

inline bool url_char(char c) {
  auto u = static_cast<unsigned char>(c);
  return u > 0x20 && c != '<' && c != '>' && c != '"' && c != '\'' && c != '`' && u != 0x7F;
}

inline void scan_text_urls(std::string_view s, std::vector<std::string>& out) {
  static constexpr std::string_view kSchemes[] = {"https://", "http://", "ftp://"};
  const std::string lowered = text::to_lower(s);
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t best = std::string_view::npos;
    for (auto scheme : kSchemes) best = std::min(best, lowered.find(scheme, i));
    if (best == std::string_view::npos) return;
    std::size_t end = best;
    while (end < s.size() && url_char(s[end])) ++end;
    std::string_view url = s.substr(best, end - best);
    // trailing sentence punctuation is not part of the URL
    while (!url.empty()) {
      char last = url.back();
      if (last == '.' || last == ',' || last == ';' || last == ':' || last == '!' || last == '?') {
        url.remove_suffix(1);
      } else if (last == ')' && url.find('(') == std::string_view::npos) {
        url.remove_suffix(1);
      } else {
        break;
      }
    }
    if (url.find("://") + 3 < url.size()) out.emplace_back(url);
    i = end > best ? end : best + 1;
  }
}

inline bool is_absolute_url(std::string_view s) {
  auto colon = s.find("://");
  if (colon == std::string_view::npos || colon == 0 || colon + 3 >= s.size()) return false;
  for (std::size_t k = 0; k < colon; ++k) {
    char c = s[k];
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') return false;
  }
  return true;
}

}  // namespace detail

/// Absolute URLs from HTML anchors and body text, deduplicated in order of
/// first appearance. The HTML part is scanned first, in document order.
inline std::vector<std::string> extract_urls(const ParsedEmail& email) {
  std::vector<std::string> found;
  if (!email.body_html.empty()) {
    auto rendered = html::render(email.body_html);
    std::size_t from = 0;
    for (std::size_t k = 0; k < rendered.hrefs.size(); ++k) {
      const std::size_t at = rendered.href_offsets[k];
      detail::scan_text_urls(html::decode_entities(std::string_view(rendered.raw_text).substr(from, at - from)), found);
      from = at;
      std::string_view h = text::trim(rendered.hrefs[k]);
      if (detail::is_absolute_url(h)) found.emplace_back(h);
    }
    detail::scan_text_urls(html::decode_entities(std::string_view(rendered.raw_text).substr(from)), found);
  }
  detail::scan_text_urls(email.body_text, found);
  std::vector<std::string> out;
  for (auto& u : found) {
    if (std::find(out.begin(), out.end(), u) == out.end()) out.push_back(std::move(u));
  }
  return out;
}

// ---------------------------------------------------------------------------
// MIME

namespace detail {

struct RawHeader {
  std::string name;
  std::string value;  // raw, unfolded
};

struct ContentType {
  std::string type = "text";
  std::string subtype = "plain";
  std::string charset;
  std::string boundary;
  bool present = false;
};

inline std::string param_value(std::string_view params, std::string_view key) {
  for (auto part : split_structured(params, ';')) {
    auto eq = part.find('=');
    if (eq == std::string_view::npos) continue;
    if (!text::iequals(text::trim(part.substr(0, eq)), key)) continue;
    std::string_view v = text::trim(part.substr(eq + 1));
    if (v.size() >= 2 && v.front() == '"') {
      v.remove_prefix(1);
      auto q = v.find('"');
      if (q != std::string_view::npos) v = v.substr(0, q);
    }
    return std::string(v);
  }
  return {};
}

inline ContentType parse_content_type(const std::optional<std::string>& raw) {
  ContentType ct;
  if (!raw) return ct;
  ct.present = true;
  std::string_view v = *raw;
  auto semi = v.find(';');
  std::string_view media = text::trim(v.substr(0, semi));
  auto slash = media.find('/');
  if (slash != std::string_view::npos) {
    ct.type = text::to_lower(text::trim(media.substr(0, slash)));
    ct.subtype = text::to_lower(text::trim(media.substr(slash + 1)));
  } else if (!media.empty()) {
    ct.type = text::to_lower(media);
    ct.subtype.clear();
  }
  if (semi != std::string_view::npos) {
    std::string_view params = v.substr(semi + 1);
    ct.charset = param_value(params, "charset");
    ct.boundary = param_value(params, "boundary");
  }
  return ct;
}

inline std::optional<std::string> find_raw(const std::vector<RawHeader>& headers, std::string_view name) {
  for (const auto& h : headers) {
    if (text::iequals(h.name, name)) return h.value;
  }
  return std::nullopt;
}

inline bool looks_like_header_line(std::string_view line) {
  auto colon = line.find(':');
  if (colon == std::string_view::npos || colon == 0) return false;
  for (std::size_t i = 0; i < colon; ++i) {
    auto c = static_cast<unsigned char>(line[i]);
    if (c <= 32 || c >= 127) return false;
  }
  return true;
}

// Splits into header block and body; returns false when no header block exists.
inline bool split_head_body(std::string_view msg, std::string_view& head, std::string_view& body) {
  std::size_t pos = 0;
  while (pos <= msg.size()) {
    std::size_t nl = msg.find('\n', pos);
    std::string_view line = msg.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      head = msg.substr(0, pos);
      body = nl == std::string_view::npos ? std::string_view{} : msg.substr(nl + 1);
      return true;
    }
    if (pos == 0 && !looks_like_header_line(line) && !line.starts_with("From ")) {
      head = {};
      body = msg;
      return false;
    }
    if (nl == std::string_view::npos) {
      head = msg;
      body = {};
      return true;
    }
    pos = nl + 1;
  }
  head = msg;
  body = {};
  return true;
}

inline std::vector<RawHeader> parse_header_block(std::string_view head, std::vector<std::string>& warnings,
                                                 std::string_view context) {
  std::vector<RawHeader> headers;
  std::size_t bad_lines = 0;
  std::size_t pos = 0;
  while (pos < head.size()) {
    std::size_t nl = head.find('\n', pos);
    std::string_view line = head.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? head.size() : nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if ((line[0] == ' ' || line[0] == '\t')) {
      if (!headers.empty()) {
        headers.back().value += ' ';
        headers.back().value += text::trim(line);
      } else {
        ++bad_lines;
      }
      continue;
    }
    if (headers.empty() && line.starts_with("From ")) continue;  // mbox separator
    auto colon = line.find(':');
    if (colon == std::string_view::npos || !looks_like_header_line(line)) {
      ++bad_lines;
      continue;
    }
    headers.push_back({std::string(text::trim(line.substr(0, colon))), std::string(text::trim(line.substr(colon + 1)))});
  }
  if (bad_lines > 0) {
    warnings.push_back(std::string(context) + ": skipped " + std::to_string(bad_lines) + " malformed header line(s)");
  }
  return headers;
}

struct TextParts {
  std::vector<std::string> plain;
  std::vector<std::string> html;
};

inline std::string decode_part_body(std::string_view body, const std::vector<RawHeader>& headers,
                                    const ContentType& ct, std::vector<std::string>& warnings) {
  std::string cte = text::to_lower(text::trim(find_raw(headers, "Content-Transfer-Encoding").value_or("")));
  codec::Decoded bytes;
  if (cte == "base64") {
    bytes = codec::base64_decode(body);
    if (!bytes.clean) warnings.push_back("base64 body contained invalid characters; they were skipped");
  } else if (cte == "quoted-printable") {
    bytes = codec::quoted_printable_decode(body);
    if (!bytes.clean) warnings.push_back("quoted-printable body contained invalid escapes; kept verbatim");
  } else {
    bytes.bytes = std::string(body);
  }
  codec::Decoded txt = codec::to_utf8(bytes.bytes, ct.charset);
  if (!txt.clean) {
    warnings.push_back("body could not be decoded as '" + (ct.charset.empty() ? std::string("utf-8") : ct.charset) +
                       "'; invalid bytes mapped as Latin-1");
  }
  return txt.bytes;
}

inline void collect_parts(std::string_view body, const std::vector<RawHeader>& headers, int depth,
                          TextParts& parts, std::vector<std::string>& warnings) {
  ContentType ct = parse_content_type(find_raw(headers, "Content-Type"));
  std::string disposition = text::to_lower(find_raw(headers, "Content-Disposition").value_or(""));
  bool attachment = disposition.starts_with("attachment");

  if (ct.type == "multipart") {
    if (depth > 16) {
      warnings.push_back("MIME nesting too deep; remaining parts ignored");
      return;
    }
    if (ct.boundary.empty()) {
      warnings.push_back("multipart without boundary; treating body as one text part");
      parts.plain.push_back(decode_part_body(body, headers, ContentType{}, warnings));
      return;
    }
    const std::string delim = "--" + ct.boundary;
    std::vector<std::string_view> chunks;
    std::size_t pos = 0;
    std::size_t current = std::string_view::npos;
    bool closed = false;
    while (pos < body.size()) {
      std::size_t nl = body.find('\n', pos);
      std::size_t line_end = nl == std::string_view::npos ? body.size() : nl;
      std::string_view line = body.substr(pos, line_end - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.starts_with(delim)) {
        std::string_view rest = text::trim(line.substr(delim.size()));
        if (current != std::string_view::npos) {
          std::size_t end = pos;
          // the CRLF preceding the delimiter belongs to the delimiter
          if (end > current && body[end - 1] == '\n') --end;
          if (end > current && body[end - 1] == '\r') --end;
          chunks.push_back(body.substr(current, end - current));
        }
        if (rest.starts_with("--")) {
          closed = true;
          current = std::string_view::npos;
          break;
        }
        if (rest.empty()) {
          current = nl == std::string_view::npos ? body.size() : nl + 1;
        }
      }
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
    }
    if (current != std::string_view::npos) {
      chunks.push_back(body.substr(current));
    }
    if (chunks.empty()) {
      warnings.push_back("multipart boundary not found; treating body as one text part");
      parts.plain.push_back(decode_part_body(body, headers, ContentType{}, warnings));
      return;
    }
    if (!closed) warnings.push_back("multipart closing delimiter missing; remainder kept as last part");
    bool alternative = ct.subtype == "alternative";
    for (auto chunk : chunks) {
      std::string_view head, part_body;
      if (!split_head_body(chunk, head, part_body)) {
        head = {};
        part_body = chunk;
      }
      auto part_headers = parse_header_block(head, warnings, "MIME part");
      TextParts sub;
      collect_parts(part_body, part_headers, depth + 1, sub, warnings);
      if (alternative) {
        // keep one rendering of each kind
        if (parts.plain.empty() && !sub.plain.empty()) parts.plain.push_back(sub.plain.front());
        if (parts.html.empty() && !sub.html.empty()) parts.html.push_back(sub.html.front());
      } else {
        parts.plain.insert(parts.plain.end(), sub.plain.begin(), sub.plain.end());
        parts.html.insert(parts.html.end(), sub.html.begin(), sub.html.end());
      }
    }
    return;
  }
  if (attachment) return;
  if (ct.type == "text" && ct.subtype == "html") {
    parts.html.push_back(decode_part_body(body, headers, ct, warnings));
  } else if (ct.type == "text" || !ct.present) {
    parts.plain.push_back(decode_part_body(body, headers, ct, warnings));
  }
}

inline std::string normalize_body(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\r') {
      if (i + 1 < s.size() && s[i + 1] == '\n') continue;
      out.push_back('\n');
      continue;
    }
    out.push_back(s[i]);
  }
  // drop NULs and trailing whitespace; keep internal layout
  out.erase(std::remove(out.begin(), out.end(), '\0'), out.end());
  std::size_t start = 0;
  while (start < out.size() && (out[start] == '\n' || out[start] == ' ' || out[start] == '\t')) {
    if (out[start] == '\n') {
      ++start;
      continue;
    }
    // leading spaces on the first line are kept only if the line has content
    std::size_t k = start;
    while (k < out.size() && (out[k] == ' ' || out[k] == '\t')) ++k;
    if (k < out.size() && out[k] == '\n') {
      start = k + 1;
      continue;
    }
    break;
  }
  std::size_t end = out.size();
  while (end > start && text::is_space(out[end - 1])) --end;
  return out.substr(start, end - start);
}

}  // namespace detail

inline constexpr std::string_view kFatalWarningPrefix = "fatal: ";

/// Parses arbitrary bytes into a ParsedEmail. Never throws.
inline ParsedEmail parse_email(const RawEmail& raw) {
  ParsedEmail email;
  email.source_id = raw.source_id;
  std::string_view msg = raw.bytes;
  std::string_view head, body;
  bool has_headers = detail::split_head_body(msg, head, body);
  std::vector<detail::RawHeader> raw_headers;
  if (has_headers) {
    raw_headers = detail::parse_header_block(head, email.parse_warnings, "header block");
    if (raw_headers.empty()) {
      // a "header block" with no parseable header is really body text
      body = msg;
      has_headers = false;
    }
  }
  if (!has_headers) email.parse_warnings.push_back("no header block found; input treated as body");

  for (const auto& h : raw_headers) {
    HeaderDecodeResult decoded = decode_encoded_words_ex(h.value);
    if (decoded.flagged) email.parse_warnings.push_back("header '" + h.name + "' contains undecodable text");
    email.headers.push_back({h.name, decoded.text});
  }

  if (auto from = detail::find_raw(raw_headers, "From")) {
    auto boxes = detail::split_structured(*from, ',');
    Mailbox mb = parse_mailbox(boxes.front());
    email.from_display_name = mb.display_name;
    email.from_address = mb.address;
    if (email.from_address.empty()) email.parse_warnings.push_back("From header has no address");
  } else {
    email.parse_warnings.push_back("missing From header");
  }
  if (auto rp = detail::find_raw(raw_headers, "Return-Path")) {
    std::string addr = detail::clean_address(detail::strip_comments(*rp));
    if (!addr.empty()) email.envelope_sender = addr;
  }
  for (std::string_view name : {"To", "Cc"}) {
    for (const auto& h : raw_headers) {
      if (!text::iequals(h.name, name)) continue;
      for (auto& mb : parse_address_list(h.value)) email.recipients.push_back(mb.address);
    }
  }
  if (auto subject = email.header("Subject")) email.subject = text::collapse_whitespace(*subject);
  if (auto date = detail::find_raw(raw_headers, "Date")) {
    email.date_epoch = parse_rfc5322_date(*date);
    if (!email.date_epoch) email.parse_warnings.push_back("unparseable Date header");
  }

  detail::TextParts parts;
  detail::collect_parts(body, raw_headers, 0, parts, email.parse_warnings);
  if (!parts.html.empty()) email.body_html = parts.html.front();
  std::string text_body;
  if (!parts.plain.empty()) {
    for (std::size_t i = 0; i < parts.plain.size(); ++i) {
      if (i) text_body += "\n\n";
      text_body += parts.plain[i];
    }
  } else {
    for (std::size_t i = 0; i < parts.html.size(); ++i) {
      if (i) text_body += "\n\n";
      text_body += html::render(parts.html[i]).text;
    }
  }
  email.body_text = detail::normalize_body(text_body);
  if (raw_headers.empty() && email.body_text.empty()) {
    email.parse_warnings.push_back(std::string(kFatalWarningPrefix) + "no header or body content found");
  }
  email.segments = extract_segments(email);
  email.urls = extract_urls(email);
  return email;
}

// ---------------------------------------------------------------------------
// Serialization back to RFC 5322 (used for round-trip checks and fixtures)

namespace detail {

inline bool needs_encoding(std::string_view s) {
  for (char c : s) {
    auto u = static_cast<unsigned char>(c);
    if (u >= 0x80 || u < 0x20) return true;
  }
  return s.find("=?") != std::string_view::npos;
}

inline std::string encode_header_text(std::string_view s) {
  if (!needs_encoding(s)) return std::string(s);
  return "=?UTF-8?B?" + codec::base64_encode(s) + "?=";
}

inline std::string format_display_name(std::string_view name) {
  if (name.empty()) return {};
  if (needs_encoding(name)) return encode_header_text(name) + " ";
  std::string quoted = "\"";
  for (char c : name) {
    if (c == '"' || c == '\\') quoted.push_back('\\');
    quoted.push_back(c);
  }
  return quoted + "\" ";
}

inline std::string wrap_base64(std::string_view s) {
  std::string b64 = codec::base64_encode(s);
  std::string out;
  for (std::size_t i = 0; i < b64.size(); i += 76) out += b64.substr(i, 76) + "\r\n";
  return out;
}

}  // namespace detail

/// "Mon, 18 Mar 2024 09:15:00 +0000" for a Unix timestamp.
inline std::string format_rfc5322_date(std::int64_t epoch) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{epoch}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const weekday wd{day};
  const auto tod = tp - day;
  static constexpr const char* kDays[] = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
  static constexpr const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                            "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  const auto secs = tod.count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s, %02u %s %04d %02lld:%02lld:%02lld +0000", kDays[wd.c_encoding()],
                static_cast<unsigned>(ymd.day()), kMonths[static_cast<unsigned>(ymd.month()) - 1],
                static_cast<int>(ymd.year()), static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                static_cast<long long>(secs % 60));
  return buf;
}

inline std::string serialize_email(const ParsedEmail& email) {
  std::string out;
  if (auto mid = email.header("Message-ID")) out += "Message-ID: " + *mid + "\r\n";
  if (email.date_epoch) out += "Date: " + format_rfc5322_date(*email.date_epoch) + "\r\n";
  out += "From: " + detail::format_display_name(email.from_display_name) + "<" + email.from_address + ">\r\n";
  if (email.envelope_sender) out += "Return-Path: <" + *email.envelope_sender + ">\r\n";
  if (!email.recipients.empty()) {
    out += "To: ";
    for (std::size_t i = 0; i < email.recipients.size(); ++i) {
      if (i) out += ", ";
      out += "<" + email.recipients[i] + ">";
    }
    out += "\r\n";
  }
  out += "Subject: " + detail::encode_header_text(email.subject) + "\r\n";
  out += "MIME-Version: 1.0\r\n";
  if (email.body_html.empty()) {
    out += "Content-Type: text/plain; charset=utf-8\r\nContent-Transfer-Encoding: base64\r\n\r\n";
    out += detail::wrap_base64(email.body_text);
    return out;
  }
  const std::string boundary = "=_bec_boundary_0";
  out += "Content-Type: multipart/alternative; boundary=\"" + boundary + "\"\r\n\r\n";
  out += "--" + boundary + "\r\nContent-Type: text/plain; charset=utf-8\r\nContent-Transfer-Encoding: base64\r\n\r\n";
  out += detail::wrap_base64(email.body_text);
  out += "--" + boundary + "\r\nContent-Type: text/html; charset=utf-8\r\nContent-Transfer-Encoding: base64\r\n\r\n";
  out += detail::wrap_base64(email.body_html);
  out += "--" + boundary + "--\r\n";
  return out;
}

}  // namespace bec
