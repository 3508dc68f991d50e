#pragma once

// Hashed word n-gram features. Vocabulary-free and deterministic.

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bec/util/text.hpp"

namespace bec::content {

inline constexpr std::uint32_t kClassifierBuckets = 1u << 18;
inline constexpr std::uint32_t kPrefilterBuckets = 1u << 16;

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Lowercased tokens: runs of ASCII alphanumerics or non-ASCII bytes.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80) {
      cur.push_back(text::lower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Sorted, deduplicated bucket indices with binary activation.
struct SparseFeatures {
  std::vector<std::uint32_t> indices;
  std::size_t token_count = 0;
  bool empty() const { return indices.empty(); }
};

inline SparseFeatures featurize(std::string_view s, std::uint32_t buckets, bool bigrams) {
  SparseFeatures f;
  auto tokens = tokenize(s);
  f.token_count = tokens.size();
  f.indices.reserve(tokens.size() * 2);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    f.indices.push_back(static_cast<std::uint32_t>(fnv1a(tokens[i], fnv1a("u:")) % buckets));
    if (bigrams && i + 1 < tokens.size()) {
      std::uint64_t h = fnv1a(tokens[i], fnv1a("b:"));
      h = fnv1a(" ", h);
      h = fnv1a(tokens[i + 1], h);
      f.indices.push_back(static_cast<std::uint32_t>(h % buckets));
    }
  }
  std::sort(f.indices.begin(), f.indices.end());
  f.indices.erase(std::unique(f.indices.begin(), f.indices.end()), f.indices.end());
  return f;
}

}  // namespace bec::content
