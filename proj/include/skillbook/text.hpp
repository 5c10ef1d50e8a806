#pragma once
// Tokenization and the dependency-free text similarities used for skill
// retrieval (cosine over hashed token multisets) and proposal dedup
// (Jaccard over token sets).

#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rng.hpp"

namespace skillbook {

// Sparse token-count vector keyed by FNV-1a token hash. std::map keeps the
// reduction order over entries fixed.
using TokenCounts = std::map<std::uint64_t, double>;

// Lowercased maximal [a-z0-9]+ runs; everything else is a separator.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline TokenCounts token_counts(std::string_view text) {
  TokenCounts counts;
  for (const auto& tok : tokenize(text)) counts[fnv1a(tok)] += 1.0;
  return counts;
}

inline TokenCounts token_counts(const std::vector<std::string>& texts) {
  TokenCounts counts;
  for (const auto& text : texts)
    for (const auto& tok : tokenize(text)) counts[fnv1a(tok)] += 1.0;
  return counts;
}

// Cosine similarity between two sparse count vectors; 0 when either is empty.
inline double cosine(const TokenCounts& a, const TokenCounts& b) {
  if (a.empty() || b.empty()) return 0.0;
  const TokenCounts& small = a.size() <= b.size() ? a : b;
  const TokenCounts& large = a.size() <= b.size() ? b : a;
  double dot = 0.0;
  for (const auto& [hash, count] : small) {
    auto it = large.find(hash);
    if (it != large.end()) dot += count * it->second;
  }
  if (dot == 0.0) return 0.0;
  double na = 0.0, nb = 0.0;
  for (const auto& [hash, count] : a) na += count * count;
  for (const auto& [hash, count] : b) nb += count * count;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::set<std::string> token_set(std::string_view text) {
  std::set<std::string> out;
  for (auto& tok : tokenize(text)) out.insert(std::move(tok));
  return out;
}

inline std::set<std::string> token_set(const std::vector<std::string>& texts) {
  std::set<std::string> out;
  for (const auto& text : texts)
    for (auto& tok : tokenize(text)) out.insert(std::move(tok));
  return out;
}

// Jaccard overlap of two token sets; two empty sets count as identical.
inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& large = a.size() <= b.size() ? b : a;
  for (const auto& tok : small) inter += large.count(tok);
  std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace skillbook
