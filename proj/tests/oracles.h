#pragma once

// Independent reference implementations used to freeze expected values.

#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dekompost/common.h"
#include "dekompost/corpus.h"
#include "dekompost/splitters.h"
#include "test_util.h"

namespace test_util {

struct OracleRule {
  char kind;  // 's' strip, 'a' add, 'u' de-umlaut
  std::u32string suffix;
};

inline std::vector<OracleRule> oracle_default_rules() {
  return {{'s', U"s"}, {'s', U"es"}, {'s', U"n"}, {'s', U"en"}, {'s', U"nen"},
          {'s', U"e"}, {'s', U"er"}, {'a', U"e"}, {'u', U""}};
}

struct OracleSplit {
  std::optional<std::size_t> boundary;
  double score = 0.0;
  std::string left_lemma;
};

// Enumerates every boundary and every rule, keeping the first strict maximum.
inline OracleSplit brute_frequency_split(const std::string& word, const std::map<std::string, std::uint64_t>& lex,
                                         const std::vector<OracleRule>& rules, std::size_t min_len = 3) {
  auto freq = [&](const std::u32string& w) -> double {
    auto it = lex.find(dekompost::utf8::encode(w));
    return it == lex.end() ? 0.0 : static_cast<double>(it->second);
  };
  const auto w = dekompost::utf8::decode(dekompost::utf8::to_lower(word));
  const double whole = freq(w);
  OracleSplit best{std::nullopt, whole, ""};
  double best_sq = whole * whole;
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (i < min_len || w.size() - i < min_len) continue;
    const auto left = w.substr(0, i);
    const auto right = w.substr(i);
    std::vector<std::u32string> lemmas{left};
    for (const auto& r : rules) {
      std::u32string lemma;
      if (r.kind == 's') {
        if (left.size() <= r.suffix.size() || !left.ends_with(r.suffix)) {
          lemmas.push_back(U"");
          continue;
        }
        lemma = left.substr(0, left.size() - r.suffix.size());
      } else if (r.kind == 'a') {
        lemma = left + r.suffix;
      } else {
        lemma = left;
        for (auto& c : lemma) {
          if (c == U'ä') c = U'a';
          if (c == U'ö') c = U'o';
          if (c == U'ü') c = U'u';
        }
        if (lemma == left) lemma.clear();
      }
      lemmas.push_back(lemma);
    }
    for (const auto& lemma : lemmas) {
      if (lemma.empty()) continue;
      const double sq = freq(lemma) * freq(right);
      if (sq > best_sq) {
        best_sq = sq;
        best = {i, std::sqrt(sq), dekompost::utf8::encode(lemma)};
      }
    }
  }
  return best;
}

struct FrequencyCase {
  std::map<std::string, std::uint64_t> lexicon;
  std::string word;
};

// Small lexicons over a tiny alphabet so that many boundaries and
// transforms actually fire, words built from lexicon pieces plus linkers.
inline FrequencyCase random_frequency_case(std::mt19937_64& rng) {
  static const std::vector<std::string> alphabet{"a", "b", "e", "n", "r", "s", "t", "ä", "ü"};
  auto piece = [&](std::size_t lo, std::size_t hi) {
    std::string s;
    const std::size_t len = lo + rng() % (hi - lo + 1);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
    return s;
  };
  FrequencyCase c;
  const std::size_t size = 1 + rng() % 50;
  std::vector<std::string> words;
  while (c.lexicon.size() < size) {
    auto w = piece(2, 6);
    c.lexicon[w] = 1 + rng() % 40;
    words.push_back(w);
  }
  static const std::vector<std::string> linkers{"", "", "s", "es", "n", "en", "e", "er"};
  switch (rng() % 4) {
    case 0: c.word = piece(1, 15); break;
    default: {
      auto left = words[rng() % words.size()];
      if (rng() % 4 == 0) {
        for (const auto& [from, to] : {std::pair<std::string, std::string>{"a", "ä"}, {"u", "ü"}}) {
          if (auto p = left.find(from); p != std::string::npos) left.replace(p, from.size(), to);
        }
      }
      if (rng() % 5 == 0 && left.size() > 3 && left.back() == 'e') left.pop_back();
      c.word = left + linkers[rng() % linkers.size()] + words[rng() % words.size()];
      if (rng() % 6 == 0) c.lexicon[c.word] = rng() % 30;
      break;
    }
  }
  if (dekompost::utf8::length(c.word) > 15) c.word = dekompost::utf8::substr(c.word, 0, 15);
  if (c.word.empty()) c.word = "a";
  return c;
}

inline dekompost::corpus::Lexicon to_lexicon(const std::map<std::string, std::uint64_t>& m) {
  dekompost::corpus::Lexicon lex;
  for (const auto& [w, f] : m) lex.counts.emplace(w, f);
  return lex;
}

inline bool agrees(const dekompost::splitters::SplitResult& r, const OracleSplit& o) {
  if (r.boundary() != o.boundary) return false;
  if (!o.boundary) return r.method == dekompost::splitters::Method::none;
  return r.method == dekompost::splitters::Method::frequency && r.score == o.score && r.left_lemma == o.left_lemma;
}

}  // namespace test_util
