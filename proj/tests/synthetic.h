#pragma once

#include <random>
#include <set>
#include <string>
#include <vector>

#include "dekompost/corpus.h"
#include "dekompost/neuro.h"
#include "dekompost/tokenize.h"

namespace test_util {

// Compounds of two pseudo-roots (3-6 letters) from a fixed pool, surfaces unique.
inline std::vector<dekompost::corpus::CompoundEntry> synthetic_compounds(std::size_t n, std::uint64_t seed,
                                                                         std::size_t pool_size = 40) {
  std::mt19937_64 rng(seed);
  const std::string consonants = "bdfgklmnprstvz";
  const std::string vowels = "aeiou";
  std::set<std::string> pool_set;
  while (pool_set.size() < pool_size) {
    std::string root;
    const std::size_t len = 3 + rng() % 4;
    for (std::size_t i = 0; i < len; ++i) {
      const auto& alphabet = i % 2 ? vowels : consonants;
      root += alphabet[rng() % alphabet.size()];
    }
    pool_set.insert(root);
  }
  std::vector<std::string> pool(pool_set.begin(), pool_set.end());
  std::set<std::string> seen;
  std::vector<dekompost::corpus::CompoundEntry> out;
  while (out.size() < n) {
    const auto& a = pool[rng() % pool.size()];
    const auto& b = pool[rng() % pool.size()];
    if (!seen.insert(a + b).second) continue;
    std::string head = b;
    head[0] = static_cast<char>(head[0] - 32);
    std::string modifier = a;
    modifier[0] = static_cast<char>(modifier[0] - 32);
    out.push_back({modifier + b, modifier, head, {}});
  }
  return out;
}

struct CharDataset {
  dekompost::neuro::Vocab vocab;
  std::vector<dekompost::neuro::TrainExample> examples;
};

inline CharDataset char_dataset(const std::vector<dekompost::corpus::CompoundEntry>& entries) {
  CharDataset d;
  std::vector<dekompost::tokenize::TokenSequence> seqs;
  for (const auto& e : entries) seqs.push_back(dekompost::tokenize::char_tokenize(e.surface));
  d.vocab = dekompost::neuro::Vocab::build(seqs);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto ex = dekompost::neuro::make_example(d.vocab, seqs[i], dekompost::corpus::derive_boundary(entries[i]));
    if (ex) d.examples.push_back(std::move(*ex));
  }
  return d;
}

}  // namespace test_util
