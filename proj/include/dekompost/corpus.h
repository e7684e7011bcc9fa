#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dekompost/common.h"

namespace dekompost::corpus {

struct CompoundEntry {
  std::string surface;
  std::string modifier;
  std::string head;
  std::optional<std::uint64_t> frequency;

  bool operator==(const CompoundEntry&) const = default;
};

struct AnnotatedCompound {
  CompoundEntry entry;
  int category = 0;  // 0 = compositional ... 3 = fully idiomatic

  bool operator==(const AnnotatedCompound&) const = default;
};

// Number of surface characters left of the split; always in [1, len-1].
struct BoundaryLabel {
  std::size_t split_index = 0;

  bool operator==(const BoundaryLabel&) const = default;
};

enum class AlignRule { direct_suffix, stripped_head, deumlauted_head };

struct Alignment {
  BoundaryLabel boundary;
  AlignRule rule = AlignRule::direct_suffix;
};

class UnalignableError : public DataError {
 public:
  explicit UnalignableError(std::string surface)
      : DataError("unalignable compound: " + surface), surface_(std::move(surface)) {}
  const std::string& surface() const { return surface_; }

 private:
  std::string surface_;
};

// Keys are lowercased word forms; zero counts are never stored.
struct Lexicon {
  std::map<std::string, std::uint64_t, std::less<>> counts;

  void add(std::string_view word, std::uint64_t count = 1);
  // Looks up an already-lowercased form.
  std::uint64_t freq(std::string_view lowered) const;
  bool contains(std::string_view lowered) const { return freq(lowered) > 0; }
  std::size_t size() const { return counts.size(); }
  bool empty() const { return counts.empty(); }
};

struct Ratios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

inline constexpr std::uint64_t kDefaultSeed = 13;

template <typename T>
struct DatasetSplit {
  std::vector<T> train;
  std::vector<T> dev;
  std::vector<T> test;
  std::uint64_t seed = kDefaultSeed;
};

// Split file: surface TAB modifier TAB head [TAB frequency], '#' comments,
// '|' separating alternative modifier readings.
std::vector<CompoundEntry> parse_split_text(std::string_view text);
std::vector<CompoundEntry> parse_split_file(const std::filesystem::path& path);
std::string serialize_split(const std::vector<CompoundEntry>& entries);

// Annotated file: frequency TAB surface TAB modifier TAB head TAB category.
std::vector<AnnotatedCompound> parse_annotated_text(std::string_view text);
std::vector<AnnotatedCompound> parse_annotated_file(const std::filesystem::path& path);
std::string serialize_annotated(const std::vector<AnnotatedCompound>& entries);

// Frequency file: word TAB count.
Lexicon parse_frequency_text(std::string_view text);
Lexicon parse_frequency_file(const std::filesystem::path& path);
std::string serialize_lexicon(const Lexicon& lexicon);

// Head-anchored boundary. Falls back to a stripped head (-e/-en/-n/-s), then
// to de-umlauted forms; throws UnalignableError when nothing matches.
Alignment align(const CompoundEntry& entry);
BoundaryLabel derive_boundary(const CompoundEntry& entry);

Lexicon build_lexicon(const std::vector<CompoundEntry>& entries,
                      const std::optional<std::filesystem::path>& extra = std::nullopt);

struct PartitionIndices {
  std::vector<std::size_t> train, dev, test;
};

void validate_ratios(const Ratios& ratios);
PartitionIndices partition_indices(std::size_t n, const Ratios& ratios, std::uint64_t seed);

template <typename T>
DatasetSplit<T> partition(const std::vector<T>& items, const Ratios& ratios, std::uint64_t seed) {
  auto idx = partition_indices(items.size(), ratios, seed);
  DatasetSplit<T> out;
  out.seed = seed;
  for (auto i : idx.train) out.train.push_back(items[i]);
  for (auto i : idx.dev) out.dev.push_back(items[i]);
  for (auto i : idx.test) out.test.push_back(items[i]);
  return out;
}

struct CorpusStats {
  std::size_t entries = 0;
  std::size_t distinct_modifiers = 0;
  std::size_t distinct_heads = 0;
  std::size_t hapax_modifiers = 0;
  std::size_t hapax_heads = 0;
  std::size_t unalignable = 0;
};

// Distinct counts are over lemma strings as written (case-sensitive).
CorpusStats compute_stats(const std::vector<CompoundEntry>& entries);

std::string read_file(const std::filesystem::path& path);

}  // namespace dekompost::corpus
