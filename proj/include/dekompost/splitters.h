#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dekompost/corpus.h"
#include "dekompost/neuro.h"
#include "dekompost/tokenize.h"

namespace dekompost::splitters {

enum class Method { frequency, ngram, neural, none };

std::string to_string(Method m);
Method parse_method(std::string_view name);

inline constexpr std::size_t kMinPartLen = 3;

// left + right == surface unless method == none (then right is empty).
struct SplitResult {
  std::string left;
  std::string right;
  double score = 0.0;
  Method method = Method::none;
  std::string left_lemma;  // frequency splitter only

  // Character offset of the split, nullopt for method none.
  std::optional<std::size_t> boundary() const;
};

SplitResult no_split(std::string_view word, double score = 0.0);
SplitResult make_split(std::string_view word, std::size_t boundary, double score, Method method);

// A left-part rewrite towards a lemma, e.g. strip the linking "s".
struct Transform {
  enum class Kind { strip, add, deumlaut };
  Kind kind = Kind::strip;
  std::u32string suffix;

  // nullopt when the transform does not apply.
  std::optional<std::u32string> apply(std::u32string_view left) const;
  std::string name() const;
};

struct TransformTable {
  std::vector<Transform> transforms;

  // strip s, es, n, en, nen, e, er; add e; de-umlaut.
  static TransformTable defaults();
  // Lines "strip:<suffix>", "add:<suffix>" or "deumlaut"; '#' comments.
  static TransformTable parse(std::string_view text);
  static TransformTable load(const std::filesystem::path& path);

  std::vector<std::u32string> strip_suffixes() const;
};

struct SplitCandidate {
  std::size_t boundary = 0;
  std::string left_lemma;
  std::string right;
  std::uint64_t left_freq = 0;
  std::uint64_t right_freq = 0;
  int transform = -1;  // index into the table; -1 = identity

  double score() const;
};

std::vector<SplitCandidate> enumerate_candidates(std::string_view word, const corpus::Lexicon& lexicon,
                                                 const TransformTable& transforms,
                                                 std::size_t min_part_len = kMinPartLen);

// Geometric mean of part frequencies against the whole-word frequency.
SplitResult frequency_split(std::string_view word, const corpus::Lexicon& lexicon,
                            const TransformTable& transforms, std::size_t min_part_len = kMinPartLen);

struct PositionCounts {
  std::uint64_t begin = 0;
  std::uint64_t middle = 0;
  std::uint64_t end = 0;

  std::uint64_t total() const { return begin + middle + end; }
  bool operator==(const PositionCounts&) const = default;
};

inline constexpr std::array<int, 3> kNgramOrders = {2, 3, 4};

struct NgramStats {
  std::unordered_map<std::u32string, PositionCounts> counts;

  const PositionCounts* find(std::u32string_view gram) const;
  PositionCounts at(std::string_view gram) const;  // zero counts when unseen
  void merge(const NgramStats& other);
};

NgramStats collect_ngram_stats(const corpus::Lexicon& lexicon);

// Per-order components, each 1/2 (endness + beginness) for n = 2, 3, 4.
std::array<double, 3> ngram_score_components(std::string_view word, std::size_t boundary,
                                             const NgramStats& stats);
double ngram_position_score(std::string_view word, std::size_t boundary, const NgramStats& stats);
SplitResult ngram_split(std::string_view word, const NgramStats& stats,
                        std::size_t min_part_len = kMinPartLen);

// Token with maximal split probability, excluding the last token (ties go
// left). nullopt for fewer than two tokens.
std::optional<std::size_t> argmax_split_token(std::span<const double> probs);

SplitResult neural_split(const neuro::LabelerParams& params, const neuro::LabelerConfig& config,
                         const tokenize::Tokenizer& tokenizer, std::string_view word);
SplitResult neural_split(const neuro::LoadedLabeler& model, std::string_view word);

}  // namespace dekompost::splitters
