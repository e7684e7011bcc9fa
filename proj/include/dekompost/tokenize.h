#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dekompost/corpus.h"

namespace dekompost::tokenize {

// Half-open character (code point) range in the source word.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Span&) const = default;
};

struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<Span> spans;

  std::size_t size() const { return tokens.size(); }
  std::string joined() const;
};

struct BpeModel {
  std::vector<std::pair<std::string, std::string>> merges;  // application order
  std::set<std::string> vocab;
  std::size_t vocab_size_target = 0;
};

// labels[i] == 1 marks a split right after token i. `lossy` is set when the
// gold boundary fell strictly inside a token.
struct LabelSequence {
  std::vector<int> labels;
  bool lossy = false;
};

enum class Mode { character, bpe };

TokenSequence char_tokenize(std::string_view word);

// Deterministic BPE: most frequent adjacent pair first, ties broken by the
// lexicographically smallest (left, right). Stops at the target vocabulary size
// or when no pair occurs at least twice.
BpeModel bpe_train(const std::vector<std::string>& corpus, std::size_t vocab_size);
// Merge-pair -> position in the merge list.
class RankTable {
 public:
  RankTable() = default;
  explicit RankTable(const BpeModel& model);
  std::optional<std::size_t> rank(const std::string& left, const std::string& right) const;

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<std::string, std::string>& p) const {
      return std::hash<std::string>()(p.first) * 1000003u ^ std::hash<std::string>()(p.second);
    }
  };
  std::unordered_map<std::pair<std::string, std::string>, std::size_t, PairHash> ranks_;
};

TokenSequence bpe_encode(const BpeModel& model, std::string_view word);
TokenSequence bpe_encode(const BpeModel& model, const RankTable& ranks, std::string_view word);

LabelSequence project_labels(corpus::BoundaryLabel boundary, const TokenSequence& tokens);

// Merge file: one "left right" pair per line, in application order.
std::string serialize_merges(const BpeModel& model);
BpeModel parse_merges(std::string_view text);
BpeModel load_merges(const std::filesystem::path& path);
void save_merges(const BpeModel& model, const std::filesystem::path& path);

// Character mode when `model` is null.
class Tokenizer {
 public:
  Tokenizer() = default;
  explicit Tokenizer(BpeModel model);

  Mode mode() const { return mode_; }
  const BpeModel& bpe() const { return bpe_; }
  TokenSequence encode(std::string_view word) const;

 private:
  Mode mode_ = Mode::character;
  BpeModel bpe_;
  RankTable ranks_;
};

}  // namespace dekompost::tokenize
