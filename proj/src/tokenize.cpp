#include "dekompost/tokenize.h"

#include <fstream>
#include <limits>
#include <map>
#include <tuple>
#include <unordered_map>

namespace dekompost::tokenize {

namespace {

using Pair = std::pair<std::string, std::string>;

TokenSequence from_pieces(std::vector<std::u32string> pieces) {
  TokenSequence out;
  std::size_t pos = 0;
  for (auto& p : pieces) {
    out.spans.push_back(Span{pos, pos + p.size()});
    pos += p.size();
    out.tokens.push_back(utf8::encode(p));
  }
  return out;
}

std::vector<std::string> code_points(std::string_view word) {
  std::vector<std::string> out;
  for (char32_t c : utf8::decode(word)) out.push_back(utf8::encode(c));
  return out;
}

// Incremental pair statistics for training.
class PairTable {
 public:
  void change(const Pair& pair, long delta, std::size_t word) {
    auto& count = counts_[pair];
    if (count > 0) order_.erase({-count, pair.first, pair.second});
    count += delta;
    if (count > 0) order_.insert({-count, pair.first, pair.second});
    if (delta > 0) where_[pair].insert(word);
  }

  // Highest count, ties to the smallest pair. Count 0 when empty.
  std::pair<Pair, long> best() const {
    if (order_.empty()) return {{}, 0};
    const auto& [neg, left, right] = *order_.begin();
    return {{left, right}, -neg};
  }

  std::set<std::size_t> words_with(const Pair& pair) const {
    auto it = where_.find(pair);
    return it == where_.end() ? std::set<std::size_t>{} : it->second;
  }

 private:
  std::map<Pair, long> counts_;
  std::map<Pair, std::set<std::size_t>> where_;
  std::set<std::tuple<long, std::string, std::string>> order_;
};

void merge_in_place(std::vector<std::string>& symbols, const Pair& pair) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == pair.first && symbols[i + 1] == pair.second) {
      out.push_back(pair.first + pair.second);
      ++i;
    } else {
      out.push_back(symbols[i]);
    }
  }
  symbols = std::move(out);
}

}  // namespace

std::string TokenSequence::joined() const {
  std::string out;
  for (const auto& t : tokens) out += t;
  return out;
}

TokenSequence char_tokenize(std::string_view word) {
  if (word.empty()) throw UsageError("cannot tokenize an empty word");
  std::vector<std::u32string> pieces;
  for (char32_t c : utf8::decode(word)) pieces.emplace_back(1, c);
  return from_pieces(std::move(pieces));
}

BpeModel bpe_train(const std::vector<std::string>& corpus, std::size_t vocab_size) {
  std::map<std::string, long> word_freq;
  for (const auto& w : corpus) {
    if (!w.empty()) ++word_freq[w];
  }
  std::vector<std::vector<std::string>> words;
  std::vector<long> freqs;
  BpeModel model;
  model.vocab_size_target = vocab_size;
  for (const auto& [w, f] : word_freq) {
    words.push_back(code_points(w));
    freqs.push_back(f);
    for (const auto& c : words.back()) model.vocab.insert(c);
  }
  if (vocab_size <= model.vocab.size()) {
    throw UsageError("BPE vocabulary size " + std::to_string(vocab_size) +
                     " must exceed the number of distinct characters (" +
                     std::to_string(model.vocab.size()) + ")");
  }

  PairTable table;
  auto account = [&](std::size_t w, long sign) {
    const auto& s = words[w];
    for (std::size_t i = 0; i + 1 < s.size(); ++i) table.change({s[i], s[i + 1]}, sign * freqs[w], w);
  };
  for (std::size_t w = 0; w < words.size(); ++w) account(w, +1);

  while (model.vocab.size() < vocab_size) {
    auto [pair, count] = table.best();
    if (count < 2) break;
    for (std::size_t w : table.words_with(pair)) {
      account(w, -1);
      merge_in_place(words[w], pair);
      account(w, +1);
    }
    model.merges.push_back(pair);
    model.vocab.insert(pair.first + pair.second);
  }
  return model;
}

RankTable::RankTable(const BpeModel& model) {
  for (std::size_t r = 0; r < model.merges.size(); ++r) ranks_.emplace(model.merges[r], r);
}

std::optional<std::size_t> RankTable::rank(const std::string& left, const std::string& right) const {
  auto it = ranks_.find({left, right});
  if (it == ranks_.end()) return std::nullopt;
  return it->second;
}

TokenSequence bpe_encode(const BpeModel& model, std::string_view word) {
  return bpe_encode(model, RankTable(model), word);
}

TokenSequence bpe_encode(const BpeModel& model, const RankTable& ranks, std::string_view word) {
  if (word.empty()) throw UsageError("cannot tokenize an empty word");
  // Sequential application of the merge list, skipping merges that cannot fire:
  // repeatedly take the lowest-ranked adjacent pair beyond the last applied rank.
  std::vector<std::u32string> pieces;
  for (char32_t c : utf8::decode(word)) pieces.emplace_back(1, c);
  std::vector<std::string> symbols;
  for (const auto& p : pieces) symbols.push_back(utf8::encode(p));

  std::size_t cursor = 0;  // ranks below this have already been applied
  while (symbols.size() > 1) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto r = ranks.rank(symbols[i], symbols[i + 1]);
      if (r && *r >= cursor && *r < best) best = *r;
    }
    if (best == std::numeric_limits<std::size_t>::max()) break;
    const auto& pair = model.merges[best];
    std::vector<std::u32string> merged_pieces;
    std::vector<std::string> merged_symbols;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size() && symbols[i] == pair.first && symbols[i + 1] == pair.second) {
        merged_pieces.push_back(pieces[i] + pieces[i + 1]);
        merged_symbols.push_back(symbols[i] + symbols[i + 1]);
        ++i;
      } else {
        merged_pieces.push_back(pieces[i]);
        merged_symbols.push_back(symbols[i]);
      }
    }
    pieces = std::move(merged_pieces);
    symbols = std::move(merged_symbols);
    cursor = best + 1;
  }
  return from_pieces(std::move(pieces));
}

LabelSequence project_labels(corpus::BoundaryLabel boundary, const TokenSequence& tokens) {
  const std::size_t n = tokens.size();
  if (n == 0) throw UsageError("cannot label an empty token sequence");
  const std::size_t length = tokens.spans.back().end;
  if (boundary.split_index < 1 || boundary.split_index >= length) {
    throw UsageError("boundary " + std::to_string(boundary.split_index) +
                     " out of range for word of length " + std::to_string(length));
  }
  if (n == 1) throw UsageError("single-token word cannot carry a split label");
  LabelSequence out;
  out.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& span = tokens.spans[i];
    if (span.end == boundary.split_index) {
      out.labels[i] = 1;
      return out;
    }
    if (span.begin < boundary.split_index && boundary.split_index < span.end) {
      out.labels[i] = 1;
      out.lossy = true;
      return out;
    }
  }
  throw UsageError("token spans do not cover the boundary");
}

std::string serialize_merges(const BpeModel& model) {
  std::string out;
  for (const auto& [l, r] : model.merges) {
    if (l.find_first_of(" \n") != std::string::npos || r.find_first_of(" \n") != std::string::npos) {
      throw DataError("merge '" + l + "' + '" + r + "' contains whitespace");
    }
    out += l + ' ' + r + '\n';
  }
  return out;
}

BpeModel parse_merges(std::string_view text) {
  BpeModel model;
  std::size_t line_no = 0;
  for (auto& line : split_string(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("#version", 0) == 0) continue;
    auto parts = split_string(line, ' ');
    if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
      throw DataError("line " + std::to_string(line_no) + ": expected 'left right'");
    }
    if (!utf8::valid(line)) throw DataError("line " + std::to_string(line_no) + ": invalid UTF-8");
    model.vocab.insert(parts[0]);
    model.vocab.insert(parts[1]);
    model.vocab.insert(parts[0] + parts[1]);
    model.merges.emplace_back(parts[0], parts[1]);
  }
  model.vocab_size_target = model.vocab.size();
  return model;
}

BpeModel load_merges(const std::filesystem::path& path) { return parse_merges(corpus::read_file(path)); }

void save_merges(const BpeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize_merges(model);
}

Tokenizer::Tokenizer(BpeModel model)
    : mode_(Mode::bpe), bpe_(std::move(model)), ranks_(bpe_) {}

TokenSequence Tokenizer::encode(std::string_view word) const {
  return mode_ == Mode::character ? char_tokenize(word) : bpe_encode(bpe_, ranks_, word);
}

}  // namespace dekompost::tokenize
