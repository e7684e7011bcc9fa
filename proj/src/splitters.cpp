#include "dekompost/splitters.h"

#include <cmath>

namespace dekompost::splitters {

namespace {

using u128 = unsigned __int128;

std::u32string lower32(std::string_view s) { return utf8::to_lower(utf8::decode(s)); }

std::string transform_suffix(std::string_view line, std::string_view prefix) {
  auto suffix = std::string(line.substr(prefix.size()));
  if (suffix.empty()) throw DataError("transform '" + std::string(line) + "' has an empty suffix");
  return suffix;
}

double ratio(std::uint64_t part, std::uint64_t total) {
  return total == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(total);
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::frequency: return "frequency";
    case Method::ngram: return "ngram";
    case Method::neural: return "neural";
    case Method::none: return "none";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "frequency") return Method::frequency;
  if (name == "ngram") return Method::ngram;
  if (name == "neural") return Method::neural;
  throw UsageError("unknown split method '" + std::string(name) + "'");
}

std::optional<std::size_t> SplitResult::boundary() const {
  if (method == Method::none) return std::nullopt;
  return utf8::length(left);
}

SplitResult no_split(std::string_view word, double score) {
  SplitResult r;
  r.left = std::string(word);
  r.score = score;
  return r;
}

SplitResult make_split(std::string_view word, std::size_t boundary, double score, Method method) {
  auto u = utf8::decode(word);
  SplitResult r;
  r.left = utf8::encode(std::u32string_view(u).substr(0, boundary));
  r.right = utf8::encode(std::u32string_view(u).substr(boundary));
  r.score = score;
  r.method = method;
  return r;
}

std::optional<std::u32string> Transform::apply(std::u32string_view left) const {
  switch (kind) {
    case Kind::strip:
      if (left.size() > suffix.size() && left.substr(left.size() - suffix.size()) == suffix) {
        return std::u32string(left.substr(0, left.size() - suffix.size()));
      }
      return std::nullopt;
    case Kind::add:
      return std::u32string(left) + suffix;
    case Kind::deumlaut: {
      std::u32string out(left);
      bool changed = false;
      for (auto& c : out) {
        if (c == U'ä') c = U'a', changed = true;
        else if (c == U'ö') c = U'o', changed = true;
        else if (c == U'ü') c = U'u', changed = true;
      }
      if (!changed) return std::nullopt;
      return out;
    }
  }
  return std::nullopt;
}

std::string Transform::name() const {
  switch (kind) {
    case Kind::strip: return "strip:" + utf8::encode(suffix);
    case Kind::add: return "add:" + utf8::encode(suffix);
    case Kind::deumlaut: return "deumlaut";
  }
  return "?";
}

TransformTable TransformTable::defaults() {
  TransformTable t;
  for (const char32_t* s : {U"s", U"es", U"n", U"en", U"nen", U"e", U"er"}) {
    t.transforms.push_back({Transform::Kind::strip, s});
  }
  t.transforms.push_back({Transform::Kind::add, U"e"});
  t.transforms.push_back({Transform::Kind::deumlaut, U""});
  return t;
}

TransformTable TransformTable::parse(std::string_view text) {
  TransformTable t;
  std::size_t line_no = 0;
  for (auto line : split_string(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("strip:", 0) == 0) {
      t.transforms.push_back({Transform::Kind::strip, lower32(transform_suffix(line, "strip:"))});
    } else if (line.rfind("add:", 0) == 0) {
      t.transforms.push_back({Transform::Kind::add, lower32(transform_suffix(line, "add:"))});
    } else if (line == "deumlaut") {
      t.transforms.push_back({Transform::Kind::deumlaut, U""});
    } else {
      throw DataError("line " + std::to_string(line_no) + ": unknown transform '" + line + "'");
    }
  }
  return t;
}

TransformTable TransformTable::load(const std::filesystem::path& path) { return parse(corpus::read_file(path)); }

std::vector<std::u32string> TransformTable::strip_suffixes() const {
  std::vector<std::u32string> out;
  for (const auto& tr : transforms) {
    if (tr.kind == Transform::Kind::strip) out.push_back(tr.suffix);
  }
  return out;
}

double SplitCandidate::score() const {
  return std::sqrt(static_cast<double>(left_freq) * static_cast<double>(right_freq));
}

std::vector<SplitCandidate> enumerate_candidates(std::string_view word, const corpus::Lexicon& lexicon,
                                                 const TransformTable& transforms, std::size_t min_part_len) {
  const auto w = lower32(word);
  std::vector<SplitCandidate> out;
  if (w.size() < 2 * min_part_len) return out;
  for (std::size_t i = min_part_len; i + min_part_len <= w.size(); ++i) {
    const auto right = utf8::encode(std::u32string_view(w).substr(i));
    const auto right_freq = lexicon.freq(right);
    if (right_freq == 0) continue;
    const auto left = std::u32string_view(w).substr(0, i);
    auto consider = [&](const std::u32string& lemma32, int transform) {
      if (lemma32.empty()) return;
      auto lemma = utf8::encode(lemma32);
      if (auto f = lexicon.freq(lemma); f > 0) {
        out.push_back(SplitCandidate{i, std::move(lemma), right, f, right_freq, transform});
      }
    };
    consider(std::u32string(left), -1);
    for (int k = 0; k < static_cast<int>(transforms.transforms.size()); ++k) {
      if (auto lemma = transforms.transforms[k].apply(left)) consider(*lemma, k);
    }
  }
  return out;
}

SplitResult frequency_split(std::string_view word, const corpus::Lexicon& lexicon,
                            const TransformTable& transforms, std::size_t min_part_len) {
  const auto whole = lexicon.freq(utf8::to_lower(word));
  const SplitCandidate* best = nullptr;
  u128 best_product = 0;
  auto candidates = enumerate_candidates(word, lexicon, transforms, min_part_len);
  // Candidates arrive leftmost boundary first, identity before table order,
  // so a strict comparison keeps the tie-breaking rule.
  for (const auto& c : candidates) {
    const u128 product = static_cast<u128>(c.left_freq) * c.right_freq;
    if (!best || product > best_product) {
      best = &c;
      best_product = product;
    }
  }
  // Compare sqrt(l * r) against the whole-word count exactly; ties keep the word whole.
  if (!best || best_product <= static_cast<u128>(whole) * whole) {
    return no_split(word, static_cast<double>(whole));
  }
  auto r = make_split(word, best->boundary, best->score(), Method::frequency);
  r.left_lemma = best->left_lemma;
  return r;
}

const PositionCounts* NgramStats::find(std::u32string_view gram) const {
  auto it = counts.find(std::u32string(gram));
  return it == counts.end() ? nullptr : &it->second;
}

PositionCounts NgramStats::at(std::string_view gram) const {
  const auto* c = find(utf8::decode(gram));
  return c ? *c : PositionCounts{};
}

void NgramStats::merge(const NgramStats& other) {
  for (const auto& [g, c] : other.counts) {
    auto& mine = counts[g];
    mine.begin += c.begin;
    mine.middle += c.middle;
    mine.end += c.end;
  }
}

NgramStats collect_ngram_stats(const corpus::Lexicon& lexicon) {
  NgramStats stats;
  for (const auto& [word, freq] : lexicon.counts) {
    const auto w = utf8::decode(word);
    for (int n : kNgramOrders) {
      const auto un = static_cast<std::size_t>(n);
      if (w.size() < un) continue;
      for (std::size_t j = 0; j + un <= w.size(); ++j) {
        auto& c = stats.counts[w.substr(j, un)];
        const bool first = j == 0;
        const bool last = j + un == w.size();
        if (first) c.begin += freq;
        if (last) c.end += freq;
        if (!first && !last) c.middle += freq;
      }
    }
  }
  return stats;
}

std::array<double, 3> ngram_score_components(std::string_view word, std::size_t boundary,
                                             const NgramStats& stats) {
  const auto w = lower32(word);
  if (boundary < 1 || boundary >= w.size()) {
    throw UsageError("boundary " + std::to_string(boundary) + " out of range for '" + std::string(word) + "'");
  }
  std::array<double, 3> out{};
  for (std::size_t k = 0; k < kNgramOrders.size(); ++k) {
    const auto n = static_cast<std::size_t>(kNgramOrders[k]);
    double endness = 0.0;
    double beginness = 0.0;
    if (boundary >= n) {
      if (const auto* c = stats.find(std::u32string_view(w).substr(boundary - n, n))) {
        endness = ratio(c->end, c->total());
      }
    }
    if (w.size() - boundary >= n) {
      if (const auto* c = stats.find(std::u32string_view(w).substr(boundary, n))) {
        beginness = ratio(c->begin, c->total());
      }
    }
    out[k] = 0.5 * (endness + beginness);
  }
  return out;
}

double ngram_position_score(std::string_view word, std::size_t boundary, const NgramStats& stats) {
  auto c = ngram_score_components(word, boundary, stats);
  return (c[0] + c[1] + c[2]) / 3.0;
}

SplitResult ngram_split(std::string_view word, const NgramStats& stats, std::size_t min_part_len) {
  const auto len = utf8::length(word);
  if (len < 2 * min_part_len || len < 2) return no_split(word);
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = min_part_len; i + min_part_len <= len; ++i) {
    const double s = ngram_position_score(word, i, stats);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return make_split(word, best, best_score, Method::ngram);
}

std::optional<std::size_t> argmax_split_token(std::span<const double> probs) {
  if (probs.size() < 2) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i + 1 < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

SplitResult neural_split(const neuro::LabelerParams& params, const neuro::LabelerConfig& config,
                         const tokenize::Tokenizer& tokenizer, std::string_view word) {
  if (word.empty()) return no_split(word);
  auto tokens = tokenizer.encode(word);
  auto probs = neuro::predict_split_probs(params, config, config.vocab.ids(tokens));
  auto token = argmax_split_token(probs);
  if (!token) return no_split(word);
  return make_split(word, tokens.spans[*token].end, probs[*token], Method::neural);
}

SplitResult neural_split(const neuro::LoadedLabeler& model, std::string_view word) {
  return neural_split(model.params, model.config, model.tokenizer, word);
}

}  // namespace dekompost::splitters
