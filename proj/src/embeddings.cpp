#include "dekompost/embeddings.h"

#include <charconv>
#include <cmath>
#include <iostream>

#include "dekompost/common.h"
#include "dekompost/corpus.h"

namespace dekompost::embeddings {

namespace {

std::vector<std::string_view> fields_of(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    if (i >= line.size()) break;
    auto j = line.find(' ', i);
    if (j == std::string_view::npos) j = line.size();
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::size_t parse_size(std::string_view s, std::size_t line_no) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("line " + std::to_string(line_no) + ": bad header field '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

OovPolicy parse_oov_policy(std::string_view name) {
  if (name == "unk" || name == "unk_token") return OovPolicy::unk_token;
  if (name == "zero") return OovPolicy::zero;
  if (name == "ngram" || name == "ngram_compose") return OovPolicy::ngram_compose;
  throw UsageError("unknown OOV policy '" + std::string(name) + "'");
}

std::string to_string(OovPolicy policy) {
  switch (policy) {
    case OovPolicy::unk_token: return "unk";
    case OovPolicy::zero: return "zero";
    case OovPolicy::ngram_compose: return "ngram";
  }
  return "?";
}

bool VectorStore::set(const std::string& word, std::span<const float> values) {
  if (values.size() != dim_) throw DataError("vector for '" + word + "' has the wrong dimension");
  for (float v : values) {
    if (!std::isfinite(v)) throw DataError("vector for '" + word + "' has non-finite components");
  }
  auto [it, inserted] = index_.emplace(word, words_.size());
  if (inserted) {
    words_.push_back(word);
    data_.insert(data_.end(), values.begin(), values.end());
  } else {
    std::copy(values.begin(), values.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
  }
  return inserted;
}

const float* VectorStore::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? nullptr : data_.data() + it->second * dim_;
}

const float* EmbeddingTable::find(std::string_view word) const {
  if (const auto* v = vectors_.find(word)) return v;
  if (!utf8::valid(word)) return nullptr;
  auto lower = utf8::to_lower(word);
  if (const auto* v = vectors_.find(lower)) return v;
  return vectors_.find(utf8::capitalize(lower));
}

VectorStore parse_text_vectors(std::string_view text, const std::unordered_set<std::string>* keep) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  std::size_t declared = 0;
  std::size_t dim = 0;
  bool have_header = false;
  VectorStore store;
  std::size_t seen = 0;
  std::vector<float> values;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto fields = fields_of(line);
    if (fields.empty()) continue;
    if (!have_header) {
      if (fields.size() != 2) throw DataError("line 1: expected header 'count dim'");
      declared = parse_size(fields[0], line_no);
      dim = parse_size(fields[1], line_no);
      if (dim == 0) throw DataError("line 1: dimension must be positive");
      store = VectorStore(dim);
      have_header = true;
      continue;
    }
    if (fields.size() != dim + 1) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(dim) + " values");
    }
    ++seen;
    std::string word(fields[0]);
    if (keep && !keep->count(word)) continue;
    values.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      auto f = fields[k + 1];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), values[k]);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw DataError("line " + std::to_string(line_no) + ": bad value '" + std::string(f) + "'");
      }
    }
    if (!store.set(word, values)) {
      std::cerr << "warning: line " << line_no << ": duplicate word '" << word << "', last wins\n";
    }
  }
  if (!have_header) throw DataError("vector file is empty");
  if (seen != declared) {
    std::cerr << "warning: header declares " << declared << " vectors, file has " << seen << "\n";
  }
  return store;
}

EmbeddingTable load_text_vectors(const std::filesystem::path& path, const std::unordered_set<std::string>* keep) {
  return EmbeddingTable(parse_text_vectors(corpus::read_file(path), keep));
}

void load_ngram_vectors(EmbeddingTable& table, const std::filesystem::path& path) {
  auto store = parse_text_vectors(corpus::read_file(path));
  if (store.dim() != table.dim()) {
    throw DataError("n-gram vectors have dimension " + std::to_string(store.dim()) + ", word vectors " +
                    std::to_string(table.dim()));
  }
  table.ngram_vectors() = std::move(store);
}

std::string dump_text_vectors(const VectorStore& store) {
  std::string out = std::to_string(store.size()) + ' ' + std::to_string(store.dim()) + '\n';
  char buf[64];
  for (const auto& w : store.words()) {
    out += w;
    const float* v = store.find(w);
    for (std::size_t k = 0; k < store.dim(); ++k) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v[k]);
      out += ' ';
      out.append(buf, ptr);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::string> char_ngrams(std::string_view word, int min_n, int max_n) {
  std::u32string wrapped = U"<" + utf8::decode(word) + U">";
  std::vector<std::string> out;
  const int len = static_cast<int>(wrapped.size());
  for (int i = 0; i < len; ++i) {
    for (int n = min_n; n <= max_n && i + n <= len; ++n) {
      out.push_back(utf8::encode(std::u32string_view(wrapped).substr(i, n)));
    }
  }
  return out;
}

std::vector<double> embed_word(const EmbeddingTable& table, std::string_view word) {
  const std::size_t dim = table.dim();
  std::vector<double> out(dim, 0.0);
  if (const float* v = table.find(word)) {
    std::copy(v, v + dim, out.begin());
    return out;
  }
  switch (table.policy()) {
    case OovPolicy::zero:
      break;
    case OovPolicy::unk_token: {
      const float* unk = table.find_exact(kUnkWord);
      if (!unk) throw DataError("OOV word '" + std::string(word) + "' and the table has no [unk] vector");
      std::copy(unk, unk + dim, out.begin());
      break;
    }
    case OovPolicy::ngram_compose: {
      std::size_t matched = 0;
      for (const auto& g : char_ngrams(word)) {
        if (const float* v = table.ngram_vectors().find(g)) {
          for (std::size_t k = 0; k < dim; ++k) out[k] += v[k];
          ++matched;
        }
      }
      if (matched > 0) {
        for (auto& x : out) x /= static_cast<double>(matched);
      }
      break;
    }
  }
  return out;
}

}  // namespace dekompost::embeddings
