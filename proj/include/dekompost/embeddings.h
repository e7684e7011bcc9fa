#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace dekompost::embeddings {

enum class OovPolicy { unk_token, zero, ngram_compose };

OovPolicy parse_oov_policy(std::string_view name);
std::string to_string(OovPolicy policy);

inline constexpr std::string_view kUnkWord = "[unk]";

// Word vectors stored contiguously as float32, in first-insertion order.
class VectorStore {
 public:
  explicit VectorStore(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  // Overwrites an existing entry; returns false in that case.
  bool set(const std::string& word, std::span<const float> values);
  const float* find(std::string_view word) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::size_t dim_;
  std::vector<std::string> words_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : vectors_(dim), ngrams_(dim) {}
  explicit EmbeddingTable(VectorStore vectors) : vectors_(std::move(vectors)), ngrams_(vectors_.dim()) {}

  std::size_t dim() const { return vectors_.dim(); }
  std::size_t size() const { return vectors_.size(); }
  OovPolicy policy() const { return policy_; }
  void set_policy(OovPolicy p) { policy_ = p; }

  VectorStore& vectors() { return vectors_; }
  const VectorStore& vectors() const { return vectors_; }
  VectorStore& ngram_vectors() { return ngrams_; }
  const VectorStore& ngram_vectors() const { return ngrams_; }

  const float* find_exact(std::string_view word) const { return vectors_.find(word); }
  // Exact form, then lowercased, then first letter capitalized.
  const float* find(std::string_view word) const;

 private:
  VectorStore vectors_;
  VectorStore ngrams_;
  OovPolicy policy_ = OovPolicy::zero;
};

// "count dim" header then "word v1 ... v_dim" lines. When `keep` is given,
// only those words are stored (the rest are still validated).
VectorStore parse_text_vectors(std::string_view text,
                               const std::unordered_set<std::string>* keep = nullptr);
EmbeddingTable load_text_vectors(const std::filesystem::path& path,
                                 const std::unordered_set<std::string>* keep = nullptr);
void load_ngram_vectors(EmbeddingTable& table, const std::filesystem::path& path);
std::string dump_text_vectors(const VectorStore& store);

// Character n-grams of "<word>" for n in [min_n, max_n], in position order.
std::vector<std::string> char_ngrams(std::string_view word, int min_n = 3, int max_n = 6);

std::vector<double> embed_word(const EmbeddingTable& table, std::string_view word);

}  // namespace dekompost::embeddings
