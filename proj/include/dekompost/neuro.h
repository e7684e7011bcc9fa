#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dekompost/model_file.h"
#include "dekompost/tokenize.h"

// Bidirectional recurrent split labeler: embedding lookup, one forward and one
// backward cell (vanilla RNN, GRU or LSTM), and a per-position 2-way softmax
// over the concatenated hidden states.
namespace dekompost::neuro {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class CellKind { vanilla, gru, lstm };

std::string to_string(CellKind kind);
CellKind parse_cell_kind(std::string_view name);
int gate_count(CellKind kind);

inline constexpr std::string_view kUnkToken = "<unk>";

// Index 0 is always the unknown token.
class Vocab {
 public:
  Vocab();
  explicit Vocab(std::vector<std::string> tokens);  // tokens[0] must be kUnkToken

  // Sorted distinct tokens of the given sequences, after "<unk>".
  static Vocab build(const std::vector<tokenize::TokenSequence>& sequences);

  int id(const std::string& token) const;
  std::vector<int> ids(const tokenize::TokenSequence& seq) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct LabelerConfig {
  CellKind cell = CellKind::gru;
  int hidden_dim = 256;
  int embed_dim = 64;
  Vocab vocab;
  bool embeddings_trainable = true;
  int epochs = 30;
  double learning_rate = 1e-3;
  int batch_size = 64;
  std::uint64_t seed = 13;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
  // Stop as soon as dev accuracy reaches this value.
  std::optional<double> target_accuracy;
};

void validate(const LabelerConfig& config);

struct CellWeights {
  Matrix wx;  // (gates*H) x E
  Matrix wh;  // (gates*H) x H
  Matrix b;   // (gates*H) x 1
};

struct LabelerParams {
  Matrix embedding;  // |V| x E
  CellWeights fwd;
  CellWeights bwd;
  Matrix out_w;  // 2 x 2H
  Matrix out_b;  // 2 x 1

  static LabelerParams zeros(const LabelerConfig& config);
  // uniform(-0.1, 0.1) embeddings, uniform(-k, k) with k = 1/sqrt(fan_in) elsewhere.
  static LabelerParams random(const LabelerConfig& config, std::uint64_t seed);

  template <typename Fn>
  void for_each_block(Fn&& fn) {
    fn("embedding", embedding);
    fn("fwd.wx", fwd.wx);
    fn("fwd.wh", fwd.wh);
    fn("fwd.b", fwd.b);
    fn("bwd.wx", bwd.wx);
    fn("bwd.wh", bwd.wh);
    fn("bwd.b", bwd.b);
    fn("out.w", out_w);
    fn("out.b", out_b);
  }
  template <typename Fn>
  void for_each_block(Fn&& fn) const {
    const_cast<LabelerParams*>(this)->for_each_block(
        [&](const char* name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
  }

  // Name of the first block holding NaN/Inf, if any.
  std::optional<std::string> non_finite_block() const;
  // Rounds every entry to float precision (the on-disk precision).
  void round_to_float();
  double squared_norm() const;
};

struct AdamState {
  LabelerParams m;
  LabelerParams v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(const LabelerParams& like);
};

struct Sequence {
  std::vector<int> token_ids;
  std::vector<int> labels;
};

// Row i holds sequence i left-aligned; mask(i, j) == 1 iff j < lengths[i].
struct Batch {
  Eigen::MatrixXi tokens;
  Eigen::MatrixXi labels;
  Eigen::MatrixXi mask;
  std::vector<int> lengths;

  static Batch pack(const std::vector<const Sequence*>& sequences, int pad_to = 0);
};

// Rows are [h_fwd(t) ; h_bwd(t)], shape T x 2H.
Matrix encode_sequence(const LabelerParams& params, const LabelerConfig& config,
                       const std::vector<int>& token_ids);

// T x 2 softmax probabilities (columns: no split, split).
Matrix predict_class_probs(const LabelerParams& params, const LabelerConfig& config,
                           const std::vector<int>& token_ids);
std::vector<double> predict_split_probs(const LabelerParams& params, const LabelerConfig& config,
                                        const std::vector<int>& token_ids);

struct LossAndGradients {
  double loss = 0.0;  // mean NLL over unmasked positions
  LabelerParams grads;
  std::size_t positions = 0;
};

LossAndGradients loss_and_gradients(const LabelerParams& params, const LabelerConfig& config,
                                     const Batch& batch);

void adam_step(LabelerParams& params, const LabelerParams& grads, AdamState& state, double lr);

struct TrainExample {
  Sequence sequence;
  std::vector<std::size_t> token_ends;  // character offset where each token ends
  std::size_t gold_split = 0;           // character boundary
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
};

struct TrainResult {
  LabelerParams params;       // final epoch
  LabelerParams best_params;  // best dev accuracy (earliest on ties)
  int best_epoch = 0;
  std::vector<EpochLog> log;
};

// Builds a training example; returns nullopt for single-token words, which
// cannot carry a split label. `lossy` reports inexact boundary projection.
std::optional<TrainExample> make_example(const Vocab& vocab, const tokenize::TokenSequence& tokens,
                                         corpus::BoundaryLabel boundary, bool* lossy = nullptr);

// Fraction of examples whose argmax-decoded boundary equals the gold boundary.
double split_accuracy(const LabelerParams& params, const LabelerConfig& config,
                      const std::vector<TrainExample>& examples);

// When `dev` is empty the training set doubles as the selection set.
TrainResult train(const LabelerConfig& config, const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& dev_set,
                  const std::optional<Matrix>& initial_embedding = std::nullopt);

struct LoadedLabeler {
  LabelerParams params;
  LabelerConfig config;
  tokenize::Tokenizer tokenizer;
};

model_file::ModelFile to_model_file(const LabelerParams& params, const LabelerConfig& config,
                                    const tokenize::Tokenizer& tokenizer);
LoadedLabeler from_model_file(const model_file::ModelFile& file);

void save_params(const LabelerParams& params, const LabelerConfig& config,
                 const tokenize::Tokenizer& tokenizer, const std::filesystem::path& path);
LoadedLabeler load_params(const std::filesystem::path& path);

struct SubwordEmbeddings {
  Matrix matrix;
  std::size_t missing = 0;
};

// Rows for vocabulary tokens found in the vector file; others seeded uniform(-0.1, 0.1).
SubwordEmbeddings load_subword_embeddings(const std::filesystem::path& path, const Vocab& vocab,
                                          int embed_dim, std::uint64_t seed);

}  // namespace dekompost::neuro
