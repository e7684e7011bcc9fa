#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dekompost/corpus.h"
#include "dekompost/embeddings.h"
#include "dekompost/model_file.h"
#include "dekompost/splitters.h"

namespace dekompost::idiom {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr std::string_view kFeatureOrder = "compound|modifier|head";

enum class Provenance { gold, neural };

struct FeatureVector {
  std::vector<double> values;  // 3 * dim
  Provenance provenance = Provenance::gold;
};

// 0 stays 0 (compositional); 1, 2 and 3 become 1 (idiomatic).
int binarize_category(int category);

// [embed(surface) ; embed(modifier) ; embed(head)] from the gold lemmas.
FeatureVector build_features(const corpus::AnnotatedCompound& compound, const embeddings::EmbeddingTable& table);
// Same layout with the components taken from a predicted split.
FeatureVector build_features(const corpus::AnnotatedCompound& compound, const splitters::SplitResult& split,
                             const embeddings::EmbeddingTable& table);

Matrix to_matrix(const std::vector<FeatureVector>& features);

struct Prediction {
  int label = 0;
  double probability = 0.0;
};

struct LogRegModel {
  Vector weights;
  double bias = 0.0;
  double C = 1.0;
};

struct LogRegFit {
  LogRegModel model;
  std::vector<double> losses;  // objective after each accepted step, starting at init
  double grad_norm = 0.0;
  int iterations = 0;
};

// mean log-loss + ||w||^2 / (2 C N); the bias is not regularized.
double logreg_objective(const Vector& weights, double bias, const Matrix& X, const std::vector<int>& y, double C,
                        Vector* grad_w = nullptr, double* grad_b = nullptr);

// Full-batch gradient descent with backtracking, from zero, until the
// gradient norm drops below 1e-6 or 1000 iterations.
LogRegFit fit_logreg(const Matrix& X, const std::vector<int>& y, double C = 1.0);
LogRegModel train_logreg(const Matrix& X, const std::vector<int>& y, double C = 1.0);
Prediction predict_logreg(const LogRegModel& model, std::span<const double> x);

struct GbdtParams {
  int n_estimators = 200;
  double min_leaf = 25.0;  // weighted example count
  double shrinkage = 0.1;
  int max_depth = 3;
  double class_weight0 = 1.0;
  double class_weight1 = 10.0;
};

// Internal nodes send x[feature] <= threshold left. Leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  // Weighted training count per leaf, recorded at fit time.
  std::vector<double> leaf_weights;
};

struct GbdtModel {
  GbdtParams params;
  double init_score = 0.0;
  std::vector<Tree> trees;
  std::size_t n_features = 0;
};

struct GbdtFit {
  GbdtModel model;
  std::vector<double> losses;  // weighted mean log-loss, before round 1 and after each round
};

GbdtFit fit_gbdt(const Matrix& X, const std::vector<int>& y, const GbdtParams& params = {});
GbdtModel train_gbdt(const Matrix& X, const std::vector<int>& y, const GbdtParams& params = {});
double gbdt_raw_score(const GbdtModel& model, std::span<const double> x);
Prediction predict_gbdt(const GbdtModel& model, std::span<const double> x);
double weighted_log_loss(const GbdtModel& model, const Matrix& X, const std::vector<int>& y);

// Always predicts "idiomatic".
std::vector<int> dummy_predict(std::size_t n);

model_file::ModelFile to_model_file(const LogRegModel& model);
model_file::ModelFile to_model_file(const GbdtModel& model);
LogRegModel logreg_from_model_file(const model_file::ModelFile& file);
GbdtModel gbdt_from_model_file(const model_file::ModelFile& file);

}  // namespace dekompost::idiom
