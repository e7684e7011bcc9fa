#include "dekompost/idiom.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dekompost::idiom {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double to_float(double x) { return static_cast<double>(static_cast<float>(x)); }

void check_labels(const Matrix& X, const std::vector<int>& y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw UsageError("feature and label counts differ");
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw UsageError("labels must be 0 or 1");
    (v ? has1 : has0) = true;
  }
  if (!has0 || !has1) throw UsageError("training data must contain both classes");
}

FeatureVector concat(const embeddings::EmbeddingTable& table, std::string_view whole, std::string_view left,
                     std::string_view right, Provenance provenance) {
  FeatureVector fv;
  fv.provenance = provenance;
  fv.values.reserve(3 * table.dim());
  for (auto w : {whole, left, right}) {
    auto v = embeddings::embed_word(table, w);
    fv.values.insert(fv.values.end(), v.begin(), v.end());
  }
  return fv;
}

double leaf_of(const Tree& tree, std::span<const double> x, int* leaf_index = nullptr) {
  int node = 0;
  while (tree.nodes[node].feature >= 0) {
    const auto& n = tree.nodes[node];
    node = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  if (leaf_index) *leaf_index = node;
  return tree.nodes[node].value;
}

std::span<const double> row_span(const Matrix& X, Eigen::Index i, std::vector<double>& buf) {
  buf.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) buf[j] = X(i, j);
  return buf;
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// One regression tree on weighted residuals, grown level by level. Each
// level makes one pass over the presorted order of every feature.
Tree grow_tree(const Matrix& X, const std::vector<std::vector<int>>& sorted, const Vector& residual,
               const Vector& weight, const Vector& hessian, const GbdtParams& params) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  Tree tree;
  tree.nodes.push_back(TreeNode{});
  std::vector<int> node_of(n, 0);
  std::vector<int> frontier{0};

  for (int depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
    const int m = static_cast<int>(tree.nodes.size());
    std::vector<double> sum_g(m, 0.0), sum_w(m, 0.0);
    for (int i = 0; i < n; ++i) {
      sum_g[node_of[i]] += weight[i] * residual[i];
      sum_w[node_of[i]] += weight[i];
    }
    std::vector<char> active(m, 0);
    for (int node : frontier) {
      if (sum_w[node] >= 2 * params.min_leaf) active[node] = 1;
    }
    std::vector<Split> best(m);
    std::vector<double> left_g(m), left_w(m), prev_value(m);
    std::vector<char> started(m);
    for (int f = 0; f < d; ++f) {
      std::fill(left_g.begin(), left_g.end(), 0.0);
      std::fill(left_w.begin(), left_w.end(), 0.0);
      std::fill(started.begin(), started.end(), 0);
      for (int i : sorted[f]) {
        const int node = node_of[i];
        if (!active[node]) continue;
        const double v = X(i, f);
        if (started[node] && v > prev_value[node]) {
          const double wl = left_w[node];
          const double wr = sum_w[node] - wl;
          if (wl >= params.min_leaf && wr >= params.min_leaf) {
            const double gl = left_g[node];
            const double gr = sum_g[node] - gl;
            const double gain = gl * gl / wl + gr * gr / wr - sum_g[node] * sum_g[node] / sum_w[node];
            // Thresholds live at float precision so stored models route identically.
            double t = to_float(0.5 * (prev_value[node] + v));
            if (!(prev_value[node] <= t && t < v)) t = to_float(prev_value[node]);
            if (prev_value[node] <= t && t < v && gain > best[node].gain + 1e-12) {
              best[node] = Split{f, t, gain};
            }
          }
        }
        started[node] = 1;
        prev_value[node] = v;
        left_g[node] += weight[i] * residual[i];
        left_w[node] += weight[i];
      }
    }
    std::vector<int> next;
    for (int node : frontier) {
      if (!active[node] || best[node].feature < 0) continue;
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(TreeNode{});
      tree.nodes.push_back(TreeNode{});
      tree.nodes[node].feature = best[node].feature;
      tree.nodes[node].threshold = best[node].threshold;
      tree.nodes[node].left = l;
      tree.nodes[node].right = l + 1;
      next.push_back(l);
      next.push_back(l + 1);
    }
    for (int i = 0; i < n; ++i) {
      const auto& nd = tree.nodes[node_of[i]];
      if (nd.feature >= 0 && nd.left >= m) node_of[i] = X(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    frontier = std::move(next);
  }

  // Newton leaf values: sum(w r) / sum(w p (1 - p)).
  const int m = static_cast<int>(tree.nodes.size());
  std::vector<double> num(m, 0.0), den(m, 0.0), cnt(m, 0.0);
  for (int i = 0; i < n; ++i) {
    num[node_of[i]] += weight[i] * residual[i];
    den[node_of[i]] += weight[i] * hessian[i];
    cnt[node_of[i]] += weight[i];
  }
  tree.leaf_weights.assign(m, 0.0);
  for (int k = 0; k < m; ++k) {
    if (tree.nodes[k].feature >= 0) continue;
    tree.nodes[k].value = den[k] > 1e-12 ? params.shrinkage * num[k] / den[k] : 0.0;
    tree.leaf_weights[k] = cnt[k];
  }
  return tree;
}

double weighted_loss(const Vector& scores, const std::vector<int>& y, const Vector& weight) {
  double total = 0.0, wsum = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    total += weight[i] * (softplus(scores[i]) - y[i] * scores[i]);
    wsum += weight[i];
  }
  return total / wsum;
}

}  // namespace

int binarize_category(int category) {
  if (category < 0 || category > 3) throw UsageError("category " + std::to_string(category) + " out of range");
  return category == 0 ? 0 : 1;
}

FeatureVector build_features(const corpus::AnnotatedCompound& c, const embeddings::EmbeddingTable& table) {
  return concat(table, c.entry.surface, c.entry.modifier, c.entry.head, Provenance::gold);
}

FeatureVector build_features(const corpus::AnnotatedCompound& c, const splitters::SplitResult& split,
                             const embeddings::EmbeddingTable& table) {
  return concat(table, c.entry.surface, split.left, split.right, Provenance::neural);
}

Matrix to_matrix(const std::vector<FeatureVector>& features) {
  if (features.empty()) return Matrix(0, 0);
  Matrix X(features.size(), features.front().values.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].values.size() != static_cast<std::size_t>(X.cols())) {
      throw UsageError("feature vectors differ in length");
    }
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = features[i].values[j];
  }
  return X;
}

double logreg_objective(const Vector& w, double b, const Matrix& X, const std::vector<int>& y, double C,
                        Vector* grad_w, double* grad_b) {
  const double n = static_cast<double>(X.rows());
  const Vector z = (X * w).array() + b;
  double loss = 0.0;
  Vector residual(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    loss += softplus(z[i]) - y[i] * z[i];
    residual[i] = sigmoid(z[i]) - y[i];
  }
  loss = loss / n + w.squaredNorm() / (2.0 * C * n);
  if (grad_w) *grad_w = X.transpose() * residual / n + w / (C * n);
  if (grad_b) *grad_b = residual.sum() / n;
  return loss;
}

LogRegFit fit_logreg(const Matrix& X, const std::vector<int>& y, double C) {
  check_labels(X, y);
  if (!(C > 0)) throw UsageError("C must be positive");
  LogRegFit fit;
  Vector w = Vector::Zero(X.cols());
  double b = 0.0;
  Vector gw;
  double gb = 0.0;
  double loss = logreg_objective(w, b, X, y, C, &gw, &gb);
  fit.losses.push_back(loss);
  double step = 1.0;
  constexpr double kArmijo = 0.5;
  constexpr int kMaxIterations = 1000;
  for (int it = 0; it < kMaxIterations; ++it) {
    const double g2 = gw.squaredNorm() + gb * gb;
    fit.grad_norm = std::sqrt(g2);
    if (fit.grad_norm < 1e-6) break;
    step = std::min(1e6, step * 2.0);
    while (true) {
      Vector w_new = w - step * gw;
      const double b_new = b - step * gb;
      const double trial = logreg_objective(w_new, b_new, X, y, C);
      if (trial <= loss - kArmijo * step * g2) {
        w = std::move(w_new);
        b = b_new;
        break;
      }
      step *= 0.5;
      if (step < 1e-20) break;
    }
    if (step < 1e-20) break;
    loss = logreg_objective(w, b, X, y, C, &gw, &gb);
    fit.losses.push_back(loss);
    fit.iterations = it + 1;
  }
  fit.grad_norm = std::sqrt(gw.squaredNorm() + gb * gb);
  fit.model.weights = w.unaryExpr([](double x) { return to_float(x); });
  fit.model.bias = to_float(b);
  fit.model.C = C;
  return fit;
}

LogRegModel train_logreg(const Matrix& X, const std::vector<int>& y, double C) { return fit_logreg(X, y, C).model; }

Prediction predict_logreg(const LogRegModel& model, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(model.weights.size())) {
    throw UsageError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                     std::to_string(model.weights.size()));
  }
  double z = model.bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += model.weights[j] * x[j];
  const double p = sigmoid(z);
  return {p >= 0.5 ? 1 : 0, p};
}

double Tree::predict(std::span<const double> x) const { return leaf_of(*this, x); }

GbdtFit fit_gbdt(const Matrix& X, const std::vector<int>& y, const GbdtParams& params) {
  check_labels(X, y);
  if (params.n_estimators < 0 || params.max_depth < 0 || !(params.shrinkage > 0) || params.min_leaf < 0 ||
      !(params.class_weight0 > 0) || !(params.class_weight1 > 0)) {
    throw UsageError("invalid gradient boosting hyperparameters");
  }
  const int n = static_cast<int>(X.rows());
  Vector weight(n);
  double pos = 0.0, neg = 0.0;
  for (int i = 0; i < n; ++i) {
    weight[i] = y[i] ? params.class_weight1 : params.class_weight0;
    (y[i] ? pos : neg) += weight[i];
  }
  GbdtFit fit;
  auto& model = fit.model;
  model.params = params;
  model.n_features = static_cast<std::size_t>(X.cols());
  model.init_score = to_float(std::log(pos / neg));

  std::vector<std::vector<int>> sorted(X.cols());
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    sorted[f].resize(n);
    std::iota(sorted[f].begin(), sorted[f].end(), 0);
    std::stable_sort(sorted[f].begin(), sorted[f].end(), [&](int a, int b) { return X(a, f) < X(b, f); });
  }

  Vector scores = Vector::Constant(n, model.init_score);
  double loss = weighted_loss(scores, y, weight);
  fit.losses.push_back(loss);
  Vector residual(n), hessian(n);
  std::vector<double> row;
  for (int round = 0; round < params.n_estimators; ++round) {
    for (int i = 0; i < n; ++i) {
      const double p = sigmoid(scores[i]);
      residual[i] = y[i] - p;
      hessian[i] = p * (1.0 - p);
    }
    Tree tree = grow_tree(X, sorted, residual, weight, hessian, params);
    for (auto& node : tree.nodes) node.value = to_float(node.value);

    std::vector<int> leaf(n);
    for (int i = 0; i < n; ++i) leaf_of(tree, row_span(X, i, row), &leaf[i]);
    // Backtrack the leaf values if a round would raise the training loss.
    Vector trial(n);
    for (int attempt = 0;; ++attempt) {
      for (int i = 0; i < n; ++i) trial[i] = scores[i] + tree.nodes[leaf[i]].value;
      const double trial_loss = weighted_loss(trial, y, weight);
      if (trial_loss <= loss) {
        loss = trial_loss;
        break;
      }
      if (attempt == 40) {
        for (auto& node : tree.nodes) node.value = 0.0;
        trial = scores;
        break;
      }
      for (auto& node : tree.nodes) node.value = to_float(node.value * 0.5);
    }
    scores = trial;
    fit.losses.push_back(loss);
    model.trees.push_back(std::move(tree));
  }
  return fit;
}

GbdtModel train_gbdt(const Matrix& X, const std::vector<int>& y, const GbdtParams& params) {
  return fit_gbdt(X, y, params).model;
}

double gbdt_raw_score(const GbdtModel& model, std::span<const double> x) {
  if (x.size() != model.n_features) {
    throw UsageError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                     std::to_string(model.n_features));
  }
  double s = model.init_score;
  for (const auto& t : model.trees) s += t.predict(x);
  return s;
}

Prediction predict_gbdt(const GbdtModel& model, std::span<const double> x) {
  const double p = sigmoid(gbdt_raw_score(model, x));
  return {p >= 0.5 ? 1 : 0, p};
}

double weighted_log_loss(const GbdtModel& model, const Matrix& X, const std::vector<int>& y) {
  Vector scores(X.rows()), weight(X.rows());
  std::vector<double> row;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    scores[i] = gbdt_raw_score(model, row_span(X, i, row));
    weight[i] = y[i] ? model.params.class_weight1 : model.params.class_weight0;
  }
  return weighted_loss(scores, y, weight);
}

std::vector<int> dummy_predict(std::size_t n) { return std::vector<int>(n, 1); }

model_file::ModelFile to_model_file(const LogRegModel& model) {
  model_file::ModelFile f;
  f.set("kind", "logreg");
  f.set("feature_order", std::string(kFeatureOrder));
  f.set("dim", std::to_string(model.weights.size()));
  f.set("C", format_double(model.C));
  model_file::NamedArray w{"logreg.w", 1, static_cast<std::size_t>(model.weights.size()), {}};
  for (Eigen::Index j = 0; j < model.weights.size(); ++j) w.data.push_back(static_cast<float>(model.weights[j]));
  f.arrays.push_back(std::move(w));
  f.arrays.push_back({"logreg.b", 1, 1, {static_cast<float>(model.bias)}});
  return f;
}

model_file::ModelFile to_model_file(const GbdtModel& model) {
  model_file::ModelFile f;
  const auto& p = model.params;
  f.set("kind", "gbdt");
  f.set("feature_order", std::string(kFeatureOrder));
  f.set("dim", std::to_string(model.n_features));
  f.set("n_estimators", std::to_string(p.n_estimators));
  f.set("min_leaf", format_double(p.min_leaf));
  f.set("shrinkage", format_double(p.shrinkage));
  f.set("max_depth", std::to_string(p.max_depth));
  f.set("class_weight0", format_double(p.class_weight0));
  f.set("class_weight1", format_double(p.class_weight1));
  f.set("trees", std::to_string(model.trees.size()));
  f.arrays.push_back({"gbdt.init", 1, 1, {static_cast<float>(model.init_score)}});
  for (std::size_t k = 0; k < model.trees.size(); ++k) {
    const auto& nodes = model.trees[k].nodes;
    model_file::NamedArray a{"gbdt.tree." + std::to_string(k), nodes.size(), 5, {}};
    for (const auto& nd : nodes) {
      a.data.insert(a.data.end(), {static_cast<float>(nd.feature), static_cast<float>(nd.threshold),
                                   static_cast<float>(nd.left), static_cast<float>(nd.right),
                                   static_cast<float>(nd.value)});
    }
    f.arrays.push_back(std::move(a));
  }
  return f;
}

LogRegModel logreg_from_model_file(const model_file::ModelFile& f) {
  if (f.get("kind") != "logreg") throw DataError("not a logistic regression model");
  if (f.get("feature_order") != kFeatureOrder) throw DataError("unsupported feature order " + f.get("feature_order"));
  LogRegModel m;
  m.C = std::stod(f.get("C"));
  const auto& w = f.array("logreg.w");
  m.weights.resize(static_cast<Eigen::Index>(w.data.size()));
  for (std::size_t j = 0; j < w.data.size(); ++j) m.weights[j] = w.data[j];
  m.bias = f.array("logreg.b").data.at(0);
  return m;
}

GbdtModel gbdt_from_model_file(const model_file::ModelFile& f) {
  if (f.get("kind") != "gbdt") throw DataError("not a gradient boosting model");
  if (f.get("feature_order") != kFeatureOrder) throw DataError("unsupported feature order " + f.get("feature_order"));
  GbdtModel m;
  auto& p = m.params;
  p.n_estimators = std::stoi(f.get("n_estimators"));
  p.min_leaf = std::stod(f.get("min_leaf"));
  p.shrinkage = std::stod(f.get("shrinkage"));
  p.max_depth = std::stoi(f.get("max_depth"));
  p.class_weight0 = std::stod(f.get("class_weight0"));
  p.class_weight1 = std::stod(f.get("class_weight1"));
  m.n_features = std::stoul(f.get("dim"));
  m.init_score = f.array("gbdt.init").data.at(0);
  const auto count = std::stoul(f.get("trees"));
  for (std::size_t k = 0; k < count; ++k) {
    const auto& a = f.array("gbdt.tree." + std::to_string(k));
    if (a.cols != 5 || a.rows == 0) throw DataError("malformed tree block " + a.name);
    Tree t;
    for (std::size_t r = 0; r < a.rows; ++r) {
      const float* v = a.data.data() + r * 5;
      TreeNode nd{static_cast<int>(v[0]), v[1], static_cast<int>(v[2]), static_cast<int>(v[3]), v[4]};
      const int rows = static_cast<int>(a.rows);
      const int self = static_cast<int>(r);
      if (nd.feature >= 0 && (nd.left <= self || nd.left >= rows || nd.right <= self || nd.right >= rows ||
                              nd.feature >= static_cast<int>(m.n_features))) {
        throw DataError("malformed node in " + a.name);
      }
      t.nodes.push_back(nd);
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace dekompost::idiom
