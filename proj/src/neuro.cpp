#include "dekompost/neuro.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "dekompost/embeddings.h"
#include "dekompost/splitters.h"

namespace dekompost::neuro {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& a) { return a.unaryExpr([](double x) { return sigmoid(x); }); }
Vector tanh_v(const Vector& a) { return a.array().tanh().matrix(); }

// Activations of one direction over one sequence, columns in processing order.
struct DirectionTrace {
  Matrix inputs;  // E x T
  Matrix h_prev;  // H x T
  Matrix c_prev;  // H x T (lstm)
  Matrix gates;   // gH x T, activated
  Matrix h;       // H x T
  Matrix c;       // H x T (lstm)
  Matrix aux;     // gru: r*h_prev, lstm: tanh(c)
};

DirectionTrace run_direction(const CellWeights& w, CellKind kind, int hidden, Matrix inputs) {
  const int steps = static_cast<int>(inputs.cols());
  const int H = hidden;
  DirectionTrace tr;
  tr.inputs = std::move(inputs);
  const Matrix pre = (w.wx * tr.inputs).colwise() + w.b.col(0);
  tr.h_prev.resize(H, steps);
  tr.h.resize(H, steps);
  tr.gates.resize(w.wx.rows(), steps);
  if (kind != CellKind::vanilla) tr.aux.resize(H, steps);
  if (kind == CellKind::lstm) {
    tr.c_prev.resize(H, steps);
    tr.c.resize(H, steps);
  }
  Vector h = Vector::Zero(H);
  Vector c = Vector::Zero(H);
  for (int t = 0; t < steps; ++t) {
    tr.h_prev.col(t) = h;
    switch (kind) {
      case CellKind::vanilla: {
        h = tanh_v(pre.col(t) + w.wh * h);
        tr.gates.col(t) = h;
        break;
      }
      case CellKind::gru: {
        Vector zr = sigmoid(Vector(pre.col(t).head(2 * H) + w.wh.topRows(2 * H) * h));
        Vector rh = zr.tail(H).cwiseProduct(h);
        Vector n = tanh_v(pre.col(t).tail(H) + w.wh.bottomRows(H) * rh);
        const auto z = zr.head(H).array();
        h = (z * h.array() + (1.0 - z) * n.array()).matrix();
        tr.gates.col(t).head(2 * H) = zr;
        tr.gates.col(t).tail(H) = n;
        tr.aux.col(t) = rh;
        break;
      }
      case CellKind::lstm: {
        Vector a = pre.col(t) + w.wh * h;
        Vector i = sigmoid(Vector(a.segment(0, H)));
        Vector f = sigmoid(Vector(a.segment(H, H)));
        Vector g = tanh_v(a.segment(2 * H, H));
        Vector o = sigmoid(Vector(a.segment(3 * H, H)));
        tr.c_prev.col(t) = c;
        c = f.cwiseProduct(c) + i.cwiseProduct(g);
        Vector tc = tanh_v(c);
        h = o.cwiseProduct(tc);
        tr.gates.col(t) << i, f, g, o;
        tr.c.col(t) = c;
        tr.aux.col(t) = tc;
        break;
      }
    }
    tr.h.col(t) = h;
  }
  return tr;
}

// Backpropagation through time. `dh_out` holds dLoss/dh per step (H x T);
// accumulates into `grad` and returns dLoss/dinput (E x T).
Matrix backward_direction(const CellWeights& w, CellKind kind, int hidden, const DirectionTrace& tr,
                          const Matrix& dh_out, CellWeights& grad) {
  const int H = hidden;
  const int steps = static_cast<int>(tr.h.cols());
  Matrix dpre(w.wx.rows(), steps);
  Vector dh_next = Vector::Zero(H);
  Vector dc_next = Vector::Zero(H);
  for (int t = steps - 1; t >= 0; --t) {
    Vector dh = dh_out.col(t) + dh_next;
    switch (kind) {
      case CellKind::vanilla: {
        Vector da = dh.array() * (1.0 - tr.h.col(t).array().square());
        dpre.col(t) = da;
        dh_next = w.wh.transpose() * da;
        break;
      }
      case CellKind::gru: {
        const auto z = tr.gates.col(t).head(H).array();
        const auto r = tr.gates.col(t).segment(H, H).array();
        const auto n = tr.gates.col(t).tail(H).array();
        const auto hp = tr.h_prev.col(t).array();
        Vector dz = dh.array() * (hp - n);
        Vector dan = dh.array() * (1.0 - z) * (1.0 - n.square());
        Vector drh = w.wh.bottomRows(H).transpose() * dan;
        Vector dr = drh.array() * hp;
        Vector dhp = dh.array() * z + drh.array() * r;
        dpre.col(t).head(H) = dz.array() * z * (1.0 - z);
        dpre.col(t).segment(H, H) = dr.array() * r * (1.0 - r);
        dpre.col(t).tail(H) = dan;
        dhp.noalias() += w.wh.topRows(2 * H).transpose() * dpre.col(t).head(2 * H);
        dh_next = dhp;
        break;
      }
      case CellKind::lstm: {
        const auto i = tr.gates.col(t).segment(0, H).array();
        const auto f = tr.gates.col(t).segment(H, H).array();
        const auto g = tr.gates.col(t).segment(2 * H, H).array();
        const auto o = tr.gates.col(t).segment(3 * H, H).array();
        const auto tc = tr.aux.col(t).array();
        Vector dc = dc_next.array() + dh.array() * o * (1.0 - tc.square());
        dpre.col(t).segment(0, H) = dc.array() * g * i * (1.0 - i);
        dpre.col(t).segment(H, H) = dc.array() * tr.c_prev.col(t).array() * f * (1.0 - f);
        dpre.col(t).segment(2 * H, H) = dc.array() * i * (1.0 - g.square());
        dpre.col(t).segment(3 * H, H) = dh.array() * tc * o * (1.0 - o);
        dh_next = w.wh.transpose() * dpre.col(t);
        dc_next = dc.array() * f;
        break;
      }
    }
  }
  grad.wx.noalias() += dpre * tr.inputs.transpose();
  grad.b.col(0) += dpre.rowwise().sum();
  if (kind == CellKind::gru) {
    grad.wh.topRows(2 * H).noalias() += dpre.topRows(2 * H) * tr.h_prev.transpose();
    grad.wh.bottomRows(H).noalias() += dpre.bottomRows(H) * tr.aux.transpose();
  } else {
    grad.wh.noalias() += dpre * tr.h_prev.transpose();
  }
  return w.wx.transpose() * dpre;
}

struct SequenceForward {
  DirectionTrace fwd;
  DirectionTrace bwd;
  Matrix features;  // T x 2H
};

SequenceForward forward(const LabelerParams& p, const LabelerConfig& config, const int* ids, int length) {
  const int E = config.embed_dim;
  const int V = static_cast<int>(p.embedding.rows());
  Matrix x(E, length), x_rev(E, length);
  for (int t = 0; t < length; ++t) {
    if (ids[t] < 0 || ids[t] >= V) {
      throw UsageError("token id " + std::to_string(ids[t]) + " out of vocabulary range");
    }
    x.col(t) = p.embedding.row(ids[t]).transpose();
    x_rev.col(length - 1 - t) = x.col(t);
  }
  SequenceForward out;
  out.fwd = run_direction(p.fwd, config.cell, config.hidden_dim, std::move(x));
  out.bwd = run_direction(p.bwd, config.cell, config.hidden_dim, std::move(x_rev));
  const int H = config.hidden_dim;
  out.features.resize(length, 2 * H);
  out.features.leftCols(H) = out.fwd.h.transpose();
  out.features.rightCols(H) = out.bwd.h.rowwise().reverse().transpose();
  return out;
}

Matrix logits_of(const LabelerParams& p, const Matrix& features) {
  return (features * p.out_w.transpose()).rowwise() + p.out_b.col(0).transpose();
}

void check_dims(const LabelerParams& p, const LabelerConfig& c) {
  const int g = gate_count(c.cell) * c.hidden_dim;
  auto expect = [](const Matrix& m, Eigen::Index r, Eigen::Index cols, const char* name) {
    if (m.rows() != r || m.cols() != cols) {
      throw UsageError(std::string("parameter block ") + name + " has shape " + std::to_string(m.rows()) +
                       "x" + std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" +
                       std::to_string(cols));
    }
  };
  expect(p.embedding, c.vocab.size(), c.embed_dim, "embedding");
  for (const auto* cw : {&p.fwd, &p.bwd}) {
    expect(cw->wx, g, c.embed_dim, "wx");
    expect(cw->wh, g, c.hidden_dim, "wh");
    expect(cw->b, g, 1, "b");
  }
  expect(p.out_w, 2, 2 * c.hidden_dim, "out.w");
  expect(p.out_b, 2, 1, "out.b");
}

}  // namespace

std::string to_string(CellKind kind) {
  switch (kind) {
    case CellKind::vanilla: return "vanilla";
    case CellKind::gru: return "gru";
    case CellKind::lstm: return "lstm";
  }
  return "?";
}

CellKind parse_cell_kind(std::string_view name) {
  if (name == "vanilla" || name == "rnn") return CellKind::vanilla;
  if (name == "gru") return CellKind::gru;
  if (name == "lstm") return CellKind::lstm;
  throw UsageError("unknown cell kind '" + std::string(name) + "'");
}

int gate_count(CellKind kind) {
  switch (kind) {
    case CellKind::vanilla: return 1;
    case CellKind::gru: return 3;
    case CellKind::lstm: return 4;
  }
  return 1;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{std::string(kUnkToken)}) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty() || tokens_[0] != kUnkToken) throw DataError("vocabulary must start with <unk>");
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (!index_.emplace(tokens_[i], i).second) throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
  }
}

Vocab Vocab::build(const std::vector<tokenize::TokenSequence>& sequences) {
  std::set<std::string> distinct;
  for (const auto& s : sequences) distinct.insert(s.tokens.begin(), s.tokens.end());
  distinct.erase(std::string(kUnkToken));
  std::vector<std::string> tokens{std::string(kUnkToken)};
  tokens.insert(tokens.end(), distinct.begin(), distinct.end());
  return Vocab(std::move(tokens));
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

std::vector<int> Vocab::ids(const tokenize::TokenSequence& seq) const {
  std::vector<int> out;
  out.reserve(seq.size());
  for (const auto& t : seq.tokens) out.push_back(id(t));
  return out;
}

void validate(const LabelerConfig& c) {
  if (c.hidden_dim < 1) throw UsageError("hidden_dim must be >= 1");
  if (c.embed_dim < 1) throw UsageError("embed_dim must be >= 1");
  if (!(c.learning_rate > 0)) throw UsageError("learning_rate must be > 0");
  if (c.batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (c.epochs < 0) throw UsageError("epochs must be >= 0");
  if (c.clip_norm < 0) throw UsageError("clip_norm must be >= 0");
}

LabelerParams LabelerParams::zeros(const LabelerConfig& c) {
  const int g = gate_count(c.cell) * c.hidden_dim;
  LabelerParams p;
  p.embedding = Matrix::Zero(c.vocab.size(), c.embed_dim);
  for (auto* cw : {&p.fwd, &p.bwd}) {
    cw->wx = Matrix::Zero(g, c.embed_dim);
    cw->wh = Matrix::Zero(g, c.hidden_dim);
    cw->b = Matrix::Zero(g, 1);
  }
  p.out_w = Matrix::Zero(2, 2 * c.hidden_dim);
  p.out_b = Matrix::Zero(2, 1);
  return p;
}

LabelerParams LabelerParams::random(const LabelerConfig& c, std::uint64_t seed) {
  auto p = zeros(c);
  Rng rng(seed);
  auto fill = [&](Matrix& m, double k) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-k, k);
    }
  };
  const double k_in = 1.0 / std::sqrt(static_cast<double>(c.embed_dim));
  const double k_h = 1.0 / std::sqrt(static_cast<double>(c.hidden_dim));
  const double k_out = 1.0 / std::sqrt(2.0 * c.hidden_dim);
  fill(p.embedding, 0.1);
  for (auto* cw : {&p.fwd, &p.bwd}) {
    fill(cw->wx, k_in);
    fill(cw->wh, k_h);
    fill(cw->b, k_h);
  }
  fill(p.out_w, k_out);
  fill(p.out_b, k_out);
  return p;
}

std::optional<std::string> LabelerParams::non_finite_block() const {
  std::optional<std::string> bad;
  for_each_block([&](const char* name, const Matrix& m) {
    if (!bad && !m.allFinite()) bad = name;
  });
  return bad;
}

void LabelerParams::round_to_float() {
  for_each_block([](const char*, Matrix& m) {
    m = m.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
  });
}

double LabelerParams::squared_norm() const {
  double s = 0;
  for_each_block([&](const char*, const Matrix& m) { s += m.squaredNorm(); });
  return s;
}

AdamState AdamState::fresh(const LabelerParams& like) {
  AdamState s;
  s.m = like;
  s.m.for_each_block([](const char*, Matrix& m) { m.setZero(); });
  s.v = s.m;
  return s;
}

Batch Batch::pack(const std::vector<const Sequence*>& sequences, int pad_to) {
  int width = pad_to;
  for (const auto* s : sequences) {
    if (s->labels.size() != s->token_ids.size()) throw UsageError("labels and tokens differ in length");
    width = std::max(width, static_cast<int>(s->token_ids.size()));
  }
  Batch b;
  const auto rows = static_cast<Eigen::Index>(sequences.size());
  b.tokens = Eigen::MatrixXi::Zero(rows, width);
  b.labels = Eigen::MatrixXi::Zero(rows, width);
  b.mask = Eigen::MatrixXi::Zero(rows, width);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& s = *sequences[i];
    b.lengths.push_back(static_cast<int>(s.token_ids.size()));
    for (std::size_t j = 0; j < s.token_ids.size(); ++j) {
      b.tokens(i, j) = s.token_ids[j];
      b.labels(i, j) = s.labels[j];
      b.mask(i, j) = 1;
    }
  }
  return b;
}

Matrix encode_sequence(const LabelerParams& params, const LabelerConfig& config,
                       const std::vector<int>& token_ids) {
  check_dims(params, config);
  if (token_ids.empty()) return Matrix(0, 2 * config.hidden_dim);
  return forward(params, config, token_ids.data(), static_cast<int>(token_ids.size())).features;
}

Matrix predict_class_probs(const LabelerParams& params, const LabelerConfig& config,
                           const std::vector<int>& token_ids) {
  Matrix logits = logits_of(params, encode_sequence(params, config, token_ids));
  Matrix probs(logits.rows(), 2);
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    const double e0 = std::exp(logits(t, 0) - m);
    const double e1 = std::exp(logits(t, 1) - m);
    probs(t, 0) = e0 / (e0 + e1);
    probs(t, 1) = e1 / (e0 + e1);
  }
  return probs;
}

std::vector<double> predict_split_probs(const LabelerParams& params, const LabelerConfig& config,
                                        const std::vector<int>& token_ids) {
  Matrix probs = predict_class_probs(params, config, token_ids);
  return std::vector<double>(probs.col(1).data(), probs.col(1).data() + probs.rows());
}

LossAndGradients loss_and_gradients(const LabelerParams& params, const LabelerConfig& config,
                                    const Batch& batch) {
  check_dims(params, config);
  const int H = config.hidden_dim;
  LossAndGradients out;
  out.grads = LabelerParams::zeros(config);
  for (Eigen::Index i = 0; i < batch.mask.rows(); ++i) out.positions += batch.mask.row(i).sum();
  if (out.positions == 0) return out;
  const double scale = 1.0 / static_cast<double>(out.positions);

  double total = 0.0;
  for (Eigen::Index row = 0; row < batch.tokens.rows(); ++row) {
    const int length = batch.lengths[row];
    if (length == 0) continue;
    std::vector<int> ids(length);
    for (int t = 0; t < length; ++t) ids[t] = batch.tokens(row, t);
    auto fw = forward(params, config, ids.data(), length);
    Matrix logits = logits_of(params, fw.features);
    Matrix dlogits(length, 2);
    for (int t = 0; t < length; ++t) {
      const double m = logits.row(t).maxCoeff();
      const double lse = m + std::log(std::exp(logits(t, 0) - m) + std::exp(logits(t, 1) - m));
      const int gold = batch.labels(row, t);
      if (gold != 0 && gold != 1) throw UsageError("labels must be 0 or 1");
      const double w = batch.mask(row, t) ? 1.0 : 0.0;
      total += w * (lse - logits(t, gold));
      for (int k = 0; k < 2; ++k) {
        dlogits(t, k) = w * scale * (std::exp(logits(t, k) - lse) - (k == gold ? 1.0 : 0.0));
      }
    }
    out.grads.out_w.noalias() += dlogits.transpose() * fw.features;
    out.grads.out_b.col(0) += dlogits.colwise().sum().transpose();
    Matrix dfeat = dlogits * params.out_w;  // T x 2H
    Matrix dh_fwd = dfeat.leftCols(H).transpose();
    Matrix dh_bwd = dfeat.rightCols(H).transpose().rowwise().reverse();
    Matrix dx_fwd = backward_direction(params.fwd, config.cell, H, fw.fwd, dh_fwd, out.grads.fwd);
    Matrix dx_bwd = backward_direction(params.bwd, config.cell, H, fw.bwd, dh_bwd, out.grads.bwd);
    if (config.embeddings_trainable) {
      for (int t = 0; t < length; ++t) {
        out.grads.embedding.row(ids[t]) += (dx_fwd.col(t) + dx_bwd.col(length - 1 - t)).transpose();
      }
    }
  }
  out.loss = total * scale;
  if (!std::isfinite(out.loss)) {
    auto bad = params.non_finite_block();
    throw DataError("non-finite value in forward pass (block " + bad.value_or("activations") + ")");
  }
  return out;
}

void adam_step(LabelerParams& params, const LabelerParams& grads, AdamState& state, double lr) {
  std::vector<const Matrix*> g_blocks;
  grads.for_each_block([&](const char*, const Matrix& m) { g_blocks.push_back(&m); });
  std::vector<Matrix*> m_blocks, v_blocks;
  state.m.for_each_block([&](const char*, Matrix& m) { m_blocks.push_back(&m); });
  state.v.for_each_block([&](const char*, Matrix& m) { v_blocks.push_back(&m); });
  std::size_t k = 0;
  params.for_each_block([&](const char* name, Matrix& p) {
    const Matrix& g = *g_blocks[k];
    if (g.rows() != p.rows() || g.cols() != p.cols() || m_blocks[k]->rows() != p.rows() ||
        m_blocks[k]->cols() != p.cols()) {
      throw UsageError(std::string("adam_step: shape mismatch in block ") + name);
    }
    ++k;
  });
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  k = 0;
  params.for_each_block([&](const char*, Matrix& p) {
    const Matrix& g = *g_blocks[k];
    Matrix& m = *m_blocks[k];
    Matrix& v = *v_blocks[k];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
    ++k;
  });
}

std::optional<TrainExample> make_example(const Vocab& vocab, const tokenize::TokenSequence& tokens,
                                         corpus::BoundaryLabel boundary, bool* lossy) {
  if (tokens.size() < 2) return std::nullopt;
  auto labels = tokenize::project_labels(boundary, tokens);
  if (lossy) *lossy = labels.lossy;
  TrainExample ex;
  ex.sequence.token_ids = vocab.ids(tokens);
  ex.sequence.labels = std::move(labels.labels);
  for (const auto& s : tokens.spans) ex.token_ends.push_back(s.end);
  ex.gold_split = boundary.split_index;
  return ex;
}

double split_accuracy(const LabelerParams& params, const LabelerConfig& config,
                      const std::vector<TrainExample>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    auto probs = predict_split_probs(params, config, ex.sequence.token_ids);
    auto token = splitters::argmax_split_token(probs);
    if (token && ex.token_ends[*token] == ex.gold_split) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

TrainResult train(const LabelerConfig& config, const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& dev_set, const std::optional<Matrix>& initial_embedding) {
  validate(config);
  if (train_set.empty()) throw UsageError("training set is empty");
  const auto& selection = dev_set.empty() ? train_set : dev_set;

  TrainResult result;
  auto params = LabelerParams::random(config, config.seed);
  if (initial_embedding) {
    if (initial_embedding->rows() != params.embedding.rows() ||
        initial_embedding->cols() != params.embedding.cols()) {
      throw UsageError("initial embedding matrix has the wrong shape");
    }
    params.embedding = *initial_embedding;
  }
  auto state = AdamState::fresh(params);
  Rng rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  double best_accuracy = -1.0;
  result.best_params = params;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    // Bucket by length so each batch pads little, then shuffle batch order.
    auto bucketed = order;
    std::stable_sort(bucketed.begin(), bucketed.end(), [&](std::size_t a, std::size_t b) {
      return train_set[a].sequence.token_ids.size() < train_set[b].sequence.token_ids.size();
    });
    std::vector<std::vector<const Sequence*>> batches;
    for (std::size_t i = 0; i < bucketed.size(); i += config.batch_size) {
      std::vector<const Sequence*> batch;
      for (std::size_t j = i; j < std::min(bucketed.size(), i + config.batch_size); ++j) {
        batch.push_back(&train_set[bucketed[j]].sequence);
      }
      batches.push_back(std::move(batch));
    }
    rng.shuffle(batches);

    double loss_sum = 0.0;
    std::size_t positions = 0;
    for (const auto& seqs : batches) {
      auto lg = loss_and_gradients(params, config, Batch::pack(seqs));
      loss_sum += lg.loss * static_cast<double>(lg.positions);
      positions += lg.positions;
      if (config.clip_norm > 0) {
        const double norm = std::sqrt(lg.grads.squared_norm());
        if (norm > config.clip_norm) {
          lg.grads.for_each_block([&](const char*, Matrix& m) { m *= config.clip_norm / norm; });
        }
      }
      adam_step(params, lg.grads, state, config.learning_rate);
      if (auto bad = params.non_finite_block()) {
        throw DataError("training diverged: non-finite values in block " + *bad);
      }
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = positions ? loss_sum / static_cast<double>(positions) : 0.0;
    entry.dev_accuracy = split_accuracy(params, config, selection);
    result.log.push_back(entry);
    if (entry.dev_accuracy > best_accuracy) {
      best_accuracy = entry.dev_accuracy;
      result.best_params = params;
      result.best_epoch = epoch;
    }
    if (config.target_accuracy && entry.dev_accuracy >= *config.target_accuracy) break;
  }
  result.params = std::move(params);
  result.params.round_to_float();
  result.best_params.round_to_float();
  return result;
}

model_file::ModelFile to_model_file(const LabelerParams& params, const LabelerConfig& config,
                                    const tokenize::Tokenizer& tokenizer) {
  check_dims(params, config);
  model_file::ModelFile f;
  f.set("kind", "labeler");
  f.set("cell", to_string(config.cell));
  f.set("hidden_dim", std::to_string(config.hidden_dim));
  f.set("embed_dim", std::to_string(config.embed_dim));
  f.set("embeddings_trainable", config.embeddings_trainable ? "1" : "0");
  f.set("epochs", std::to_string(config.epochs));
  f.set("learning_rate", format_double(config.learning_rate));
  f.set("batch_size", std::to_string(config.batch_size));
  f.set("seed", std::to_string(config.seed));
  f.set("tokenizer", tokenizer.mode() == tokenize::Mode::character ? "char" : "bpe");
  for (const auto& [l, r] : tokenizer.bpe().merges) f.set("merge", l + ' ' + r);
  for (const auto& t : config.vocab.tokens()) f.set("token", t);
  params.for_each_block([&](const char* name, const Matrix& m) {
    model_file::NamedArray a{name, static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), {}};
    a.data.reserve(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) a.data.push_back(static_cast<float>(m(i, j)));
    }
    f.arrays.push_back(std::move(a));
  });
  return f;
}

LoadedLabeler from_model_file(const model_file::ModelFile& f) {
  if (f.get("kind") != "labeler") throw DataError("not a labeler model (kind=" + f.get("kind") + ")");
  auto to_int = [&](const char* key) {
    try {
      return std::stoi(f.get(key));
    } catch (const std::logic_error&) {
      throw DataError(std::string("bad model field ") + key);
    }
  };
  LoadedLabeler out;
  auto& c = out.config;
  c.cell = parse_cell_kind(f.get("cell"));
  c.hidden_dim = to_int("hidden_dim");
  c.embed_dim = to_int("embed_dim");
  c.embeddings_trainable = f.get("embeddings_trainable") == "1";
  c.epochs = to_int("epochs");
  c.learning_rate = std::stod(f.get("learning_rate"));
  c.batch_size = to_int("batch_size");
  c.seed = std::stoull(f.get("seed"));
  c.vocab = Vocab(f.get_all("token"));
  if (f.get("tokenizer") == "bpe") {
    std::string merges;
    for (const auto& m : f.get_all("merge")) merges += m + '\n';
    out.tokenizer = tokenize::Tokenizer(tokenize::parse_merges(merges));
  }
  out.params = LabelerParams::zeros(c);
  out.params.for_each_block([&](const char* name, Matrix& m) {
    const auto& a = f.array(name);
    if (a.rows != static_cast<std::size_t>(m.rows()) || a.cols != static_cast<std::size_t>(m.cols())) {
      throw DataError(std::string("block ") + name + " has unexpected shape");
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = a.data[i * a.cols + j];
    }
  });
  return out;
}

void save_params(const LabelerParams& params, const LabelerConfig& config,
                 const tokenize::Tokenizer& tokenizer, const std::filesystem::path& path) {
  model_file::save(to_model_file(params, config, tokenizer), path);
}

LoadedLabeler load_params(const std::filesystem::path& path) {
  return from_model_file(model_file::load(path));
}

SubwordEmbeddings load_subword_embeddings(const std::filesystem::path& path, const Vocab& vocab,
                                          int embed_dim, std::uint64_t seed) {
  auto table = embeddings::load_text_vectors(path);
  if (table.dim() != static_cast<std::size_t>(embed_dim)) {
    throw DataError("sub-word vectors have dimension " + std::to_string(table.dim()) +
                    ", model expects " + std::to_string(embed_dim));
  }
  SubwordEmbeddings out;
  out.matrix.resize(vocab.size(), embed_dim);
  Rng rng(seed);
  for (int i = 0; i < vocab.size(); ++i) {
    if (const auto* v = table.find_exact(vocab.tokens()[i])) {
      for (int j = 0; j < embed_dim; ++j) out.matrix(i, j) = v[j];
    } else {
      for (int j = 0; j < embed_dim; ++j) out.matrix(i, j) = rng.uniform(-0.1, 0.1);
      ++out.missing;
    }
  }
  if (out.missing > 0) {
    std::cerr << "warning: " << out.missing << " of " << vocab.size()
              << " sub-word tokens have no pretrained vector; initialized randomly\n";
  }
  return out;
}

}  // namespace dekompost::neuro
