#pragma once

// Central finite-difference oracle for the labeler loss. Test-only: it
// touches nothing but loss_and_gradients(...).loss.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dekompost/neuro.h"

namespace test_util {

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst_block;
  std::size_t checked = 0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

inline GradCheck check_gradients(const dekompost::neuro::LabelerParams& params,
                                 const dekompost::neuro::LabelerConfig& config,
                                 const dekompost::neuro::Batch& batch, double eps = 1e-4) {
  using dekompost::neuro::Matrix;
  const auto analytic = dekompost::neuro::loss_and_gradients(params, config, batch).grads;
  std::vector<const Matrix*> grads;
  analytic.for_each_block([&](const char*, const Matrix& m) { grads.push_back(&m); });

  GradCheck out;
  auto probe = params;
  std::size_t k = 0;
  probe.for_each_block([&](const char* name, Matrix& block) {
    const Matrix& g = *grads[k++];
    const bool frozen = std::string(name) == "embedding" && !config.embeddings_trainable;
    for (Eigen::Index i = 0; i < block.rows(); ++i) {
      for (Eigen::Index j = 0; j < block.cols(); ++j) {
        const double saved = block(i, j);
        block(i, j) = saved + eps;
        const double up = dekompost::neuro::loss_and_gradients(probe, config, batch).loss;
        block(i, j) = saved - eps;
        const double down = dekompost::neuro::loss_and_gradients(probe, config, batch).loss;
        block(i, j) = saved;
        // Frozen embeddings report zero gradient by definition.
        const double numeric = frozen ? 0.0 : (up - down) / (2 * eps);
        const double err = relative_error(g(i, j), numeric);
        ++out.checked;
        if (err > out.max_rel_error) {
          out.max_rel_error = err;
          out.worst_block = name;
        }
      }
    }
  });
  return out;
}

// Random id sequences with random 0/1 labels, lengths 1..max_len.
inline std::vector<dekompost::neuro::Sequence> random_sequences(std::mt19937_64& rng, int count, int vocab,
                                                                 int max_len) {
  std::vector<dekompost::neuro::Sequence> out;
  for (int k = 0; k < count; ++k) {
    dekompost::neuro::Sequence s;
    const int len = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_len));
    for (int t = 0; t < len; ++t) {
      s.token_ids.push_back(static_cast<int>(rng() % static_cast<unsigned>(vocab)));
      s.labels.push_back(static_cast<int>(rng() % 2));
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline dekompost::neuro::Batch pack_all(const std::vector<dekompost::neuro::Sequence>& seqs, int pad_to = 0) {
  std::vector<const dekompost::neuro::Sequence*> ptrs;
  for (const auto& s : seqs) ptrs.push_back(&s);
  return dekompost::neuro::Batch::pack(ptrs, pad_to);
}

}  // namespace test_util
