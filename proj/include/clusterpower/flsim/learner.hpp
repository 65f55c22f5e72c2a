#pragma once

// Multinomial logistic regression trained by mini-batch SGD.
//
// Weights are stored as (n_features + 1) rows of n_classes columns; the last
// row is the bias. A sub-model of width k uses feature rows [0, k) plus the
// bias row and ignores the remaining features, which is how a shrunk model is
// trained at reduced cost.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "clusterpower/flsim/dataset.hpp"

namespace clusterpower::fl {

struct LinearModel {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<double> w;  // (n_features + 1) x n_classes

  LinearModel() = default;
  LinearModel(std::size_t features, std::size_t classes)
      : n_features(features), n_classes(classes), w((features + 1) * classes, 0.0) {}

  double* row(std::size_t j) { return w.data() + j * n_classes; }
  const double* row(std::size_t j) const { return w.data() + j * n_classes; }
  std::size_t bias_row() const { return n_features; }

  /// Logits from the first `width` features plus bias.
  void logits(const double* x, std::size_t width, double* out) const {
    const double* b = row(bias_row());
    std::copy(b, b + n_classes, out);
    for (std::size_t j = 0; j < width; ++j) {
      const double xj = x[j];
      if (xj == 0.0) continue;
      const double* r = row(j);
      for (std::size_t c = 0; c < n_classes; ++c) out[c] += xj * r[c];
    }
  }

  int predict(const double* x) const {
    std::vector<double> z(n_classes);
    logits(x, n_features, z.data());
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
};

struct SgdOptions {
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
};

/// One pass over `indices` in the given order. Returns the mean
/// cross-entropy, which is non-finite if training diverged.
inline double sgd_epoch(LinearModel& m, const Dataset& d, std::span<const std::size_t> indices,
                        std::size_t width, const SgdOptions& opt) {
  const std::size_t k = m.n_classes;
  std::vector<double> grad((width + 1) * k);
  std::vector<double> z(k);
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += opt.batch_size) {
    const std::size_t end = std::min(indices.size(), start + opt.batch_size);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t b = start; b < end; ++b) {
      const std::size_t i = indices[b];
      const double* x = d.train_row(i);
      const int y = d.train_y[i];
      m.logits(x, width, z.data());
      const double zmax = *std::max_element(z.begin(), z.end());
      double norm = 0.0;
      for (auto& v : z) {
        v = std::exp(v - zmax);
        norm += v;
      }
      loss_sum += -(std::log(z[static_cast<std::size_t>(y)] / norm));
      for (std::size_t c = 0; c < k; ++c) {
        const double g = z[c] / norm - (static_cast<int>(c) == y ? 1.0 : 0.0);
        for (std::size_t j = 0; j < width; ++j) grad[j * k + c] += g * x[j];
        grad[width * k + c] += g;
      }
    }
    const double scale = opt.learning_rate / static_cast<double>(end - start);
    for (std::size_t j = 0; j < width; ++j) {
      double* r = m.row(j);
      for (std::size_t c = 0; c < k; ++c) r[c] -= scale * grad[j * k + c];
    }
    double* bias = m.row(m.bias_row());
    for (std::size_t c = 0; c < k; ++c) bias[c] -= scale * grad[width * k + c];
  }
  return indices.empty() ? 0.0 : loss_sum / static_cast<double>(indices.size());
}

inline double test_accuracy(const LinearModel& m, const Dataset& d) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.n_test(); ++i)
    if (m.predict(d.test_row(i)) == d.test_y[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(d.n_test());
}

}  // namespace clusterpower::fl
