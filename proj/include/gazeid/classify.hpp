#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gazeid/error.hpp"
#include "gazeid/random.hpp"

namespace gazeid {

/// One-vs-rest linear classifier: class k scores w_k . x + b_k.
struct LinearModel {
  std::vector<int> labels;                   // class label of each row
  std::vector<std::vector<double>> weights;  // one per class
  std::vector<double> bias;
  double C = 1.0;

  std::size_t dim() const { return weights.empty() ? 0 : weights.front().size(); }
  std::size_t num_classes() const { return labels.size(); }
};

struct TrainOptions {
  double C = 1.0;
  std::uint64_t seed = 0;
  int max_epochs = 1000;
  /// Stop when the spread of projected dual gradients drops below this.
  double tolerance = 1e-6;
};

namespace detail {

/// Binary L2-regularized hinge-loss SVM solved by dual coordinate descent.
/// The bias is a weight on a constant feature. y in {-1, +1}.
inline std::pair<std::vector<double>, double> train_binary_svm(
    std::span<const std::vector<double>> x, std::span<const double> y, double C,
    std::uint64_t seed, int max_epochs, double tolerance) {
  const std::size_t n = x.size();
  const std::size_t dim = x.front().size();
  std::vector<double> w(dim + 1, 0.0);  // last entry is the bias weight on a constant 1
  std::vector<double> alpha(n, 0.0);
  std::vector<double> q_diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    q_diag[i] = std::inner_product(x[i].begin(), x[i].end(), x[i].begin(), 1.0);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double pg_max = -INFINITY, pg_min = INFINITY;
    for (std::size_t i : order) {
      const double margin =
          std::inner_product(x[i].begin(), x[i].end(), w.begin(), w[dim]) * y[i];
      const double grad = margin - 1.0;
      double pg = grad;
      if (alpha[i] == 0.0) {
        pg = std::min(grad, 0.0);
      } else if (alpha[i] == C) {
        pg = std::max(grad, 0.0);
      }
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (std::abs(pg) > 1e-14) {
        const double old = alpha[i];
        alpha[i] = std::clamp(old - grad / q_diag[i], 0.0, C);
        const double delta = (alpha[i] - old) * y[i];
        for (std::size_t k = 0; k < dim; ++k) w[k] += delta * x[i][k];
        w[dim] += delta;
      }
    }
    if (pg_max - pg_min < tolerance) break;
  }
  const double b = w[dim];
  w.pop_back();
  return {std::move(w), b};
}

}  // namespace detail

/// Trains one binary hinge-loss classifier per class against the rest.
inline LinearModel train_linear(std::span<const std::vector<double>> x, std::span<const int> y,
                                const TrainOptions& opt = {}) {
  require(x.size() == y.size(), ErrorCode::kDimensionMismatch, "features and labels differ in size");
  require(!x.empty(), ErrorCode::kInsufficientData, "training needs examples");
  require(opt.C > 0.0, ErrorCode::kInvalidArgument, "C must be positive");
  const std::size_t dim = x.front().size();
  for (const auto& row : x) {
    require(row.size() == dim, ErrorCode::kDimensionMismatch, "ragged feature matrix");
  }
  LinearModel m;
  m.C = opt.C;
  m.labels.assign(y.begin(), y.end());
  std::sort(m.labels.begin(), m.labels.end());
  m.labels.erase(std::unique(m.labels.begin(), m.labels.end()), m.labels.end());
  require(m.labels.size() >= 2, ErrorCode::kInsufficientData, "training needs at least 2 classes");

  std::vector<double> target(x.size());
  for (std::size_t k = 0; k < m.labels.size(); ++k) {
    for (std::size_t i = 0; i < x.size(); ++i) target[i] = y[i] == m.labels[k] ? 1.0 : -1.0;
    auto [w, b] = detail::train_binary_svm(x, target, opt.C, derive_seed(opt.seed, k),
                                           opt.max_epochs, opt.tolerance);
    m.weights.push_back(std::move(w));
    m.bias.push_back(b);
  }
  return m;
}

inline std::vector<double> decision_scores(const LinearModel& m, std::span<const double> x) {
  require(x.size() == m.dim(), ErrorCode::kDimensionMismatch,
          "feature dimension " + std::to_string(x.size()) + " != model dimension " +
              std::to_string(m.dim()));
  std::vector<double> s(m.num_classes());
  for (std::size_t k = 0; k < s.size(); ++k) {
    s[k] = std::inner_product(x.begin(), x.end(), m.weights[k].begin(), m.bias[k]);
  }
  return s;
}

/// Index of the largest entry; ties resolve to the lowest index.
inline std::size_t argmax_first(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

/// Class label maximizing the summed decision scores of k test items.
inline int identify(const LinearModel& m, std::span<const std::vector<double>> items) {
  require(!items.empty(), ErrorCode::kInvalidArgument, "identify needs at least one item");
  std::vector<double> total(m.num_classes(), 0.0);
  for (const auto& x : items) {
    const auto s = decision_scores(m, x);
    for (std::size_t k = 0; k < s.size(); ++k) total[k] += s[k];
  }
  return m.labels[argmax_first(total)];
}

}  // namespace gazeid
