#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "gazeid/error.hpp"
#include "gazeid/random.hpp"

namespace gazeid {

/// Gamma distribution with shape `alpha` and scale `beta` (mean alpha*beta).
struct GammaParams {
  double alpha = 1.0;
  double beta = 1.0;

  bool valid() const {
    return std::isfinite(alpha) && std::isfinite(beta) && alpha > 0.0 && beta > 0.0;
  }
  double mean() const { return alpha * beta; }
};

inline void validate(const GammaParams& p) {
  require(p.valid(), ErrorCode::kInvalidArgument,
          "gamma parameters must be positive (alpha=" + std::to_string(p.alpha) +
              ", beta=" + std::to_string(p.beta) + ")");
}

inline double digamma(double x) { return boost::math::digamma(x); }
inline double trigamma(double x) { return boost::math::trigamma(x); }

inline double gamma_logpdf(double x, const GammaParams& p) {
  require(x > 0.0, ErrorCode::kDomain, "gamma log-density needs x > 0");
  return (p.alpha - 1.0) * std::log(x) - x / p.beta - std::lgamma(p.alpha) -
         p.alpha * std::log(p.beta);
}

struct GammaScore {
  double d_alpha = 0.0;
  double d_beta = 0.0;
};

/// Partial derivatives of gamma_logpdf with respect to shape and scale.
inline GammaScore gamma_score(double x, const GammaParams& p) {
  require(x > 0.0, ErrorCode::kDomain, "gamma score needs x > 0");
  return {std::log(x) - digamma(p.alpha) - std::log(p.beta), (x / p.beta - p.alpha) / p.beta};
}

struct GammaMleOptions {
  double tolerance = 1e-10;
  int max_iterations = 100;
};

/// Maximum-likelihood shape and scale. The shape solves
/// ln(a) - digamma(a) = ln(mean x) - mean(ln x) by Newton's method; the scale
/// follows as mean / shape.
inline GammaParams gamma_mle(std::span<const double> xs, const GammaMleOptions& opt = {}) {
  require(xs.size() >= 2, ErrorCode::kDegenerateSample, "gamma fit needs at least 2 samples");
  double sum = 0.0, sum_log = 0.0;
  bool all_equal = true;
  for (double x : xs) {
    require(std::isfinite(x) && x > 0.0, ErrorCode::kDomain, "gamma fit needs positive samples");
    sum += x;
    sum_log += std::log(x);
    all_equal = all_equal && x == xs.front();
  }
  const double n = static_cast<double>(xs.size());
  const double mean = sum / n;
  const double s = std::log(mean) - sum_log / n;
  require(!all_equal && s > 0.0, ErrorCode::kDegenerateSample,
          "gamma fit on a zero-variance sample");

  double alpha = 0.5 / s;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const double f = std::log(alpha) - digamma(alpha) - s;
    const double fp = 1.0 / alpha - trigamma(alpha);
    double next = alpha - f / fp;
    if (!(next > 0.0)) next = 0.5 * alpha;
    const double step = next - alpha;
    alpha = next;
    if (std::abs(step) < opt.tolerance * std::max(1.0, alpha)) {
      return {alpha, mean / alpha};
    }
  }
  throw Error(ErrorCode::kNonConvergence,
              "gamma shape iteration did not converge, last iterate alpha=" +
                  std::to_string(alpha));
}

inline std::vector<double> gamma_sample(const GammaParams& p, std::size_t n, Rng& rng) {
  validate(p);
  std::vector<double> out(n);
  for (auto& x : out) x = rng.gamma(p.alpha, p.beta);
  return out;
}

inline std::vector<double> gamma_sample(const GammaParams& p, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return gamma_sample(p, n, rng);
}

inline constexpr double kProbabilityFloor = 1e-6;

/// Probabilities over the four saccade types.
struct MultinomialParams {
  std::array<double, 4> pi{0.25, 0.25, 0.25, 0.25};
};

using TypeCounts = std::array<double, 4>;

/// Raises entries below `floor` to it and rescales the remaining entries so
/// the vector sums to one.
inline std::array<double, 4> apply_probability_floor(std::array<double, 4> p,
                                                     double floor = kProbabilityFloor) {
  std::array<bool, 4> pinned{};
  for (int round = 0; round < 4; ++round) {
    double pinned_mass = 0.0, free_mass = 0.0;
    for (std::size_t u = 0; u < 4; ++u) {
      if (pinned[u] || p[u] < floor) {
        pinned[u] = true;
        p[u] = floor;
        pinned_mass += floor;
      } else {
        free_mass += p[u];
      }
    }
    bool changed = false;
    for (std::size_t u = 0; u < 4; ++u) {
      if (!pinned[u]) {
        p[u] *= (1.0 - pinned_mass) / free_mass;
        changed = changed || p[u] < floor;
      }
    }
    if (!changed) break;
  }
  return p;
}

inline MultinomialParams multinomial_mle(const TypeCounts& counts,
                                         double floor = kProbabilityFloor) {
  double total = 0.0;
  for (double k : counts) {
    require(k >= 0.0, ErrorCode::kInvalidArgument, "type counts must be non-negative");
    total += k;
  }
  require(total > 0.0, ErrorCode::kDegenerateSample, "multinomial fit on all-zero counts");
  std::array<double, 4> p{};
  for (std::size_t u = 0; u < 4; ++u) p[u] = counts[u] / total;
  return {apply_probability_floor(p, floor)};
}

/// d/d pi_u of sum_u K_u ln pi_u, unconstrained: K_u / pi_u.
inline std::array<double, 4> multinomial_score(const TypeCounts& counts,
                                               const MultinomialParams& m) {
  std::array<double, 4> g{};
  for (std::size_t u = 0; u < 4; ++u) g[u] = counts[u] / m.pi[u];
  return g;
}

/// Zero-based type index drawn by inverse CDF.
inline std::size_t multinomial_sample(const MultinomialParams& m, Rng& rng) {
  const double r = rng.uniform() * (m.pi[0] + m.pi[1] + m.pi[2] + m.pi[3]);
  double acc = 0.0;
  for (std::size_t u = 0; u < 3; ++u) {
    acc += m.pi[u];
    if (r < acc) return u;
  }
  return 3;
}

inline std::size_t multinomial_sample(const MultinomialParams& m, std::uint64_t seed) {
  Rng rng(seed);
  return multinomial_sample(m, rng);
}

}  // namespace gazeid
