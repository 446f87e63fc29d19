#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <numeric>
#include <vector>

namespace gazeid {

/// Objective returning f(x) and writing the gradient into `grad`.
using ObjectiveFn = std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;

struct LbfgsOptions {
  int max_iterations = 500;
  double grad_tolerance = 1e-5;  // infinity norm
  int history = 8;
  int max_line_search = 40;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {
inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}
inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}
}  // namespace detail

/// Limited-memory BFGS minimization with Armijo backtracking. Non-finite
/// trial values are treated as rejections. Returns the best iterate seen.
inline LbfgsResult lbfgs_minimize(const ObjectiveFn& fn, std::vector<double> x,
                                  const LbfgsOptions& opt = {}) {
  const std::size_t n = x.size();
  std::vector<double> g(n), g_new(n), x_new(n), dir(n);
  double f = fn(x, g);
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  LbfgsResult res;
  res.x = x;
  res.value = f;
  res.grad_norm = detail::inf_norm(g);
  if (!std::isfinite(f)) return res;

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it;
    if (res.grad_norm < opt.grad_tolerance) {
      res.converged = true;
      return res;
    }
    // Two-loop recursion.
    dir = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * detail::dot(s_hist[k], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[k] * y_hist[k][i];
    }
    if (!s_hist.empty()) {
      const double scale = detail::dot(s_hist.back(), y_hist.back()) /
                           detail::dot(y_hist.back(), y_hist.back());
      for (double& d : dir) d *= scale;
    } else {
      const double gn = std::sqrt(detail::dot(g, g));
      for (double& d : dir) d /= std::max(gn, 1.0);
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * detail::dot(y_hist[k], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] += s_hist[k][i] * (alpha[k] - beta);
    }
    for (double& d : dir) d = -d;
    double slope = detail::dot(g, dir);
    if (!(slope < 0.0)) {
      // Not a descent direction: restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      const double gn = std::sqrt(detail::dot(g, g));
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i] / std::max(gn, 1.0);
      slope = detail::dot(g, dir);
    }

    double step = 1.0;
    double f_new = INFINITY;
    bool accepted = false;
    for (int ls = 0; ls < opt.max_line_search; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * dir[i];
      f_new = fn(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.iterations = it + 1;
      return res;  // line search failed; report best iterate as non-converged
    }

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = detail::dot(s, y);
    if (sy > 1e-12 * std::sqrt(detail::dot(s, s) * detail::dot(y, y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = x_new;
    g = g_new;
    f = f_new;
    res.x = x;
    res.value = f;
    res.grad_norm = detail::inf_norm(g);
  }
  res.iterations = opt.max_iterations;
  res.converged = res.grad_norm < opt.grad_tolerance;
  return res;
}

}  // namespace gazeid
