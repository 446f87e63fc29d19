#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gazeid/distributions.hpp"
#include "gazeid/error.hpp"
#include "gazeid/grid.hpp"
#include "gazeid/optimize.hpp"
#include "gazeid/parallel.hpp"
#include "gazeid/random.hpp"
#include "gazeid/types.hpp"

namespace gazeid {

/// Index of each SceneWalk parameter in gradient vectors.
enum SceneWalkIndex : std::size_t {
  kZeta = 0,
  kInhibitionWeight,
  kLambda,
  kGamma,
  kOmegaAttention,
  kOmegaInhibition,
  kSigmaAttention,
  kSigmaInhibition,
  kSceneWalkParamCount,
};

inline constexpr std::array<const char*, kSceneWalkParamCount> kSceneWalkParamNames = {
    "zeta", "c_f", "lambda", "gamma", "omega_a", "omega_f", "sigma_a", "sigma_f"};

struct SceneWalkParams {
  double omega_a = 2.5;  // 1/s
  double omega_f = 1.5;  // 1/s
  double sigma_a = 4.0;  // deg
  double sigma_f = 3.0;  // deg
  double lambda = 1.0;
  double gamma = 1.0;
  double c_f = 0.3;
  double zeta = 0.05;

  std::array<double, kSceneWalkParamCount> to_array() const {
    return {zeta, c_f, lambda, gamma, omega_a, omega_f, sigma_a, sigma_f};
  }

  static SceneWalkParams from_array(const std::array<double, kSceneWalkParamCount>& v) {
    SceneWalkParams p;
    p.zeta = v[kZeta];
    p.c_f = v[kInhibitionWeight];
    p.lambda = v[kLambda];
    p.gamma = v[kGamma];
    p.omega_a = v[kOmegaAttention];
    p.omega_f = v[kOmegaInhibition];
    p.sigma_a = v[kSigmaAttention];
    p.sigma_f = v[kSigmaInhibition];
    return p;
  }

  void validate() const {
    const bool ok = omega_a > 0.0 && omega_f > 0.0 && sigma_a > 0.0 && sigma_f > 0.0 &&
                    lambda > 0.0 && gamma > 0.0 && c_f >= 0.0 && zeta >= 0.0 && zeta <= 1.0;
    require(ok, ErrorCode::kInvalidArgument, "SceneWalk parameters out of range: " + describe());
  }

  std::string describe() const {
    std::string s;
    const auto v = to_array();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ", ";
      s += std::string(kSceneWalkParamNames[i]) + "=" + std::to_string(v[i]);
    }
    return s;
  }
};

/// Attention and inhibition fields plus their derivatives with respect to
/// the decay rates and window widths.
struct SceneWalkState {
  std::vector<double> attention;
  std::vector<double> inhibition;
  std::vector<double> d_attention_d_omega;
  std::vector<double> d_attention_d_sigma;
  std::vector<double> d_inhibition_d_omega;
  std::vector<double> d_inhibition_d_sigma;
  std::size_t t = 0;

  /// Attention starts at the saliency map, inhibition uniform.
  static SceneWalkState initial(const SaliencyMap& h) {
    const std::size_t n = h.grid.size();
    SceneWalkState s;
    s.attention = h.h;
    s.inhibition.assign(n, 1.0 / static_cast<double>(n));
    s.d_attention_d_omega.assign(n, 0.0);
    s.d_attention_d_sigma.assign(n, 0.0);
    s.d_inhibition_d_omega.assign(n, 0.0);
    s.d_inhibition_d_sigma.assign(n, 0.0);
    return s;
  }
};

/// Small mass added to the clipped potential so the mixture never yields an
/// exact zero even when zeta is zero.
inline constexpr double kPotentialEpsilon = 1e-12;

namespace detail {

struct WindowAxes {
  std::vector<double> gx, gy;  // unnormalized separable factors
  std::vector<double> dx2, dy2;
};

inline WindowAxes window_axes(Point q, double sigma, const GridSpec& grid) {
  WindowAxes w;
  w.gx = axis_gaussian(grid.cols, grid.cell_width(), q.x, sigma);
  w.gy = axis_gaussian(grid.rows, grid.cell_height(), q.y, sigma);
  w.dx2.resize(grid.cols);
  w.dy2.resize(grid.rows);
  for (std::size_t c = 0; c < grid.cols; ++c) {
    const double d = grid.x_center(c) - q.x;
    w.dx2[c] = d * d;
  }
  for (std::size_t r = 0; r < grid.rows; ++r) {
    const double d = grid.y_center(r) - q.y;
    w.dy2[r] = d * d;
  }
  return w;
}

/// Relaxes `field` toward the normalized target `weight * G / sum(weight * G)`
/// at rate omega over d seconds, carrying d field / d omega and
/// d field / d sigma along.
inline void relax_field(std::vector<double>& field, std::vector<double>& d_omega,
                        std::vector<double>& d_sigma, const std::vector<double>* weight, Point q,
                        double sigma, double omega, double d_s, const GridSpec& grid) {
  const WindowAxes w = window_axes(q, sigma, grid);
  const double norm = 1.0 / (2.0 * kPi * sigma * sigma);
  const double s3 = sigma * sigma * sigma;
  const std::size_t n = grid.size();
  std::vector<double> target(n), d_target(n);
  double sum = 0.0, d_sum = 0.0;
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const std::size_t i = r * grid.cols + c;
      const double h = weight ? (*weight)[i] : 1.0;
      const double g = norm * w.gy[r] * w.gx[c] * h;
      // d G / d sigma = G * (r^2 / sigma^3 - 2 / sigma)
      const double dg = g * ((w.dx2[c] + w.dy2[r]) / s3 - 2.0 / sigma);
      target[i] = g;
      d_target[i] = dg;
      sum += g;
      d_sum += dg;
    }
  }
  require(sum > 0.0 && std::isfinite(sum), ErrorCode::kNonFinite,
          "gaussian window has no mass on the grid (sigma=" + std::to_string(sigma) + ")");
  const double decay = std::exp(-omega * d_s);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = target[i] / sum;
    const double dt = (d_target[i] - t * d_sum) / sum;
    const double prev = field[i];
    field[i] = t + decay * (prev - t);
    d_omega[i] = decay * (d_omega[i] - d_s * (prev - t));
    d_sigma[i] = (1.0 - decay) * dt + decay * d_sigma[i];
  }
}

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : 0.0; }
inline double safe_pow(double x, double e) { return x > 0.0 ? std::exp(e * std::log(x)) : 0.0; }

}  // namespace detail

/// Moves the fields to fixation q held for d_ms milliseconds.
inline void advance(SceneWalkState& state, Point q, double d_ms, const SceneWalkParams& p,
                    const SaliencyMap& h) {
  require(d_ms > 0.0, ErrorCode::kInvalidArgument, "fixation duration must be positive");
  const GridSpec& grid = h.grid;
  const double d_s = d_ms / 1000.0;
  const Point center = grid.center(grid.cell_of(q));
  detail::relax_field(state.attention, state.d_attention_d_omega, state.d_attention_d_sigma, &h.h,
                      center, p.sigma_a, p.omega_a, d_s, grid);
  detail::relax_field(state.inhibition, state.d_inhibition_d_omega, state.d_inhibition_d_sigma,
                      nullptr, center, p.sigma_f, p.omega_f, d_s, grid);
  ++state.t;
}

struct NextFixation {
  std::vector<double> potential;    // U = A^lambda/sum - c_F F^gamma/sum
  std::vector<double> probability;  // mixture over cells
};

namespace detail {

struct PowerField {
  std::vector<double> normalized;  // x^e / sum x^e
  std::vector<double> log;
  double sum = 0.0;
  double mean_log = 0.0;  // sum normalized * log
};

inline PowerField power_field(const std::vector<double>& x, double e) {
  PowerField f;
  const std::size_t n = x.size();
  f.normalized.resize(n);
  f.log.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.log[i] = safe_log(x[i]);
    f.normalized[i] = safe_pow(x[i], e);
    f.sum += f.normalized[i];
  }
  require(f.sum > 0.0 && std::isfinite(f.sum), ErrorCode::kNonFinite,
          "field power has no finite mass (exponent=" + std::to_string(e) + ")");
  for (std::size_t i = 0; i < n; ++i) {
    f.normalized[i] /= f.sum;
    f.mean_log += f.normalized[i] * f.log[i];
  }
  return f;
}

}  // namespace detail

/// Next-fixation distribution from the current fields.
inline NextFixation next_fixation(const SceneWalkState& state, const SceneWalkParams& p) {
  const std::size_t n = state.attention.size();
  const auto a = detail::power_field(state.attention, p.lambda);
  const auto f = detail::power_field(state.inhibition, p.gamma);
  NextFixation out;
  out.potential.resize(n);
  out.probability.resize(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.potential[i] = a.normalized[i] - p.c_f * f.normalized[i];
    z += std::max(out.potential[i], 0.0) + kPotentialEpsilon;
  }
  const double uniform = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::max(out.potential[i], 0.0) + kPotentialEpsilon;
    out.probability[i] = (1.0 - p.zeta) * (v / z) + p.zeta * uniform;
  }
  return out;
}

/// One model step: advance to (q, d) and return the distribution of the next
/// fixation.
inline NextFixation step(SceneWalkState& state, Point q, double d_ms, const SceneWalkParams& p,
                         const SaliencyMap& h) {
  advance(state, q, d_ms, p, h);
  return next_fixation(state, p);
}

enum class InitPolicy { kExcluded, kUniform, kSaliency };

struct SceneWalkDiagnostics {
  std::size_t clamped_fixations = 0;
};

namespace detail {

struct StepTerm {
  double log_p = 0.0;
  std::array<double, kSceneWalkParamCount> grad{};
};

/// log p(target) under the current state and, if requested, its gradient.
inline StepTerm step_term(const SceneWalkState& st, const SceneWalkParams& p, std::size_t target,
                          bool want_grad) {
  const std::size_t n = st.attention.size();
  const auto a = power_field(st.attention, p.lambda);
  const auto f = power_field(st.inhibition, p.gamma);

  // Derivatives of A^lambda and F^gamma totals along the carried partials.
  double s_pa_om = 0.0, s_pa_sg = 0.0, s_pf_om = 0.0, s_pf_sg = 0.0;
  if (want_grad) {
    for (std::size_t i = 0; i < n; ++i) {
      if (st.attention[i] > 0.0) {
        const double k = p.lambda * a.normalized[i] / st.attention[i];
        s_pa_om += k * st.d_attention_d_omega[i];
        s_pa_sg += k * st.d_attention_d_sigma[i];
      }
      if (st.inhibition[i] > 0.0) {
        const double k = p.gamma * f.normalized[i] / st.inhibition[i];
        s_pf_om += k * st.d_inhibition_d_omega[i];
        s_pf_sg += k * st.d_inhibition_d_sigma[i];
      }
    }
  }

  // dU for parameters in gradient order, excluding zeta.
  auto d_potential = [&](std::size_t i, std::array<double, kSceneWalkParamCount>& du) {
    const double an = a.normalized[i];
    const double fn = f.normalized[i];
    du[kInhibitionWeight] = -fn;
    du[kLambda] = an * (a.log[i] - a.mean_log);
    du[kGamma] = -p.c_f * fn * (f.log[i] - f.mean_log);
    const double ka = st.attention[i] > 0.0 ? p.lambda * an / st.attention[i] : 0.0;
    const double kf = st.inhibition[i] > 0.0 ? p.gamma * fn / st.inhibition[i] : 0.0;
    du[kOmegaAttention] = ka * st.d_attention_d_omega[i] - an * s_pa_om;
    du[kSigmaAttention] = ka * st.d_attention_d_sigma[i] - an * s_pa_sg;
    du[kOmegaInhibition] = -p.c_f * (kf * st.d_inhibition_d_omega[i] - fn * s_pf_om);
    du[kSigmaInhibition] = -p.c_f * (kf * st.d_inhibition_d_sigma[i] - fn * s_pf_sg);
  };

  double z = 0.0;
  std::array<double, kSceneWalkParamCount> dz{};
  std::array<double, kSceneWalkParamCount> du{};
  for (std::size_t i = 0; i < n; ++i) {
    const double u = a.normalized[i] - p.c_f * f.normalized[i];
    z += std::max(u, 0.0) + kPotentialEpsilon;
    if (want_grad && u > 0.0) {
      d_potential(i, du);
      for (std::size_t k = 1; k < kSceneWalkParamCount; ++k) dz[k] += du[k];
    }
  }
  const double u_t = a.normalized[target] - p.c_f * f.normalized[target];
  const double v_t = std::max(u_t, 0.0) + kPotentialEpsilon;
  const double share = v_t / z;
  const double uniform = 1.0 / static_cast<double>(n);
  const double prob = (1.0 - p.zeta) * share + p.zeta * uniform;
  require(prob > 0.0 && std::isfinite(prob), ErrorCode::kNonFinite,
          "next-fixation probability is not finite for " + p.describe());

  StepTerm term;
  term.log_p = std::log(prob);
  if (!want_grad) return term;
  term.grad[kZeta] = (uniform - share) / prob;
  du.fill(0.0);
  if (u_t > 0.0) d_potential(target, du);
  for (std::size_t k = 1; k < kSceneWalkParamCount; ++k) {
    const double d_share = (du[k] - share * dz[k]) / z;
    term.grad[k] = (1.0 - p.zeta) * d_share / prob;
  }
  return term;
}

struct PathEvaluation {
  double loglik = 0.0;
  std::array<double, kSceneWalkParamCount> grad{};
};

inline PathEvaluation evaluate_path(const Scanpath& path, const SaliencyMap& h,
                                    const SceneWalkParams& p, InitPolicy init, bool want_grad,
                                    SceneWalkDiagnostics* diag) {
  path.validate();
  p.validate();
  const GridSpec& grid = h.grid;
  require(h.h.size() == grid.size(), ErrorCode::kDimensionMismatch,
          "saliency map does not match its grid");
  PathEvaluation out;
  std::size_t clamped = 0;
  std::vector<std::size_t> cells(path.size());
  for (std::size_t t = 0; t < path.size(); ++t) {
    bool c = false;
    cells[t] = grid.cell_of(path.fixations[t].q, &c);
    clamped += c ? 1 : 0;
  }
  if (diag) diag->clamped_fixations = clamped;

  switch (init) {
    case InitPolicy::kExcluded: break;
    case InitPolicy::kUniform: out.loglik += -std::log(static_cast<double>(grid.size())); break;
    case InitPolicy::kSaliency: out.loglik += std::log(h.h[cells[0]]); break;
  }

  SceneWalkState st = SceneWalkState::initial(h);
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    advance(st, path.fixations[t].q, path.fixations[t].duration_ms, p, h);
    const StepTerm term = step_term(st, p, cells[t + 1], want_grad);
    out.loglik += term.log_p;
    for (std::size_t k = 0; k < kSceneWalkParamCount; ++k) out.grad[k] += term.grad[k];
  }
  return out;
}

}  // namespace detail

/// Sum over t of ln p(q_{t+1} | q_1..q_t, d_1..d_t), plus the first-fixation
/// term selected by `init`.
inline double scenewalk_loglik(const Scanpath& path, const SaliencyMap& h, const SceneWalkParams& p,
                               InitPolicy init = InitPolicy::kExcluded,
                               SceneWalkDiagnostics* diag = nullptr) {
  return detail::evaluate_path(path, h, p, init, false, diag).loglik;
}

/// Analytic gradient in SceneWalkIndex order. The first-fixation term is
/// parameter free under every InitPolicy, so it does not contribute.
inline std::array<double, kSceneWalkParamCount> scenewalk_grad_loglik(
    const Scanpath& path, const SaliencyMap& h, const SceneWalkParams& p) {
  return detail::evaluate_path(path, h, p, InitPolicy::kExcluded, true, nullptr).grad;
}

/// A scanpath together with the saliency map of the image it was recorded on.
struct SceneWalkTrial {
  const Scanpath* path = nullptr;
  const SaliencyMap* saliency = nullptr;
};

struct SceneWalkFitOptions {
  double rho = 0.0;
  int max_iterations = 500;
  double grad_tolerance = 1e-5;
  std::size_t threads = 1;
};

struct SceneWalkFitResult {
  SceneWalkParams params;
  double objective = 0.0;  // penalized log-likelihood
  double grad_norm = 0.0;  // infinity norm in transformed coordinates
  int iterations = 0;
  bool converged = false;
};

/// Unconstrained coordinates: logit for zeta, log for everything else.
inline std::array<double, kSceneWalkParamCount> to_unconstrained(const SceneWalkParams& p) {
  auto v = p.to_array();
  std::array<double, kSceneWalkParamCount> u{};
  const double z = std::clamp(v[kZeta], 1e-9, 1.0 - 1e-9);
  u[kZeta] = std::log(z / (1.0 - z));
  for (std::size_t k = 1; k < kSceneWalkParamCount; ++k) u[k] = std::log(std::max(v[k], 1e-12));
  return u;
}

inline SceneWalkParams from_unconstrained(const std::array<double, kSceneWalkParamCount>& u) {
  std::array<double, kSceneWalkParamCount> v{};
  v[kZeta] = 1.0 / (1.0 + std::exp(-u[kZeta]));
  for (std::size_t k = 1; k < kSceneWalkParamCount; ++k) v[k] = std::exp(u[k]);
  return SceneWalkParams::from_array(v);
}

/// Penalized objective sum_i ln p(S_i) - rho * |u|^2 over unconstrained
/// coordinates u, and its gradient with respect to u.
inline double scenewalk_objective(std::span<const SceneWalkTrial> trials,
                                  const std::array<double, kSceneWalkParamCount>& u, double rho,
                                  std::array<double, kSceneWalkParamCount>* grad_u,
                                  std::size_t threads = 1) {
  const SceneWalkParams p = from_unconstrained(u);
  std::vector<detail::PathEvaluation> parts(trials.size());
  parallel_for(trials.size(), threads, [&](std::size_t i) {
    parts[i] = detail::evaluate_path(*trials[i].path, *trials[i].saliency, p,
                                     InitPolicy::kExcluded, grad_u != nullptr, nullptr);
  });
  double value = 0.0;
  std::array<double, kSceneWalkParamCount> g{};
  for (const auto& part : parts) {
    value += part.loglik;
    for (std::size_t k = 0; k < kSceneWalkParamCount; ++k) g[k] += part.grad[k];
  }
  for (std::size_t k = 0; k < kSceneWalkParamCount; ++k) value -= rho * u[k] * u[k];
  if (grad_u) {
    const auto v = p.to_array();
    (*grad_u)[kZeta] = g[kZeta] * v[kZeta] * (1.0 - v[kZeta]) - 2.0 * rho * u[kZeta];
    for (std::size_t k = 1; k < kSceneWalkParamCount; ++k) {
      (*grad_u)[k] = g[k] * v[k] - 2.0 * rho * u[k];
    }
  }
  return value;
}

/// Regularized maximum likelihood by L-BFGS in unconstrained coordinates.
inline SceneWalkFitResult fit_scenewalk(std::span<const SceneWalkTrial> trials,
                                        const SceneWalkParams& init,
                                        const SceneWalkFitOptions& opt = {}) {
  require(!trials.empty(), ErrorCode::kInsufficientData, "SceneWalk fit needs at least one path");
  require(opt.rho >= 0.0, ErrorCode::kInvalidArgument, "regularization strength must be >= 0");
  init.validate();

  ObjectiveFn fn = [&](const std::vector<double>& x, std::vector<double>& grad) -> double {
    std::array<double, kSceneWalkParamCount> u{}, gu{};
    std::copy(x.begin(), x.end(), u.begin());
    double value;
    try {
      value = scenewalk_objective(trials, u, opt.rho, &gu, opt.threads);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFinite) throw;
      return INFINITY;  // rejected by the line search
    }
    if (!std::isfinite(value)) return INFINITY;
    for (std::size_t k = 0; k < kSceneWalkParamCount; ++k) grad[k] = -gu[k];
    return -value;
  };
  const auto u0 = to_unconstrained(init);
  LbfgsOptions lopt;
  lopt.max_iterations = opt.max_iterations;
  lopt.grad_tolerance = opt.grad_tolerance;
  const LbfgsResult r = lbfgs_minimize(fn, {u0.begin(), u0.end()}, lopt);

  SceneWalkFitResult out;
  std::array<double, kSceneWalkParamCount> u{};
  std::copy(r.x.begin(), r.x.end(), u.begin());
  out.params = from_unconstrained(u);
  out.objective = -r.value;
  out.grad_norm = r.grad_norm;
  out.iterations = r.iterations;
  out.converged = r.converged;
  return out;
}

/// Durations for sampled scanpaths: a constant, or draws from a Gamma.
struct DurationSource {
  double constant_ms = 250.0;
  std::optional<GammaParams> gamma;

  double draw(Rng& rng) const { return gamma ? rng.gamma(gamma->alpha, gamma->beta) : constant_ms; }
};

/// Samples T fixations starting at q1; positions are cell centers.
inline Scanpath sample_scenewalk_scanpath(const SaliencyMap& h, const SceneWalkParams& p,
                                          std::size_t T, Point q1, const DurationSource& durations,
                                          Rng& rng) {
  require(T >= 1, ErrorCode::kInvalidArgument, "sampled scanpath needs T >= 1");
  p.validate();
  if (durations.gamma) validate(*durations.gamma);
  const GridSpec& grid = h.grid;
  Scanpath path;
  Point q = grid.center(grid.cell_of(q1));
  SceneWalkState st = SceneWalkState::initial(h);
  for (std::size_t t = 0; t < T; ++t) {
    const double d = durations.draw(rng);
    path.fixations.push_back({q, d});
    if (t + 1 == T) break;
    const NextFixation next = step(st, q, d, p, h);
    double r = rng.uniform();
    std::size_t cell = next.probability.size() - 1;
    for (std::size_t i = 0; i < next.probability.size(); ++i) {
      r -= next.probability[i];
      if (r < 0.0) {
        cell = i;
        break;
      }
    }
    q = grid.center(cell);
  }
  return path;
}

inline Scanpath sample_scenewalk_scanpath(const SaliencyMap& h, const SceneWalkParams& p,
                                          std::size_t T, Point q1, const DurationSource& durations,
                                          std::uint64_t seed) {
  Rng rng(seed);
  return sample_scenewalk_scanpath(h, p, T, q1, durations, rng);
}

}  // namespace gazeid
