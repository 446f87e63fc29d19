#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gazeid/detection.hpp"
#include "gazeid/error.hpp"
#include "gazeid/types.hpp"

namespace gazeid {

/// Wraps an angle in degrees into (-180, 180].
inline double wrap_degrees(double angle) {
  double r = std::fmod(angle, 360.0);
  if (r <= -180.0) r += 360.0;
  if (r > 180.0) r -= 360.0;
  return r;
}

inline double direction_degrees(double dx, double dy) {
  return wrap_degrees(std::atan2(dy, dx) * 180.0 / kPi);
}

/// Saccade type from the change of direction relative to the previous
/// saccade. Bins: maintain [-45, 45], right [-135, -45), left (45, 135],
/// reverse otherwise.
inline SaccadeType classify_direction_change(double delta_deg) {
  const double d = wrap_degrees(delta_deg);
  if (std::abs(d) <= 45.0) return SaccadeType::kMaintain;
  if (d < -45.0 && d >= -135.0) return SaccadeType::kRight;
  if (d > 45.0 && d <= 135.0) return SaccadeType::kLeft;
  return SaccadeType::kReverse;
}

/// Angular bin (lo, hi) in degrees for each type; reverse straddles +-180 and
/// is reported as (135, 225).
inline std::pair<double, double> type_bin(SaccadeType u) {
  switch (u) {
    case SaccadeType::kMaintain: return {-45.0, 45.0};
    case SaccadeType::kRight: return {-135.0, -45.0};
    case SaccadeType::kLeft: return {45.0, 135.0};
    case SaccadeType::kReverse: return {135.0, 225.0};
  }
  return {0.0, 0.0};
}

struct FeatureOptions {
  bool dynamics = false;
};

/// Per-saccade feature records for a scanpath. Amplitude, duration, direction
/// and type come from fixations alone. Velocity, acceleration and ratios need
/// the raw recording the scanpath was detected from; vigor additionally needs
/// a fitted rate.
inline std::vector<SaccadeFeatures> extract_features(const Scanpath& path,
                                                     const GazeRecording* rec = nullptr,
                                                     const VigorFit* vigor = nullptr,
                                                     FeatureOptions opt = {}) {
  path.validate();
  const std::size_t n_sacc = path.fixations.size() - 1;
  if (opt.dynamics) {
    require(rec != nullptr, ErrorCode::kChannelUnavailable,
            "channel unavailable: dynamics channels need the raw recording");
    require(path.saccades.size() == n_sacc, ErrorCode::kChannelUnavailable,
            "channel unavailable: scanpath carries no saccade sample ranges");
    require(vigor == nullptr || (std::isfinite(vigor->b_star) && vigor->b_star > 0.0),
            ErrorCode::kInvalidArgument, "vigor fit has no valid global rate");
  }

  std::vector<SaccadeFeatures> out(n_sacc);
  double previous_direction = 0.0;  // first saccade is typed against +x
  for (std::size_t t = 0; t < n_sacc; ++t) {
    const Point& from = path.fixations[t].q;
    const Point& to = path.fixations[t + 1].q;
    SaccadeFeatures& f = out[t];
    f.dx = to.x - from.x;
    f.dy = to.y - from.y;
    f.amplitude = std::hypot(f.dx, f.dy);
    f.duration = path.fixations[t + 1].duration_ms;
    f.direction = direction_degrees(f.dx, f.dy);
    f.type = classify_direction_change(f.direction - previous_direction);
    previous_direction = f.direction;
  }
  if (!opt.dynamics) return out;

  const VelocityTrace vel = compute_velocities(*rec);
  const std::size_t n = rec->samples.size();
  const double rate = rec->sampling_rate_hz;
  for (std::size_t t = 0; t < n_sacc; ++t) {
    SaccadeFeatures& f = out[t];
    const auto [s, e] = path.saccades[t];
    require(e < n && s <= e, ErrorCode::kInvalidArgument, "saccade range outside recording");

    double speed_sum = 0.0;
    double vmx = 0.0, vmy = 0.0;
    for (std::size_t k = s; k <= e; ++k) {
      speed_sum += std::hypot(vel.vx[k], vel.vy[k]);
      vmx = std::max(vmx, std::abs(vel.vx[k]));
      vmy = std::max(vmy, std::abs(vel.vy[k]));
    }
    f.velocity = speed_sum / static_cast<double>(e - s + 1);
    f.v_max_x = vmx;
    f.v_max_y = vmy;

    if (e > s) {
      double acc_sum = 0.0;
      for (std::size_t k = s; k < e; ++k) {
        const double a = std::hypot(vel.vx[k + 1], vel.vy[k + 1]) - std::hypot(vel.vx[k], vel.vy[k]);
        acc_sum += std::abs(a) * rate;
      }
      f.acceleration = acc_sum / static_cast<double>(e - s);
    }

    // Per-axis accelerations taken along the direction of movement, with one
    // sample of margin so the onset of the acceleration phase is included.
    const std::size_t lo = s > 0 ? s - 1 : s;
    const std::size_t hi = std::min(e + 1, n - 1);
    auto ratio = [&](const std::vector<double>& v, double displacement) {
      if (displacement == 0.0 || hi <= lo) return kNaN;
      const double sign = displacement > 0.0 ? 1.0 : -1.0;
      double peak_acc = 0.0, peak_dec = 0.0;
      for (std::size_t k = lo; k < hi; ++k) {
        const double a = sign * (v[k + 1] - v[k]) * rate;
        peak_acc = std::max(peak_acc, a);
        peak_dec = std::max(peak_dec, -a);
      }
      if (peak_acc <= 0.0 || peak_dec <= 0.0) return kNaN;
      return peak_acc / peak_dec;
    };
    f.ratio_x = ratio(vel.vx, f.dx);
    f.ratio_y = ratio(vel.vy, f.dy);

    if (vigor == nullptr) continue;  // vigor channels stay NaN
    auto vigor_of = [&](double vmax, double disp) {
      const double denom = 1.0 - std::exp(-std::abs(disp) / vigor->b_star);
      return denom > 0.0 ? vmax / denom : kNaN;
    };
    f.vigor_x = vigor_of(f.v_max_x, f.dx);
    f.vigor_y = vigor_of(f.v_max_y, f.dy);
  }
  return out;
}

/// (peak speed, amplitude) pairs of a detected scanpath, the input of the
/// vigor rate fit.
inline std::vector<std::pair<double, double>> main_sequence_pairs(const Scanpath& path,
                                                                  const GazeRecording& rec) {
  require(path.saccades.size() + 1 == path.fixations.size(), ErrorCode::kChannelUnavailable,
          "channel unavailable: scanpath carries no saccade sample ranges");
  const VelocityTrace vel = compute_velocities(rec);
  std::vector<std::pair<double, double>> out;
  for (std::size_t t = 0; t < path.saccades.size(); ++t) {
    double vmax = 0.0;
    for (std::size_t k = path.saccades[t].onset; k <= path.saccades[t].offset; ++k) {
      vmax = std::max(vmax, std::hypot(vel.vx[k], vel.vy[k]));
    }
    const Point& a = path.fixations[t].q;
    const Point& b = path.fixations[t + 1].q;
    out.emplace_back(vmax, std::hypot(b.x - a.x, b.y - a.y));
  }
  return out;
}

struct VigorFitOptions {
  double b_min = 0.1;    // deg
  double b_max = 100.0;  // deg
  int max_iterations = 200;
  double tolerance = 1e-10;  // on log(b)
};

namespace detail {

/// Residual sum of squares of v = g (1 - exp(-a / b)) with the shared g
/// profiled out: RSS(b) = sum v^2 - (sum v f)^2 / sum f^2.
inline double vigor_profile_rss(const std::vector<std::pair<double, double>>& pairs, double b) {
  double svv = 0.0, svf = 0.0, sff = 0.0;
  for (const auto& [v, a] : pairs) {
    const double f = 1.0 - std::exp(-a / b);
    svv += v * v;
    svf += v * f;
    sff += f * f;
  }
  return sff > 0.0 ? svv - svf * svf / sff : svv;
}

inline double fit_subject_rate(const std::string& subject,
                               const std::vector<std::pair<double, double>>& pairs,
                               const VigorFitOptions& opt) {
  const double lo = std::log(opt.b_min);
  const double hi = std::log(opt.b_max);
  // Coarse scan to bracket the global minimum, then golden-section refinement.
  constexpr int kScan = 200;
  int best = 0;
  double best_rss = INFINITY;
  for (int i = 0; i <= kScan; ++i) {
    const double rss = vigor_profile_rss(pairs, std::exp(lo + (hi - lo) * i / kScan));
    if (rss < best_rss) {
      best_rss = rss;
      best = i;
    }
  }
  double a = lo + (hi - lo) * std::max(best - 1, 0) / kScan;
  double b = lo + (hi - lo) * std::min(best + 1, kScan) / kScan;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = vigor_profile_rss(pairs, std::exp(c));
  double fd = vigor_profile_rss(pairs, std::exp(d));
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (b - a < opt.tolerance) return std::exp(0.5 * (a + b));
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = vigor_profile_rss(pairs, std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = vigor_profile_rss(pairs, std::exp(d));
    }
  }
  throw Error(ErrorCode::kNonConvergence,
              "vigor rate search for subject '" + subject + "' did not converge after " +
                  std::to_string(opt.max_iterations) + " iterations (bracket [" +
                  std::to_string(std::exp(a)) + ", " + std::to_string(std::exp(b)) + "] deg)");
}

}  // namespace detail

/// Two-step main-sequence fit: one rate per subject by least squares (shared
/// vigor per subject, profiled out), then the global rate is their mean.
/// Per-saccade vigor values are reported at the global rate.
inline VigorFit fit_vigor_rate(
    const std::map<std::string, std::vector<std::pair<double, double>>>& training,
    const VigorFitOptions& opt = {}) {
  require(!training.empty(), ErrorCode::kInsufficientData, "vigor fit needs at least one subject");
  VigorFit fit;
  double sum = 0.0;
  for (const auto& [subject, pairs] : training) {
    require(pairs.size() >= 5, ErrorCode::kInsufficientData,
            "subject '" + subject + "' contributes fewer than 5 saccades to the vigor fit");
    for (const auto& [v, a] : pairs) {
      require(std::isfinite(v) && std::isfinite(a) && a > 0.0, ErrorCode::kInvalidArgument,
              "subject '" + subject + "' has a non-finite or non-positive main-sequence pair");
    }
    const double b = detail::fit_subject_rate(subject, pairs, opt);
    fit.b_per_subject[subject] = b;
    sum += b;
  }
  fit.b_star = sum / static_cast<double>(training.size());
  for (const auto& [subject, pairs] : training) {
    for (const auto& [v, a] : pairs) {
      fit.g_values.push_back(v / (1.0 - std::exp(-a / fit.b_star)));
    }
  }
  return fit;
}

}  // namespace gazeid
