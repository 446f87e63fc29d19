#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gazeid/error.hpp"
#include "gazeid/types.hpp"

namespace gazeid {

struct DetectionOptions {
  double vel_threshold_multiplier = 6.0;
  double min_saccade_duration_ms = 6.0;
  /// Lower bound on the median-based velocity spread (deg/s); only matters for
  /// noiseless input where the spread is exactly zero.
  double min_velocity_sd = 1e-9;
};

struct VelocityTrace {
  std::vector<double> vx;  // deg/s
  std::vector<double> vy;
};

/// Velocities from a 5-point moving window over positions, i.e.
/// v_n = (x_{n+2} + x_{n+1} - x_{n-1} - x_{n-2}) * rate / 6, falling back to
/// central and then one-sided differences at the edges.
inline VelocityTrace compute_velocities(const GazeRecording& rec) {
  const auto& s = rec.samples;
  const std::size_t n = s.size();
  const double rate = rec.sampling_rate_hz;
  VelocityTrace v{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  if (n < 2) return v;
  auto velocity = [&](auto coord, std::size_t i) {
    if (i >= 2 && i + 2 < n) {
      return (coord(i + 2) + coord(i + 1) - coord(i - 1) - coord(i - 2)) * rate / 6.0;
    }
    if (i >= 1 && i + 1 < n) return (coord(i + 1) - coord(i - 1)) * rate / 2.0;
    if (i == 0) return (coord(1) - coord(0)) * rate;
    return (coord(n - 1) - coord(n - 2)) * rate;
  };
  auto xs = [&](std::size_t i) { return s[i].x_deg; };
  auto ys = [&](std::size_t i) { return s[i].y_deg; };
  for (std::size_t i = 0; i < n; ++i) {
    v.vx[i] = velocity(xs, i);
    v.vy[i] = velocity(ys, i);
  }
  return v;
}

namespace detail {

inline double median(std::vector<double> values) {
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  double m = *mid;
  if (n % 2 == 0) {
    m = 0.5 * (m + *std::max_element(values.begin(), mid));
  }
  return m;
}

/// sqrt(median(v^2) - median(v)^2)
inline double median_sd(const std::vector<double>& v) {
  std::vector<double> sq(v.size());
  std::transform(v.begin(), v.end(), sq.begin(), [](double a) { return a * a; });
  const double m = median(v);
  return std::sqrt(std::max(median(std::move(sq)) - m * m, 0.0));
}

}  // namespace detail

/// Velocity-threshold saccade detection with per-axis adaptive thresholds and
/// an elliptic criterion. Inter-saccade intervals become fixations.
inline Scanpath detect_saccades(const GazeRecording& rec, const DetectionOptions& opt = {}) {
  rec.validate();
  require(opt.vel_threshold_multiplier > 0.0, ErrorCode::kInvalidArgument,
          "velocity threshold multiplier must be positive");
  const std::size_t n = rec.samples.size();
  const VelocityTrace v = compute_velocities(rec);
  const double eta_x =
      opt.vel_threshold_multiplier * std::max(detail::median_sd(v.vx), opt.min_velocity_sd);
  const double eta_y =
      opt.vel_threshold_multiplier * std::max(detail::median_sd(v.vy), opt.min_velocity_sd);

  const double sample_ms = 1000.0 / rec.sampling_rate_hz;
  std::vector<SaccadeInterval> runs;
  std::size_t i = 0;
  while (i < n) {
    auto above = [&](std::size_t k) {
      const double rx = v.vx[k] / eta_x;
      const double ry = v.vy[k] / eta_y;
      return rx * rx + ry * ry > 1.0;
    };
    if (!above(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && above(j + 1)) ++j;
    if (static_cast<double>(j - i + 1) * sample_ms >= opt.min_saccade_duration_ms) {
      runs.push_back({i, j});
    }
    i = j + 1;
  }
  // A saccade must be bracketed by fixation samples on both sides.
  if (!runs.empty() && runs.front().onset == 0) runs.erase(runs.begin());
  if (!runs.empty() && runs.back().offset == n - 1) runs.pop_back();

  Scanpath path;
  path.subject_id = rec.subject_id;
  path.image_id = rec.image_id;
  path.saccades = runs;
  std::size_t start = 0;
  auto close_fixation = [&](std::size_t first, std::size_t last_exclusive) {
    Point mean;
    for (std::size_t k = first; k < last_exclusive; ++k) {
      mean.x += rec.samples[k].x_deg;
      mean.y += rec.samples[k].y_deg;
    }
    const double count = static_cast<double>(last_exclusive - first);
    mean.x /= count;
    mean.y /= count;
    path.fixations.push_back({mean, count * sample_ms});
  };
  for (const auto& run : runs) {
    close_fixation(start, run.onset);
    start = run.offset + 1;
  }
  close_fixation(start, n);

  require(path.fixations.size() >= 2, ErrorCode::kDegenerateRecording,
          "degenerate recording: fewer than 2 fixations detected");
  return path;
}

}  // namespace gazeid
