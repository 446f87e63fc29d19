#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gazeid/error.hpp"
#include "gazeid/types.hpp"

namespace gazeid {

/// Regular grid of cells spanning [0, width] x [0, height] degrees, stored
/// row-major with rows along y.
struct GridSpec {
  std::size_t rows = 128;
  std::size_t cols = 128;
  double width_deg = 48.0;
  double height_deg = 28.0;

  std::size_t size() const { return rows * cols; }
  double cell_width() const { return width_deg / static_cast<double>(cols); }
  double cell_height() const { return height_deg / static_cast<double>(rows); }
  double x_center(std::size_t col) const { return (static_cast<double>(col) + 0.5) * cell_width(); }
  double y_center(std::size_t row) const { return (static_cast<double>(row) + 0.5) * cell_height(); }

  Point center(std::size_t cell) const { return {x_center(cell % cols), y_center(cell / cols)}; }

  /// Nearest cell; positions outside the extent are clamped and flagged.
  std::size_t cell_of(Point q, bool* clamped = nullptr) const {
    auto axis = [](double v, double step, std::size_t n, bool& out) {
      double k = std::floor(v / step);
      if (!(k >= 0.0)) {
        out = true;
        return std::size_t{0};
      }
      if (k > static_cast<double>(n - 1)) {
        out = true;
        return n - 1;
      }
      return static_cast<std::size_t>(k);
    };
    bool out = false;
    const std::size_t c = axis(q.x, cell_width(), cols, out);
    const std::size_t r = axis(q.y, cell_height(), rows, out);
    if (clamped) *clamped = out;
    return r * cols + c;
  }

  void validate() const {
    require(rows > 0 && cols > 0 && width_deg > 0.0 && height_deg > 0.0,
            ErrorCode::kInvalidArgument, "grid needs positive shape and extent");
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline constexpr double kSaliencyFloor = 1e-12;

/// Normalizes to unit sum with every entry at least `floor`.
inline void normalize_with_floor(std::vector<double>& v, double floor) {
  double total = 0.0;
  for (double x : v) total += x;
  require(total > 0.0 && std::isfinite(total), ErrorCode::kNonFinite,
          "cannot normalize a map with zero or non-finite mass");
  for (double& x : v) x /= total;
  std::vector<char> pinned(v.size(), 0);
  for (int round = 0; round < 8; ++round) {
    double pinned_mass = 0.0, free_mass = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (pinned[i] || v[i] < floor) {
        pinned[i] = 1;
        v[i] = floor;
        pinned_mass += floor;
      } else {
        free_mass += v[i];
      }
    }
    if (free_mass <= 0.0) break;
    const double scale = (1.0 - pinned_mass) / free_mass;
    bool changed = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!pinned[i]) {
        v[i] *= scale;
        changed = changed || v[i] < floor;
      }
    }
    if (!changed) break;
  }
}

struct SaliencyMap {
  GridSpec grid;
  std::vector<double> h;

  double at(std::size_t row, std::size_t col) const { return h[row * grid.cols + col]; }

  static SaliencyMap uniform(const GridSpec& grid) {
    return {grid, std::vector<double>(grid.size(), 1.0 / static_cast<double>(grid.size()))};
  }

  static SaliencyMap from_values(const GridSpec& grid, std::vector<double> values) {
    grid.validate();
    require(values.size() == grid.size(), ErrorCode::kDimensionMismatch,
            "saliency values do not match grid shape");
    for (double x : values) {
      require(std::isfinite(x) && x >= 0.0, ErrorCode::kInvalidArgument,
              "saliency values must be finite and non-negative");
    }
    normalize_with_floor(values, kSaliencyFloor);
    return {grid, std::move(values)};
  }
};

namespace detail {

/// exp(-(v - c)^2 / (2 s^2)) at every cell center along one axis.
inline std::vector<double> axis_gaussian(std::size_t n, double step, double c, double s) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double d = (static_cast<double>(k) + 0.5) * step - c;
    out[k] = std::exp(-d * d / (2.0 * s * s));
  }
  return out;
}

}  // namespace detail

/// Isotropic Gaussian exp(-r^2 / (2 sigma^2)) / (2 pi sigma^2) evaluated at
/// cell centers, with r the distance to `center` in degrees.
inline std::vector<double> gaussian_window(Point center, double sigma, const GridSpec& grid) {
  require(sigma > 0.0, ErrorCode::kInvalidArgument, "gaussian window needs sigma > 0");
  const auto gx = detail::axis_gaussian(grid.cols, grid.cell_width(), center.x, sigma);
  const auto gy = detail::axis_gaussian(grid.rows, grid.cell_height(), center.y, sigma);
  const double norm = 1.0 / (2.0 * kPi * sigma * sigma);
  std::vector<double> out(grid.size());
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) out[r * grid.cols + c] = norm * gy[r] * gx[c];
  }
  return out;
}

/// Kernel density estimate of fixation positions with Scott's-rule
/// bandwidth h_k = sd_k * n^(-1/6) per axis, floored and normalized.
inline SaliencyMap estimate_saliency(std::span<const Point> fixations, const GridSpec& grid) {
  grid.validate();
  require(fixations.size() >= 2, ErrorCode::kInsufficientData,
          "saliency estimate needs at least 2 fixations");
  const double n = static_cast<double>(fixations.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : fixations) {
    mx += p.x;
    my += p.y;
  }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0;
  for (const auto& p : fixations) {
    vx += (p.x - mx) * (p.x - mx);
    vy += (p.y - my) * (p.y - my);
  }
  const double sx = std::sqrt(vx / (n - 1.0));
  const double sy = std::sqrt(vy / (n - 1.0));
  require(sx > 0.0 || sy > 0.0, ErrorCode::kDegenerateSample,
          "saliency estimate on coincident fixations");
  const double scott = std::pow(n, -1.0 / 6.0);
  // A degenerate axis still needs a usable kernel width.
  const double hx = std::max(sx * scott, 0.5 * grid.cell_width());
  const double hy = std::max(sy * scott, 0.5 * grid.cell_height());

  std::vector<double> density(grid.size(), 0.0);
  for (const auto& p : fixations) {
    const auto gx = detail::axis_gaussian(grid.cols, grid.cell_width(), p.x, hx);
    const auto gy = detail::axis_gaussian(grid.rows, grid.cell_height(), p.y, hy);
    for (std::size_t r = 0; r < grid.rows; ++r) {
      double* row = density.data() + r * grid.cols;
      for (std::size_t c = 0; c < grid.cols; ++c) row[c] += gy[r] * gx[c];
    }
  }
  for (double& v : density) v = std::max(v, 0.0);
  normalize_with_floor(density, kSaliencyFloor);
  return {grid, std::move(density)};
}

}  // namespace gazeid
