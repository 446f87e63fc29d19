#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gazeid/error.hpp"

namespace gazeid {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kPi = 3.14159265358979323846;

/// Position in degrees of visual angle.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct GazeSample {
  double t_ms = 0.0;
  double x_deg = 0.0;
  double y_deg = 0.0;
};

struct GazeRecording {
  std::vector<GazeSample> samples;
  double sampling_rate_hz = 1000.0;
  std::string subject_id;
  std::string image_id;

  void validate() const {
    require(sampling_rate_hz > 0.0, ErrorCode::kInvalidArgument,
            "sampling rate must be positive");
    require(samples.size() >= 3, ErrorCode::kInvalidArgument,
            "recording needs at least 3 samples");
    for (std::size_t i = 1; i < samples.size(); ++i) {
      require(samples[i].t_ms > samples[i - 1].t_ms, ErrorCode::kInvalidArgument,
              "timestamps must be strictly increasing (sample " + std::to_string(i) + ")");
    }
  }
};

/// Inclusive sample-index range of one detected saccade.
struct SaccadeInterval {
  std::size_t onset = 0;
  std::size_t offset = 0;
};

struct Fixation {
  Point q;
  double duration_ms = 0.0;
};

struct Scanpath {
  std::vector<Fixation> fixations;
  std::string subject_id;
  std::string image_id;
  /// Sample ranges of the saccades between consecutive fixations; filled only
  /// when the scanpath came out of saccade detection.
  std::vector<SaccadeInterval> saccades;

  std::size_t size() const { return fixations.size(); }

  void validate() const {
    require(fixations.size() >= 2, ErrorCode::kInvalidArgument,
            "scanpath needs at least 2 fixations");
    for (std::size_t i = 0; i < fixations.size(); ++i) {
      require(fixations[i].duration_ms > 0.0, ErrorCode::kInvalidArgument,
              "fixation " + std::to_string(i) + " has non-positive duration");
    }
  }
};

enum class SaccadeType : int { kMaintain = 1, kRight = 2, kLeft = 3, kReverse = 4 };

inline constexpr std::size_t kNumSaccadeTypes = 4;

inline std::size_t type_index(SaccadeType u) { return static_cast<std::size_t>(u) - 1; }
inline SaccadeType type_from_index(std::size_t i) { return static_cast<SaccadeType>(i + 1); }

/// Per-saccade Gamma-modelled channels.
enum class ChannelId : int {
  kAmplitude = 0,
  kDuration,
  kVelocity,
  kAcceleration,
  kRatioX,
  kRatioY,
  kVigorX,
  kVigorY,
};

inline constexpr std::array<ChannelId, 2> kBaseChannels = {ChannelId::kAmplitude,
                                                           ChannelId::kDuration};
inline constexpr std::array<ChannelId, 8> kDynamicsChannels = {
    ChannelId::kAmplitude, ChannelId::kDuration, ChannelId::kVelocity, ChannelId::kAcceleration,
    ChannelId::kRatioX,    ChannelId::kRatioY,   ChannelId::kVigorX,   ChannelId::kVigorY};

inline std::string_view channel_name(ChannelId c) {
  switch (c) {
    case ChannelId::kAmplitude: return "amplitude";
    case ChannelId::kDuration: return "duration";
    case ChannelId::kVelocity: return "velocity";
    case ChannelId::kAcceleration: return "acceleration";
    case ChannelId::kRatioX: return "ratio_x";
    case ChannelId::kRatioY: return "ratio_y";
    case ChannelId::kVigorX: return "vigor_x";
    case ChannelId::kVigorY: return "vigor_y";
  }
  return "unknown";
}

inline ChannelId channel_from_name(std::string_view name) {
  for (ChannelId c : kDynamicsChannels) {
    if (channel_name(c) == name) return c;
  }
  throw Error(ErrorCode::kParse, "unknown channel '" + std::string(name) + "'");
}

/// Everything measured about one saccade. Channels that could not be computed
/// hold NaN and are skipped by the models.
struct SaccadeFeatures {
  SaccadeType type = SaccadeType::kMaintain;
  double amplitude = kNaN;     // deg
  double duration = kNaN;      // ms, duration of the fixation that follows
  double velocity = kNaN;      // deg/s, mean speed
  double acceleration = kNaN;  // deg/s^2, mean |d speed / dt|
  double ratio_x = kNaN;
  double ratio_y = kNaN;
  double vigor_x = kNaN;       // deg/s
  double vigor_y = kNaN;       // deg/s
  double v_max_x = kNaN;       // deg/s
  double v_max_y = kNaN;       // deg/s
  double direction = kNaN;     // deg in (-180, 180]
  double dx = kNaN;            // deg, signed displacement
  double dy = kNaN;

  double channel(ChannelId c) const {
    switch (c) {
      case ChannelId::kAmplitude: return amplitude;
      case ChannelId::kDuration: return duration;
      case ChannelId::kVelocity: return velocity;
      case ChannelId::kAcceleration: return acceleration;
      case ChannelId::kRatioX: return ratio_x;
      case ChannelId::kRatioY: return ratio_y;
      case ChannelId::kVigorX: return vigor_x;
      case ChannelId::kVigorY: return vigor_y;
    }
    return kNaN;
  }

  double& channel(ChannelId c) {
    switch (c) {
      case ChannelId::kAmplitude: return amplitude;
      case ChannelId::kDuration: return duration;
      case ChannelId::kVelocity: return velocity;
      case ChannelId::kAcceleration: return acceleration;
      case ChannelId::kRatioX: return ratio_x;
      case ChannelId::kRatioY: return ratio_y;
      case ChannelId::kVigorX: return vigor_x;
      case ChannelId::kVigorY: return vigor_y;
    }
    throw Error(ErrorCode::kInvalidArgument, "bad channel id");
  }
};

/// A channel value enters a likelihood only if it is finite and positive.
inline bool usable(double value) { return std::isfinite(value) && value > 0.0; }

struct VigorFit {
  std::map<std::string, double> b_per_subject;
  double b_star = kNaN;
  std::vector<double> g_values;
};

}  // namespace gazeid
