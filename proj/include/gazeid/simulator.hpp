#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "gazeid/dataset.hpp"
#include "gazeid/features.hpp"
#include "gazeid/markov.hpp"
#include "gazeid/parallel.hpp"
#include "gazeid/random.hpp"
#include "gazeid/scenewalk.hpp"

namespace gazeid {

enum class CohortFamily { kMarkov, kMarkovDynamics, kSceneWalk };

inline std::string to_string(CohortFamily f) {
  switch (f) {
    case CohortFamily::kMarkov: return "markov";
    case CohortFamily::kMarkovDynamics: return "markov-dyn";
    case CohortFamily::kSceneWalk: return "scenewalk";
  }
  return "?";
}

inline CohortFamily cohort_family_from_string(const std::string& s) {
  if (s == "markov") return CohortFamily::kMarkov;
  if (s == "markov-dyn") return CohortFamily::kMarkovDynamics;
  if (s == "scenewalk") return CohortFamily::kSceneWalk;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown model family '" + s + "' (expected markov, markov-dyn or scenewalk)");
}

/// Population-level Markov parameters for synthetic cohorts, all eight
/// channels filled. Values sit in the range of free-viewing data: a few
/// degrees of amplitude, 200-300 ms fixations.
inline MarkovModelParams default_markov_population() {
  MarkovModelParams m;
  m.pi = {{0.45, 0.2, 0.2, 0.15}};
  m.channels.assign(kDynamicsChannels.begin(), kDynamicsChannels.end());
  auto cell = [](std::array<double, 4> a, std::array<double, 4> b) {
    TypeGammas g;
    for (std::size_t u = 0; u < 4; ++u) g[u] = {a[u], b[u]};
    return g;
  };
  m.cells = {
      cell({2.0, 1.8, 1.8, 1.6}, {2.5, 2.2, 2.2, 3.0}),          // amplitude
      cell({3.0, 3.2, 3.2, 2.8}, {90.0, 85.0, 85.0, 100.0}),     // duration
      cell({6.0, 6.0, 6.0, 5.5}, {30.0, 28.0, 28.0, 34.0}),      // velocity
      cell({4.0, 4.0, 4.0, 4.0}, {1500.0, 1400.0, 1400.0, 1600.0}),
      cell({8.0, 8.0, 8.0, 8.0}, {0.15, 0.15, 0.15, 0.15}),      // ratio x
      cell({8.0, 8.0, 8.0, 8.0}, {0.15, 0.15, 0.15, 0.15}),      // ratio y
      cell({10.0, 10.0, 10.0, 10.0}, {40.0, 40.0, 40.0, 40.0}),  // vigor x
      cell({10.0, 10.0, 10.0, 10.0}, {40.0, 40.0, 40.0, 40.0}),  // vigor y
  };
  return m;
}

struct SyntheticCohortSpec {
  std::size_t n_users = 10;
  std::size_t n_images = 40;
  std::size_t T = 30;  // fixations per scanpath
  CohortFamily family = CohortFamily::kMarkov;
  /// Per-user log-normal jitter scale on every positive parameter.
  double delta = 0.3;
  std::uint64_t seed = 1;
  MarkovModelParams markov = default_markov_population();
  SceneWalkParams scenewalk;
  GridSpec grid{32, 32, 48.0, 28.0};
  /// Fixation durations of SceneWalk cohorts (shared by all users).
  GammaParams scenewalk_durations{3.0, 80.0};

  void validate() const {
    require(n_users >= 1, ErrorCode::kInvalidArgument, "cohort needs at least one user");
    require(n_images >= 1, ErrorCode::kInvalidArgument, "cohort needs at least one image");
    require(T >= 2, ErrorCode::kInvalidArgument, "scanpaths need T >= 2");
    require(delta >= 0.0 && std::isfinite(delta), ErrorCode::kInvalidArgument,
            "delta must be finite and >= 0");
    markov.validate();
    scenewalk.validate();
    grid.validate();
    gazeid::validate(scenewalk_durations);
  }
};

inline std::string subject_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%02zu", i + 1);
  return buf;
}

inline std::string image_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img%03zu", i + 1);
  return buf;
}

/// base * exp(delta * N(0, 1)) for every positive parameter; type
/// probabilities are renormalized afterwards.
inline MarkovModelParams jitter_markov(const MarkovModelParams& base, double delta, Rng& rng) {
  MarkovModelParams m = base;
  double total = 0.0;
  for (double& p : m.pi.pi) total += (p *= std::exp(delta * rng.normal()));
  for (double& p : m.pi.pi) p /= total;
  for (auto& tg : m.cells) {
    for (auto& g : tg) {
      g.alpha *= std::exp(delta * rng.normal());
      g.beta *= std::exp(delta * rng.normal());
    }
  }
  return m;
}

/// Same jitter for SceneWalk; zeta lives in (0, 1) so it is jittered on the
/// logit scale.
inline SceneWalkParams jitter_scenewalk(const SceneWalkParams& base, double delta, Rng& rng) {
  auto v = base.to_array();
  const double z = std::clamp(v[kZeta], 1e-9, 1.0 - 1e-9);
  const double logit = std::log(z / (1.0 - z)) + delta * rng.normal();
  v[kZeta] = 1.0 / (1.0 + std::exp(-logit));
  for (std::size_t k = 1; k < kSceneWalkParamCount; ++k) v[k] *= std::exp(delta * rng.normal());
  return SceneWalkParams::from_array(v);
}

/// Saliency built from a few Gaussian blobs over a weak uniform floor.
inline SaliencyMap random_blob_saliency(const GridSpec& grid, Rng& rng) {
  std::vector<double> v(grid.size(), 0.05);
  const std::size_t blobs = 2 + rng.index(4);
  for (std::size_t b = 0; b < blobs; ++b) {
    const Point c{rng.uniform(0.1, 0.9) * grid.width_deg, rng.uniform(0.1, 0.9) * grid.height_deg};
    const double s = rng.uniform(0.04, 0.12) * std::min(grid.width_deg, grid.height_deg) * 2.0;
    const double w = rng.uniform(0.5, 1.5);
    const auto g = gaussian_window(c, s, grid);
    const double peak = 1.0 / (2.0 * kPi * s * s);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += w * g[i] / peak;
  }
  return SaliencyMap::from_values(grid, std::move(v));
}

struct Cohort {
  Dataset data;
  /// Generating parameters per user, in subject order.
  std::vector<MarkovModelParams> markov_users;
  std::vector<SceneWalkParams> scenewalk_users;
};

/// Draws per-user parameters and samples n_images scanpaths per user.
/// Every user views the same images. Deterministic given the seed and
/// independent of the thread count.
inline Cohort generate_cohort(const SyntheticCohortSpec& spec, std::size_t threads = 1) {
  spec.validate();
  Cohort out;
  out.data.grid = spec.grid;
  const bool scenewalk = spec.family == CohortFamily::kSceneWalk;

  Rng image_rng(derive_seed(spec.seed, 0));
  if (scenewalk) {
    for (std::size_t j = 0; j < spec.n_images; ++j) {
      out.data.saliency.emplace(image_name(j), random_blob_saliency(spec.grid, image_rng));
    }
  }

  MarkovModelParams population = spec.markov;
  if (spec.family == CohortFamily::kMarkov) {
    // Base cohorts carry amplitude and duration only.
    MarkovModelParams base;
    base.pi = population.pi;
    base.channels.assign(kBaseChannels.begin(), kBaseChannels.end());
    for (ChannelId c : base.channels) base.cells.push_back(population.cell(c));
    population = base;
  }

  for (std::size_t u = 0; u < spec.n_users; ++u) {
    Rng user_rng(derive_seed(spec.seed, 1000 + u));
    if (scenewalk) {
      out.scenewalk_users.push_back(jitter_scenewalk(spec.scenewalk, spec.delta, user_rng));
    } else {
      out.markov_users.push_back(jitter_markov(population, spec.delta, user_rng));
    }
  }

  const std::size_t n = spec.n_users * spec.n_images;
  out.data.items.resize(n);
  parallel_for(n, threads, [&](std::size_t k) {
    const std::size_t u = k / spec.n_images;
    const std::size_t j = k % spec.n_images;
    Rng rng(derive_seed(derive_seed(spec.seed, 2000 + u), j));
    DatasetItem& item = out.data.items[k];
    item.subject_id = subject_name(u);
    item.image_id = image_name(j);
    const Point centre{spec.grid.width_deg / 2.0, spec.grid.height_deg / 2.0};
    if (scenewalk) {
      const SaliencyMap& h = out.data.saliency.at(item.image_id);
      item.path = sample_scenewalk_scanpath(h, out.scenewalk_users[u], spec.T, centre,
                                            DurationSource{250.0, spec.scenewalk_durations}, rng);
      item.features = extract_features(item.path);
    } else {
      auto s = sample_markov_scanpath(out.markov_users[u], spec.T, centre, rng);
      item.path = std::move(s.path);
      item.features = std::move(s.features);
    }
    item.path.subject_id = item.subject_id;
    item.path.image_id = item.image_id;
  });
  return out;
}

}  // namespace gazeid
