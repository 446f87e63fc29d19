#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gazeid/distributions.hpp"
#include "gazeid/error.hpp"
#include "gazeid/features.hpp"
#include "gazeid/random.hpp"
#include "gazeid/types.hpp"

namespace gazeid {

/// Which Gamma channels the Markov model carries next to the type
/// multinomial.
struct MarkovConfig {
  std::vector<ChannelId> channels;

  static MarkovConfig base() { return {{kBaseChannels.begin(), kBaseChannels.end()}}; }
  static MarkovConfig dynamics() {
    return {{kDynamicsChannels.begin(), kDynamicsChannels.end()}};
  }

  std::string name() const {
    if (std::equal(channels.begin(), channels.end(), kBaseChannels.begin(), kBaseChannels.end()))
      return "base";
    if (std::equal(channels.begin(), channels.end(), kDynamicsChannels.begin(),
                   kDynamicsChannels.end()))
      return "dynamics";
    return "custom";
  }
};

using TypeGammas = std::array<GammaParams, 4>;

struct MarkovModelParams {
  MultinomialParams pi;
  std::vector<ChannelId> channels;
  /// One Gamma per saccade type for each entry of `channels`.
  std::vector<TypeGammas> cells;
  /// Global main-sequence rate used to compute vigor features (deg).
  double vigor_rate = kNaN;

  MarkovConfig config() const { return {channels}; }

  std::size_t block_size() const { return 1 + 2 * channels.size(); }
  std::size_t parameter_count() const { return 4 * block_size(); }

  const TypeGammas& cell(ChannelId c) const {
    for (std::size_t k = 0; k < channels.size(); ++k) {
      if (channels[k] == c) return cells[k];
    }
    throw Error(ErrorCode::kChannelUnavailable,
                "channel '" + std::string(channel_name(c)) + "' is not part of the model");
  }

  void validate() const {
    require(cells.size() == channels.size(), ErrorCode::kInvalidArgument,
            "one Gamma cell set per channel required");
    for (const auto& tg : cells) {
      for (const auto& g : tg) gazeid::validate(g);
    }
    for (double p : pi.pi) {
      require(std::isfinite(p) && p > 0.0, ErrorCode::kInvalidArgument,
              "type probabilities must be positive");
    }
  }
};

/// Parameter vector in gradient layout: for each type u the block
/// [pi_u, alpha_u^c1, beta_u^c1, alpha_u^c2, beta_u^c2, ...].
inline std::vector<double> to_vector(const MarkovModelParams& m) {
  std::vector<double> theta;
  theta.reserve(m.parameter_count());
  for (std::size_t u = 0; u < 4; ++u) {
    theta.push_back(m.pi.pi[u]);
    for (const auto& tg : m.cells) {
      theta.push_back(tg[u].alpha);
      theta.push_back(tg[u].beta);
    }
  }
  return theta;
}

inline MarkovModelParams from_vector(const MarkovModelParams& shape, std::span<const double> theta) {
  require(theta.size() == shape.parameter_count(), ErrorCode::kDimensionMismatch,
          "parameter vector length does not match model layout");
  MarkovModelParams m = shape;
  std::size_t i = 0;
  for (std::size_t u = 0; u < 4; ++u) {
    m.pi.pi[u] = theta[i++];
    for (auto& tg : m.cells) {
      tg[u].alpha = theta[i++];
      tg[u].beta = theta[i++];
    }
  }
  return m;
}

struct MarkovFitReport {
  /// "channel/type" cells that fell back to the pooled fit of their channel.
  std::vector<std::string> pooled_fallbacks;
  std::array<double, 4> type_counts{};
};

/// Factorized maximum likelihood: type probabilities from pooled type counts,
/// every (channel, type) Gamma from the pooled values of that cell.
inline MarkovModelParams fit_markov(std::span<const std::vector<SaccadeFeatures>> data,
                                    const MarkovConfig& config,
                                    MarkovFitReport* report = nullptr) {
  MarkovFitReport local;
  MarkovFitReport& rep = report ? *report : local;
  rep = {};

  TypeCounts counts{};
  const std::size_t nc = config.channels.size();
  std::vector<std::array<std::vector<double>, 4>> values(nc);
  for (const auto& path : data) {
    for (const auto& f : path) {
      const std::size_t u = type_index(f.type);
      counts[u] += 1.0;
      for (std::size_t c = 0; c < nc; ++c) {
        const double x = f.channel(config.channels[c]);
        if (usable(x)) values[c][u].push_back(x);
      }
    }
  }
  rep.type_counts = counts;

  MarkovModelParams m;
  m.channels = config.channels;
  m.pi = multinomial_mle(counts);
  m.cells.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const std::string name(channel_name(config.channels[c]));
    std::vector<double> pooled;
    for (const auto& v : values[c]) pooled.insert(pooled.end(), v.begin(), v.end());
    GammaParams pooled_fit{};
    bool have_pooled = false;
    for (std::size_t u = 0; u < 4; ++u) {
      try {
        m.cells[c][u] = gamma_mle(values[c][u]);
        continue;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateSample) throw;
      }
      if (!have_pooled) {
        try {
          pooled_fit = gamma_mle(pooled);
        } catch (const Error&) {
          throw Error(ErrorCode::kInsufficientData,
                      "channel '" + name + "' has too few usable values to fit");
        }
        have_pooled = true;
      }
      m.cells[c][u] = pooled_fit;
      rep.pooled_fallbacks.push_back(name + "/" + std::to_string(u + 1));
    }
  }
  return m;
}

struct LoglikDiagnostics {
  /// Channel terms skipped because the value was non-positive or undefined.
  std::size_t skipped_values = 0;
};

/// Log-likelihood of a feature sequence, without the parameter-free
/// multinomial coefficient.
inline double markov_loglik(std::span<const SaccadeFeatures> features, const MarkovModelParams& m,
                            LoglikDiagnostics* diag = nullptr) {
  require(!features.empty(), ErrorCode::kInvalidArgument, "loglik needs at least one saccade");
  double ll = 0.0;
  std::size_t skipped = 0;
  for (const auto& f : features) {
    const std::size_t u = type_index(f.type);
    ll += std::log(m.pi.pi[u]);
    for (std::size_t c = 0; c < m.channels.size(); ++c) {
      const double x = f.channel(m.channels[c]);
      if (!usable(x)) {
        ++skipped;
        continue;
      }
      ll += gamma_logpdf(x, m.cells[c][u]);
    }
  }
  if (diag) diag->skipped_values = skipped;
  return ll;
}

/// Fisher score of a feature sequence in the layout of to_vector().
inline std::vector<double> markov_grad_loglik(std::span<const SaccadeFeatures> features,
                                              const MarkovModelParams& m,
                                              LoglikDiagnostics* diag = nullptr) {
  require(!features.empty(), ErrorCode::kInvalidArgument, "gradient needs at least one saccade");
  const std::size_t nc = m.channels.size();
  const std::size_t block = m.block_size();
  std::vector<double> g(m.parameter_count(), 0.0);
  TypeCounts counts{};
  // Per (type, channel): count of usable values, sum ln x, sum x.
  std::vector<std::array<double, 3>> acc(4 * nc, {0.0, 0.0, 0.0});
  std::size_t skipped = 0;
  for (const auto& f : features) {
    const std::size_t u = type_index(f.type);
    counts[u] += 1.0;
    for (std::size_t c = 0; c < nc; ++c) {
      const double x = f.channel(m.channels[c]);
      if (!usable(x)) {
        ++skipped;
        continue;
      }
      auto& a = acc[u * nc + c];
      a[0] += 1.0;
      a[1] += std::log(x);
      a[2] += x;
    }
  }
  for (std::size_t u = 0; u < 4; ++u) {
    g[u * block] = counts[u] / m.pi.pi[u];
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& a = acc[u * nc + c];
      const GammaParams& p = m.cells[c][u];
      const std::size_t at = u * block + 1 + 2 * c;
      if (a[0] == 0.0) continue;
      g[at] = a[1] - a[0] * (digamma(p.alpha) + std::log(p.beta));
      g[at + 1] = (a[2] / p.beta - a[0] * p.alpha) / p.beta;
    }
  }
  if (diag) diag->skipped_values = skipped;
  return g;
}

struct MarkovSample {
  Scanpath path;
  std::vector<SaccadeFeatures> features;
};

/// Generative process: per saccade draw a type, then every enabled channel
/// from its type's Gamma. Positions follow by turning the previous direction
/// by an angle uniform within the type's bin and stepping by the amplitude.
inline MarkovSample sample_markov_scanpath(const MarkovModelParams& m, std::size_t T, Point start,
                                           Rng& rng) {
  require(T >= 2, ErrorCode::kInvalidArgument, "sampled scanpath needs T >= 2");
  m.validate();
  // Keeps drawn turns strictly inside their bin so re-typing is exact.
  constexpr double kBinMargin = 1e-6;
  constexpr double kDefaultDurationMs = 250.0;
  const bool has_duration = std::find(m.channels.begin(), m.channels.end(),
                                      ChannelId::kDuration) != m.channels.end();

  MarkovSample out;
  double first_duration = kDefaultDurationMs;
  if (has_duration) {
    const GammaParams& d = m.cell(ChannelId::kDuration)[0];
    first_duration = rng.gamma(d.alpha, d.beta);
  }
  out.path.fixations.push_back({start, first_duration});
  double direction = 0.0;
  Point q = start;
  for (std::size_t t = 0; t + 1 < T; ++t) {
    SaccadeFeatures f;
    const std::size_t u = multinomial_sample(m.pi, rng);
    f.type = type_from_index(u);
    const auto [lo, hi] = type_bin(f.type);
    const double turn = rng.uniform(lo + kBinMargin, hi - kBinMargin);
    direction = wrap_degrees(direction + turn);
    for (std::size_t c = 0; c < m.channels.size(); ++c) {
      const GammaParams& p = m.cells[c][u];
      f.channel(m.channels[c]) = rng.gamma(p.alpha, p.beta);
    }
    if (!usable(f.amplitude)) f.amplitude = 1.0;
    if (!usable(f.duration)) f.duration = kDefaultDurationMs;
    const double rad = direction * kPi / 180.0;
    f.dx = f.amplitude * std::cos(rad);
    f.dy = f.amplitude * std::sin(rad);
    f.direction = direction;
    q = {q.x + f.dx, q.y + f.dy};
    out.path.fixations.push_back({q, f.duration});
    out.features.push_back(f);
  }
  return out;
}

inline MarkovSample sample_markov_scanpath(const MarkovModelParams& m, std::size_t T, Point start,
                                           std::uint64_t seed) {
  Rng rng(seed);
  return sample_markov_scanpath(m, T, start, rng);
}

/// Generative identification: the user whose model gives the summed
/// log-likelihood over all test scanpaths its maximum. Ties go to the lower
/// index.
inline std::size_t bayes_identify(std::span<const std::vector<SaccadeFeatures>> test,
                                  std::span<const MarkovModelParams> users) {
  require(!users.empty(), ErrorCode::kInvalidArgument, "identification needs at least one user");
  std::size_t best = 0;
  double best_ll = -INFINITY;
  for (std::size_t y = 0; y < users.size(); ++y) {
    double ll = 0.0;
    for (const auto& f : test) ll += markov_loglik(f, users[y]);
    if (ll > best_ll) {
      best_ll = ll;
      best = y;
    }
  }
  return best;
}

}  // namespace gazeid
