#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gazeid/error.hpp"
#include "gazeid/markov.hpp"
#include "gazeid/parallel.hpp"
#include "gazeid/scenewalk.hpp"

namespace gazeid {

/// Gradient of one scanpath's log-likelihood at the pooled ML parameters.
struct FisherScore {
  std::vector<double> g;
  std::string model_tag;

  std::size_t dim() const { return g.size(); }
};

/// Markov-model scores, one per feature sequence.
inline std::vector<FisherScore> compute_markov_scores(
    std::span<const std::vector<SaccadeFeatures>> items, const MarkovModelParams& model,
    std::size_t threads = 1) {
  std::vector<FisherScore> out(items.size());
  const std::string tag = "markov-" + model.config().name();
  parallel_for(items.size(), threads, [&](std::size_t i) {
    out[i] = {markov_grad_loglik(items[i], model), tag};
  });
  return out;
}

/// SceneWalk scores, one per (scanpath, saliency) trial.
inline std::vector<FisherScore> compute_scenewalk_scores(std::span<const SceneWalkTrial> trials,
                                                         const SceneWalkParams& params,
                                                         std::size_t threads = 1) {
  std::vector<FisherScore> out(trials.size());
  parallel_for(trials.size(), threads, [&](std::size_t i) {
    const auto g = scenewalk_grad_loglik(*trials[i].path, *trials[i].saliency, params);
    out[i] = {{g.begin(), g.end()}, "scenewalk"};
  });
  return out;
}

/// Empirical Fisher information (1/N) sum g g^T with a scale-free ridge, and
/// the Cholesky factor of the regularized matrix.
struct FisherInformation {
  Eigen::MatrixXd information;
  double ridge_epsilon = 1e-3;
  std::size_t count = 0;
  /// Amount added to the diagonal: ridge_epsilon * tr(I) / dim.
  double ridge = 0.0;
  Eigen::MatrixXd factor;  // lower triangular, factor * factor^T = I + ridge * Id

  std::size_t dim() const { return static_cast<std::size_t>(information.rows()); }

  Eigen::MatrixXd regularized() const {
    Eigen::MatrixXd m = information;
    m.diagonal().array() += ridge;
    return m;
  }
};

inline FisherInformation estimate_information(std::span<const FisherScore> scores,
                                              double ridge_epsilon = 1e-3) {
  require(!scores.empty(), ErrorCode::kInsufficientData, "Fisher information needs >= 1 score");
  require(ridge_epsilon > 0.0, ErrorCode::kInvalidArgument, "ridge epsilon must be positive");
  const std::size_t dim = scores.front().dim();
  require(dim > 0, ErrorCode::kDimensionMismatch, "scores must be non-empty vectors");
  FisherInformation info;
  info.ridge_epsilon = ridge_epsilon;
  info.count = scores.size();
  info.information = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                           static_cast<Eigen::Index>(dim));
  // Fixed summation order keeps the reduction reproducible.
  for (const auto& s : scores) {
    require(s.dim() == dim, ErrorCode::kDimensionMismatch,
            "score dimension " + std::to_string(s.dim()) + " != " + std::to_string(dim));
    const Eigen::Map<const Eigen::VectorXd> g(s.g.data(), static_cast<Eigen::Index>(dim));
    require(g.allFinite(), ErrorCode::kNonFinite, "Fisher score has non-finite entries");
    info.information.selfadjointView<Eigen::Lower>().rankUpdate(g);
  }
  info.information = info.information.selfadjointView<Eigen::Lower>();
  info.information /= static_cast<double>(scores.size());

  const double trace = info.information.trace();
  // All-zero scores leave nothing to scale by; fall back to a unit ridge.
  info.ridge = ridge_epsilon * (trace > 0.0 ? trace / static_cast<double>(dim) : 1.0);
  Eigen::LLT<Eigen::MatrixXd> llt(info.regularized());
  require(llt.info() == Eigen::Success, ErrorCode::kNonFinite,
          "regularized Fisher information is not positive definite");
  info.factor = llt.matrixL();
  return info;
}

/// Whitened feature vector phi = factor^{-1} g by forward substitution,
/// optionally scaled to unit length.
inline std::vector<double> feature_map(const FisherScore& score, const FisherInformation& info,
                                       bool l2_normalize = true) {
  const std::size_t dim = info.dim();
  require(score.dim() == dim, ErrorCode::kDimensionMismatch,
          "score dimension " + std::to_string(score.dim()) + " != information dimension " +
              std::to_string(dim));
  std::vector<double> phi(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    double acc = score.g[i];
    for (std::size_t k = 0; k < i; ++k) {
      acc -= info.factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * phi[k];
    }
    const double diag = info.factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    require(diag > 0.0, ErrorCode::kNonFinite, "singular Fisher factor");
    phi[i] = acc / diag;
  }
  if (l2_normalize) {
    double norm = 0.0;
    for (double v : phi) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (double& v : phi) v /= norm;
    }
  }
  return phi;
}

/// g_i^T (I + ridge)^{-1} g_j, computed by a Cholesky solve independent of
/// feature_map(). With normalization this is the cosine in whitened space.
inline double kernel(const FisherScore& a, const FisherScore& b, const FisherInformation& info,
                     bool l2_normalize = true) {
  const auto dim = static_cast<Eigen::Index>(info.dim());
  require(static_cast<Eigen::Index>(a.dim()) == dim && static_cast<Eigen::Index>(b.dim()) == dim,
          ErrorCode::kDimensionMismatch, "score dimension does not match information");
  const Eigen::Map<const Eigen::VectorXd> ga(a.g.data(), dim);
  const Eigen::Map<const Eigen::VectorXd> gb(b.g.data(), dim);
  const Eigen::LLT<Eigen::MatrixXd> llt(info.regularized());
  const Eigen::VectorXd solved_b = llt.solve(gb);
  const double kab = ga.dot(solved_b);
  if (!l2_normalize) return kab;
  const double kaa = ga.dot(llt.solve(ga));
  const double kbb = gb.dot(solved_b);
  if (kaa <= 0.0 || kbb <= 0.0) return 0.0;
  return kab / std::sqrt(kaa * kbb);
}

inline std::vector<std::vector<double>> feature_maps(std::span<const FisherScore> scores,
                                                     const FisherInformation& info,
                                                     bool l2_normalize = true) {
  std::vector<std::vector<double>> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(feature_map(s, info, l2_normalize));
  return out;
}

}  // namespace gazeid
