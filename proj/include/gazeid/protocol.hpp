#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gazeid/classify.hpp"
#include "gazeid/dataset.hpp"
#include "gazeid/fisher.hpp"
#include "gazeid/markov.hpp"
#include "gazeid/parallel.hpp"
#include "gazeid/random.hpp"
#include "gazeid/scenewalk.hpp"

namespace gazeid {

enum class ModelFamily {
  kBayesMarkov,
  kBayesMarkovDyn,
  kBayesSceneWalk,
  kFisherSvmMarkov,
  kFisherSvmMarkovDyn,
  kFisherSvmSceneWalk,
};

inline std::string to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::kBayesMarkov: return "bayes-markov";
    case ModelFamily::kBayesMarkovDyn: return "bayes-markov-dyn";
    case ModelFamily::kBayesSceneWalk: return "bayes-scenewalk";
    case ModelFamily::kFisherSvmMarkov: return "fisher-svm-markov";
    case ModelFamily::kFisherSvmMarkovDyn: return "fisher-svm-markov-dyn";
    case ModelFamily::kFisherSvmSceneWalk: return "fisher-svm-scenewalk";
  }
  return "?";
}

/// Family from the --classifier and --model flag values.
inline ModelFamily model_family(const std::string& classifier, const std::string& model) {
  const bool bayes = classifier == "bayes";
  require(bayes || classifier == "fisher-svm", ErrorCode::kInvalidArgument,
          "unknown classifier '" + classifier + "' (expected bayes or fisher-svm)");
  if (model == "markov") return bayes ? ModelFamily::kBayesMarkov : ModelFamily::kFisherSvmMarkov;
  if (model == "markov-dyn")
    return bayes ? ModelFamily::kBayesMarkovDyn : ModelFamily::kFisherSvmMarkovDyn;
  if (model == "scenewalk")
    return bayes ? ModelFamily::kBayesSceneWalk : ModelFamily::kFisherSvmSceneWalk;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown model '" + model + "' (expected markov, markov-dyn or scenewalk)");
}

inline bool is_bayes(ModelFamily f) {
  return f == ModelFamily::kBayesMarkov || f == ModelFamily::kBayesMarkovDyn ||
         f == ModelFamily::kBayesSceneWalk;
}

inline bool is_scenewalk(ModelFamily f) {
  return f == ModelFamily::kBayesSceneWalk || f == ModelFamily::kFisherSvmSceneWalk;
}

inline MarkovConfig markov_config(ModelFamily f) {
  return f == ModelFamily::kBayesMarkovDyn || f == ModelFamily::kFisherSvmMarkovDyn
             ? MarkovConfig::dynamics()
             : MarkovConfig::base();
}

struct EvalProtocol {
  double train_fraction = 0.5;
  std::size_t n_splits = 5;
  std::size_t cv_folds = 3;
  std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  std::vector<double> ridge_grid{1e-3, 1e-2};
  std::vector<bool> normalize_grid{true, false};
  std::size_t max_k = 10;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  SceneWalkParams scenewalk_init;
  SceneWalkFitOptions scenewalk_fit{.rho = 0.01, .max_iterations = 200};

  void validate() const {
    require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::kInvalidArgument,
            "train_fraction must be in (0, 1)");
    require(n_splits >= 1, ErrorCode::kInvalidArgument, "n_splits must be >= 1");
    require(cv_folds >= 2, ErrorCode::kInvalidArgument, "cv_folds must be >= 2");
    require(!c_grid.empty() && !ridge_grid.empty() && !normalize_grid.empty(),
            ErrorCode::kInvalidArgument, "hyperparameter grids must be non-empty");
    for (double c : c_grid) require(c > 0.0, ErrorCode::kInvalidArgument, "C values must be > 0");
    for (double r : ridge_grid)
      require(r > 0.0, ErrorCode::kInvalidArgument, "ridge values must be > 0");
    require(max_k >= 1, ErrorCode::kInvalidArgument, "max_k must be >= 1");
  }
};

struct Hyperparams {
  double C = 0.0;
  double ridge_epsilon = 0.0;
  bool normalize = true;
  double cv_accuracy = 0.0;
};

struct CurvePoint {
  std::size_t k = 0;
  double mean_acc = 0.0;
  double stderr_acc = 0.0;
};

struct SplitResult {
  std::size_t index = 0;
  /// Train and test image ids per subject, in subject order.
  std::vector<std::vector<std::string>> train_images;
  std::vector<std::vector<std::string>> test_images;
  /// Accuracy per k = 1..; a k without any complete group is absent.
  std::vector<double> accuracy;
  std::vector<std::size_t> groups;  // evaluation units per k
  std::optional<Hyperparams> hyperparams;
};

struct ProtocolResult {
  ModelFamily family{};
  std::vector<std::string> subjects;
  std::vector<SplitResult> splits;
  std::vector<CurvePoint> curve;
  std::vector<std::string> warnings;
};

namespace detail {

struct Split {
  std::vector<std::vector<std::size_t>> train;  // item indices per subject
  std::vector<std::vector<std::size_t>> test;
};

inline Split make_split(const Dataset& data, const std::vector<std::string>& subjects,
                        const EvalProtocol& proto, std::uint64_t seed) {
  const auto by_subject = data.items_by_subject();
  Split s;
  for (std::size_t y = 0; y < by_subject.size(); ++y) {
    auto items = by_subject[y];
    Rng rng(derive_seed(seed, y));
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.index(i)]);
    const auto n_train = static_cast<std::size_t>(
        std::llround(proto.train_fraction * static_cast<double>(items.size())));
    require(n_train >= 1 && n_train < items.size(), ErrorCode::kInsufficientData,
            "subject '" + subjects[y] + "' has " + std::to_string(items.size()) +
                " images, too few for a train/test split");
    s.train.emplace_back(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end());

    std::set<std::string> train_images;
    for (std::size_t i : s.train.back()) train_images.insert(data.items[i].image_id);
    for (std::size_t i : s.test.back()) {
      require(!train_images.count(data.items[i].image_id), ErrorCode::kInvalidArgument,
              "image '" + data.items[i].image_id + "' of subject '" + subjects[y] +
                  "' is in both train and test");
    }
  }
  return s;
}

/// Accuracy per k from a per-item class-score matrix: each subject's test
/// items are cut into disjoint consecutive groups of k, scores are summed
/// within a group and the argmax is the prediction.
inline void accuracy_curve(const std::vector<std::vector<std::size_t>>& test,
                           const std::map<std::size_t, std::vector<double>>& scores,
                           std::size_t max_k, SplitResult& out) {
  for (std::size_t k = 1; k <= max_k; ++k) {
    std::size_t total = 0, correct = 0;
    for (std::size_t y = 0; y < test.size(); ++y) {
      const auto& items = test[y];
      for (std::size_t g = 0; g + k <= items.size(); g += k) {
        std::vector<double> sum(scores.at(items[g]).size(), 0.0);
        for (std::size_t j = g; j < g + k; ++j) {
          const auto& s = scores.at(items[j]);
          for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += s[c];
        }
        ++total;
        correct += argmax_first(sum) == y ? 1 : 0;
      }
    }
    if (total == 0) break;
    out.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(total));
    out.groups.push_back(total);
  }
}

/// Saliency for an image: the dataset's map, else an estimate from the given
/// training fixations on that image, else uniform.
inline std::map<std::string, SaliencyMap> saliency_for(const Dataset& data,
                                                       const std::vector<std::size_t>& train_items) {
  std::map<std::string, SaliencyMap> out = data.saliency;
  std::map<std::string, std::vector<Point>> fixations;
  for (std::size_t i : train_items) {
    for (const auto& f : data.items[i].path.fixations) {
      fixations[data.items[i].image_id].push_back(f.q);
    }
  }
  std::set<std::string> images;
  for (const auto& it : data.items) images.insert(it.image_id);
  for (const auto& image : images) {
    if (out.count(image)) continue;
    auto fx = fixations.find(image);
    if (fx != fixations.end() && fx->second.size() >= 2) {
      try {
        out.emplace(image, estimate_saliency(fx->second, data.grid));
        continue;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateSample) throw;
      }
    }
    out.emplace(image, SaliencyMap::uniform(data.grid));
  }
  return out;
}

inline std::vector<FisherScore> pooled_scores(const Dataset& data, ModelFamily family,
                                              const std::vector<std::size_t>& train_items,
                                              const EvalProtocol& proto,
                                              const std::map<std::string, SaliencyMap>& saliency) {
  const std::size_t n = data.items.size();
  if (is_scenewalk(family)) {
    std::vector<SceneWalkTrial> train, all(n);
    for (std::size_t i = 0; i < n; ++i) {
      all[i] = {&data.items[i].path, &saliency.at(data.items[i].image_id)};
    }
    for (std::size_t i : train_items) train.push_back(all[i]);
    auto opt = proto.scenewalk_fit;
    opt.threads = proto.threads;
    const auto fit = fit_scenewalk(train, proto.scenewalk_init, opt);
    return compute_scenewalk_scores(all, fit.params, proto.threads);
  }
  std::vector<std::vector<SaccadeFeatures>> train;
  for (std::size_t i : train_items) train.push_back(data.items[i].features);
  const auto model = fit_markov(train, markov_config(family));
  std::vector<std::vector<SaccadeFeatures>> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = data.items[i].features;
  return compute_markov_scores(all, model, proto.threads);
}

/// Trains on `train` items and returns per-item decision scores for `eval`.
inline std::map<std::size_t, std::vector<double>> svm_scores(
    const std::vector<FisherScore>& scores, const std::vector<std::size_t>& train,
    const std::vector<int>& labels, std::size_t n_classes, const std::vector<std::size_t>& eval,
    double C, double ridge, bool normalize, std::uint64_t seed) {
  std::vector<FisherScore> train_scores;
  for (std::size_t i : train) train_scores.push_back(scores[i]);
  const auto info = estimate_information(train_scores, ridge);
  const auto x = feature_maps(train_scores, info, normalize);
  const auto model = train_linear(x, labels, {.C = C, .seed = seed});
  std::map<std::size_t, std::vector<double>> out;
  for (std::size_t i : eval) {
    // A class absent from training can never be predicted.
    const auto s = decision_scores(model, feature_map(scores[i], info, normalize));
    std::vector<double> full(n_classes, -std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < model.labels.size(); ++c) {
      full[static_cast<std::size_t>(model.labels[c])] = s[c];
    }
    out[i] = std::move(full);
  }
  return out;
}

inline Hyperparams tune(const std::vector<FisherScore>& scores, const Split& split,
                        const EvalProtocol& proto, std::uint64_t seed) {
  struct Candidate {
    double C, ridge;
    bool normalize;
  };
  // C ascending first so ties resolve toward the smaller C.
  std::vector<double> cs = proto.c_grid;
  std::sort(cs.begin(), cs.end());
  std::vector<Candidate> grid;
  for (double c : cs)
    for (double r : proto.ridge_grid)
      for (bool nz : proto.normalize_grid) grid.push_back({c, r, nz});

  // Fold of an item: its position in the subject's shuffled training list.
  const std::size_t folds = proto.cv_folds;
  for (std::size_t y = 0; y < split.train.size(); ++y) {
    require(split.train[y].size() >= folds, ErrorCode::kInsufficientData,
            "subject index " + std::to_string(y) + " has fewer training images than CV folds");
  }
  std::vector<double> acc(grid.size(), 0.0);
  parallel_for(grid.size(), proto.threads, [&](std::size_t g) {
    std::size_t correct = 0, total = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> tr, va;
      std::vector<int> tr_labels, va_labels;
      for (std::size_t y = 0; y < split.train.size(); ++y) {
        for (std::size_t j = 0; j < split.train[y].size(); ++j) {
          if (j % folds == f) {
            va.push_back(split.train[y][j]);
            va_labels.push_back(static_cast<int>(y));
          } else {
            tr.push_back(split.train[y][j]);
            tr_labels.push_back(static_cast<int>(y));
          }
        }
      }
      const auto s = svm_scores(scores, tr, tr_labels, split.train.size(), va, grid[g].C, grid[g].ridge,
                                grid[g].normalize, derive_seed(seed, f));
      for (std::size_t v = 0; v < va.size(); ++v) {
        correct += argmax_first(s.at(va[v])) == static_cast<std::size_t>(va_labels[v]) ? 1 : 0;
        ++total;
      }
    }
    acc[g] = static_cast<double>(correct) / static_cast<double>(total);
  });
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (acc[g] > acc[best]) best = g;
  }
  return {grid[best].C, grid[best].ridge, grid[best].normalize, acc[best]};
}

inline SplitResult run_split(const Dataset& data, ModelFamily family, const EvalProtocol& proto,
                             const std::vector<std::string>& subjects, std::size_t index) {
  const std::uint64_t seed = derive_seed(proto.seed, index);
  const Split split = make_split(data, subjects, proto, seed);
  SplitResult out;
  out.index = index;
  for (std::size_t y = 0; y < subjects.size(); ++y) {
    auto names = [&](const std::vector<std::size_t>& items) {
      std::vector<std::string> v;
      for (std::size_t i : items) v.push_back(data.items[i].image_id);
      return v;
    };
    out.train_images.push_back(names(split.train[y]));
    out.test_images.push_back(names(split.test[y]));
  }
  std::vector<std::size_t> train_all, test_all;
  for (const auto& t : split.train) train_all.insert(train_all.end(), t.begin(), t.end());
  for (const auto& t : split.test) test_all.insert(test_all.end(), t.begin(), t.end());
  std::map<std::string, SaliencyMap> saliency;
  if (is_scenewalk(family)) saliency = saliency_for(data, train_all);

  std::map<std::size_t, std::vector<double>> scores;
  const std::size_t n_users = subjects.size();
  if (is_bayes(family)) {
    // Per-item log-likelihood under every user's own model.
    std::vector<std::vector<double>> ll(test_all.size(), std::vector<double>(n_users));
    if (is_scenewalk(family)) {
      std::vector<SceneWalkParams> users(n_users);
      auto opt = proto.scenewalk_fit;
      opt.threads = 1;
      parallel_for(n_users, proto.threads, [&](std::size_t y) {
        std::vector<SceneWalkTrial> trials;
        for (std::size_t i : split.train[y]) {
          trials.push_back({&data.items[i].path, &saliency.at(data.items[i].image_id)});
        }
        users[y] = fit_scenewalk(trials, proto.scenewalk_init, opt).params;
      });
      parallel_for(test_all.size(), proto.threads, [&](std::size_t t) {
        const auto& item = data.items[test_all[t]];
        for (std::size_t y = 0; y < n_users; ++y) {
          ll[t][y] = scenewalk_loglik(item.path, saliency.at(item.image_id), users[y]);
        }
      });
    } else {
      const MarkovConfig config = markov_config(family);
      std::vector<MarkovModelParams> users(n_users);
      parallel_for(n_users, proto.threads, [&](std::size_t y) {
        std::vector<std::vector<SaccadeFeatures>> train;
        for (std::size_t i : split.train[y]) train.push_back(data.items[i].features);
        users[y] = fit_markov(train, config);
      });
      parallel_for(test_all.size(), proto.threads, [&](std::size_t t) {
        const auto& f = data.items[test_all[t]].features;
        for (std::size_t y = 0; y < n_users; ++y) ll[t][y] = markov_loglik(f, users[y]);
      });
    }
    for (std::size_t t = 0; t < test_all.size(); ++t) scores[test_all[t]] = std::move(ll[t]);
  } else {
    const auto all_scores = pooled_scores(data, family, train_all, proto, saliency);
    const Hyperparams hp = tune(all_scores, split, proto, derive_seed(seed, 100));
    out.hyperparams = hp;
    std::vector<int> labels;
    for (std::size_t y = 0; y < n_users; ++y)
      for (std::size_t i = 0; i < split.train[y].size(); ++i) labels.push_back(static_cast<int>(y));
    scores = svm_scores(all_scores, train_all, labels, n_users, test_all, hp.C, hp.ridge_epsilon,
                        hp.normalize, derive_seed(seed, 200));
  }
  accuracy_curve(split.test, scores, proto.max_k, out);
  return out;
}

}  // namespace detail

/// Identification accuracy against the number of test images per decision,
/// averaged over random per-subject image splits.
inline ProtocolResult run_protocol(const Dataset& data, ModelFamily family,
                                   const EvalProtocol& proto) {
  proto.validate();
  data.validate();
  ProtocolResult out;
  out.family = family;
  out.subjects = data.subjects();
  require(!out.subjects.empty(), ErrorCode::kInsufficientData, "dataset has no items");
  if (out.subjects.size() == 1) {
    out.warnings.push_back("single subject: identification is trivially correct");
    for (std::size_t k = 1; k <= proto.max_k; ++k) out.curve.push_back({k, 1.0, 0.0});
    return out;
  }
  for (std::size_t s = 0; s < proto.n_splits; ++s) {
    out.splits.push_back(detail::run_split(data, family, proto, out.subjects, s));
  }
  std::size_t k_max = proto.max_k;
  for (const auto& s : out.splits) k_max = std::min(k_max, s.accuracy.size());
  const auto n = static_cast<double>(out.splits.size());
  for (std::size_t k = 1; k <= k_max; ++k) {
    double mean = 0.0;
    for (const auto& s : out.splits) mean += s.accuracy[k - 1];
    mean /= n;
    double var = 0.0;
    for (const auto& s : out.splits) var += (s.accuracy[k - 1] - mean) * (s.accuracy[k - 1] - mean);
    const double se = out.splits.size() > 1 ? std::sqrt(var / (n - 1.0)) / std::sqrt(n) : 0.0;
    out.curve.push_back({k, mean, se});
  }
  if (k_max < proto.max_k) {
    out.warnings.push_back("curve truncated at k=" + std::to_string(k_max) +
                           ": not enough test images for larger groups");
  }
  return out;
}

}  // namespace gazeid
