#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gazeid/protocol.hpp"
#include "gazeid/simulator.hpp"

using namespace gazeid;

namespace {

Dataset cohort(std::size_t users, std::size_t images, double delta, std::uint64_t seed = 1,
               CohortFamily family = CohortFamily::kMarkov) {
  SyntheticCohortSpec s;
  s.family = family;
  s.n_users = users;
  s.n_images = images;
  s.T = 15;
  s.delta = delta;
  s.seed = seed;
  s.grid = {10, 10, 48.0, 28.0};
  return generate_cohort(s).data;
}

EvalProtocol quick() {
  EvalProtocol p;
  p.n_splits = 3;
  p.max_k = 3;
  p.c_grid = {0.1, 10.0};
  p.ridge_grid = {1e-3};
  p.normalize_grid = {true};
  return p;
}

}  // namespace

TEST(Protocol, FamilyNames) {
  EXPECT_EQ(model_family("bayes", "markov"), ModelFamily::kBayesMarkov);
  EXPECT_EQ(model_family("fisher-svm", "markov-dyn"), ModelFamily::kFisherSvmMarkovDyn);
  EXPECT_EQ(to_string(model_family("fisher-svm", "scenewalk")), "fisher-svm-scenewalk");
  EXPECT_THROW(model_family("knn", "markov"), Error);
  EXPECT_THROW(model_family("bayes", "hmm"), Error);
  EXPECT_EQ(markov_config(ModelFamily::kBayesMarkovDyn).channels.size(), 8u);
}

TEST(Protocol, SplitsPartitionEachSubjectWithoutLeakage) {
  const Dataset d = cohort(4, 9, 0.3);
  const auto subjects = d.subjects();
  const auto split = detail::make_split(d, subjects, quick(), 17);
  const auto by_subject = d.items_by_subject();
  for (std::size_t y = 0; y < subjects.size(); ++y) {
    EXPECT_EQ(split.train[y].size(), 5u);  // llround(4.5)
    EXPECT_EQ(split.test[y].size(), 4u);
    std::set<std::string> train, test;
    for (std::size_t i : split.train[y]) {
      EXPECT_EQ(d.items[i].subject_id, subjects[y]);
      train.insert(d.items[i].image_id);
    }
    for (std::size_t i : split.test[y]) {
      EXPECT_EQ(d.items[i].subject_id, subjects[y]);
      test.insert(d.items[i].image_id);
    }
    for (const auto& img : test) EXPECT_FALSE(train.count(img)) << img;
    EXPECT_EQ(train.size() + test.size(), by_subject[y].size());
  }
  const auto again = detail::make_split(d, subjects, quick(), 17);
  EXPECT_EQ(again.train, split.train);
  const auto other = detail::make_split(d, subjects, quick(), 18);
  EXPECT_NE(other.train, split.train);
}

TEST(Protocol, TooFewImagesNamesTheSubject) {
  Dataset d = cohort(3, 4, 0.3);
  // Keep a single image for s02.
  std::erase_if(d.items, [](const DatasetItem& it) { return it.subject_id == "s02" && it.image_id != "img001"; });
  try {
    run_protocol(d, ModelFamily::kBayesMarkov, quick());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("s02"), std::string::npos) << e.what();
  }
}

TEST(Protocol, BayesMatchesDirectIdentification) {
  const Dataset d = cohort(5, 10, 0.15, 3);
  const EvalProtocol p = quick();
  const ProtocolResult r = run_protocol(d, ModelFamily::kBayesMarkov, p);
  const auto subjects = d.subjects();
  for (std::size_t s = 0; s < p.n_splits; ++s) {
    const auto split = detail::make_split(d, subjects, p, derive_seed(p.seed, s));
    std::vector<MarkovModelParams> users;
    for (const auto& items : split.train) {
      std::vector<std::vector<SaccadeFeatures>> train;
      for (std::size_t i : items) train.push_back(d.items[i].features);
      users.push_back(fit_markov(train, MarkovConfig::base()));
    }
    std::size_t correct = 0, total = 0;
    for (std::size_t y = 0; y < split.test.size(); ++y) {
      for (std::size_t i : split.test[y]) {
        const std::vector<std::vector<SaccadeFeatures>> one{d.items[i].features};
        correct += bayes_identify(one, users) == y ? 1 : 0;
        ++total;
      }
    }
    EXPECT_DOUBLE_EQ(r.splits[s].accuracy[0], static_cast<double>(correct) / static_cast<double>(total));
  }
}

TEST(Protocol, CurveIsMeanAndStandardErrorOverSplits) {
  const ProtocolResult r = run_protocol(cohort(4, 12, 0.1, 5), ModelFamily::kBayesMarkov, quick());
  ASSERT_EQ(r.curve.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    double mean = 0.0;
    for (const auto& s : r.splits) mean += s.accuracy[k];
    mean /= 3.0;
    double ss = 0.0;
    for (const auto& s : r.splits) ss += (s.accuracy[k] - mean) * (s.accuracy[k] - mean);
    EXPECT_DOUBLE_EQ(r.curve[k].mean_acc, mean);
    EXPECT_NEAR(r.curve[k].stderr_acc, std::sqrt(ss / 2.0) / std::sqrt(3.0), 1e-15);
    EXPECT_EQ(r.curve[k].k, k + 1);
  }
  // 6 test images per subject: 6, 3 and 2 groups per subject.
  EXPECT_EQ(r.splits[0].groups, (std::vector<std::size_t>{24, 12, 8}));
}

TEST(Protocol, ReproducibleAndThreadIndependent) {
  const Dataset d = cohort(4, 10, 0.3, 9);
  EvalProtocol p = quick();
  const auto a = run_protocol(d, ModelFamily::kFisherSvmMarkov, p);
  p.threads = 3;
  const auto b = run_protocol(d, ModelFamily::kFisherSvmMarkov, p);
  ASSERT_EQ(a.splits.size(), b.splits.size());
  for (std::size_t s = 0; s < a.splits.size(); ++s) {
    EXPECT_EQ(a.splits[s].accuracy, b.splits[s].accuracy);
    EXPECT_EQ(a.splits[s].hyperparams->C, b.splits[s].hyperparams->C);
    EXPECT_EQ(a.splits[s].test_images, b.splits[s].test_images);
  }
}

TEST(Protocol, FisherChoosesFromTheGrid) {
  const auto r = run_protocol(cohort(4, 10, 0.3, 4), ModelFamily::kFisherSvmMarkov, quick());
  for (const auto& s : r.splits) {
    ASSERT_TRUE(s.hyperparams.has_value());
    EXPECT_TRUE(s.hyperparams->C == 0.1 || s.hyperparams->C == 10.0);
    EXPECT_EQ(s.hyperparams->ridge_epsilon, 1e-3);
    EXPECT_GE(s.hyperparams->cv_accuracy, 0.0);
    EXPECT_LE(s.hyperparams->cv_accuracy, 1.0);
  }
}

TEST(Protocol, SingleSubjectIsTrivial) {
  const auto r = run_protocol(cohort(1, 6, 0.3), ModelFamily::kBayesMarkov, quick());
  ASSERT_FALSE(r.warnings.empty());
  for (const auto& p : r.curve) EXPECT_EQ(p.mean_acc, 1.0);
}

TEST(Protocol, CurveTruncatedWhenGroupsRunOut) {
  EvalProtocol p = quick();
  p.max_k = 8;
  const auto r = run_protocol(cohort(3, 8, 0.3), ModelFamily::kBayesMarkov, p);
  EXPECT_EQ(r.curve.size(), 4u);  // 4 test images per subject
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings[0].find("k=4"), std::string::npos);
}

TEST(Protocol, SeparatedUsersAreIdentified) {
  const Dataset d = cohort(4, 12, 0.8, 2, CohortFamily::kMarkovDynamics);
  for (auto f : {ModelFamily::kBayesMarkovDyn, ModelFamily::kFisherSvmMarkovDyn}) {
    const auto r = run_protocol(d, f, quick());
    EXPECT_GT(r.curve[0].mean_acc, 0.9) << to_string(f);
  }
}

TEST(Protocol, SceneWalkFamiliesRun) {
  SyntheticCohortSpec s;
  s.family = CohortFamily::kSceneWalk;
  s.n_users = 3;
  s.n_images = 6;
  s.T = 6;
  s.grid = {8, 8, 48.0, 28.0};
  const Dataset d = generate_cohort(s).data;
  EvalProtocol p = quick();
  p.n_splits = 2;
  p.scenewalk_fit.max_iterations = 15;
  for (auto f : {ModelFamily::kBayesSceneWalk, ModelFamily::kFisherSvmSceneWalk}) {
    const auto r = run_protocol(d, f, p);
    ASSERT_FALSE(r.curve.empty());
    EXPECT_GE(r.curve[0].mean_acc, 0.0);
    EXPECT_LE(r.curve[0].mean_acc, 1.0);
  }
}
