#include <gtest/gtest.h>

#include <cmath>

#include "gazeid/simulator.hpp"

using namespace gazeid;

namespace {

SyntheticCohortSpec small(CohortFamily family) {
  SyntheticCohortSpec s;
  s.family = family;
  s.n_users = 3;
  s.n_images = 4;
  s.T = 8;
  s.grid = {12, 12, 48.0, 28.0};
  return s;
}

void expect_same(const Cohort& a, const Cohort& b) {
  ASSERT_EQ(a.data.items.size(), b.data.items.size());
  for (std::size_t i = 0; i < a.data.items.size(); ++i) {
    const auto& p = a.data.items[i].path.fixations;
    const auto& q = b.data.items[i].path.fixations;
    ASSERT_EQ(p.size(), q.size());
    for (std::size_t t = 0; t < p.size(); ++t) {
      EXPECT_EQ(p[t].q, q[t].q);
      EXPECT_EQ(p[t].duration_ms, q[t].duration_ms);
    }
  }
}

}  // namespace

TEST(Simulator, Names) {
  EXPECT_EQ(subject_name(0), "s01");
  EXPECT_EQ(subject_name(11), "s12");
  EXPECT_EQ(image_name(6), "img007");
  for (auto f : {CohortFamily::kMarkov, CohortFamily::kMarkovDynamics, CohortFamily::kSceneWalk}) {
    EXPECT_EQ(cohort_family_from_string(to_string(f)), f);
  }
  EXPECT_THROW(cohort_family_from_string("hmm"), Error);
}

TEST(Simulator, ShapeOfCohort) {
  for (auto f : {CohortFamily::kMarkov, CohortFamily::kMarkovDynamics, CohortFamily::kSceneWalk}) {
    const Cohort c = generate_cohort(small(f));
    EXPECT_EQ(c.data.items.size(), 12u);
    EXPECT_EQ(c.data.subjects().size(), 3u);
    for (const auto& it : c.data.items) {
      EXPECT_EQ(it.path.size(), 8u);
      EXPECT_EQ(it.features.size(), 7u);
    }
    EXPECT_NO_THROW(c.data.validate());
  }
}

TEST(Simulator, SameSeedSameCohortAnyThreadCount) {
  for (auto f : {CohortFamily::kMarkov, CohortFamily::kSceneWalk}) {
    const auto spec = small(f);
    expect_same(generate_cohort(spec, 1), generate_cohort(spec, 1));
    expect_same(generate_cohort(spec, 1), generate_cohort(spec, 4));
  }
}

TEST(Simulator, SeedChangesCohort) {
  auto a = small(CohortFamily::kMarkov);
  auto b = a;
  b.seed = 2;
  EXPECT_NE(generate_cohort(a).data.items[0].path.fixations[1].q,
            generate_cohort(b).data.items[0].path.fixations[1].q);
}

TEST(Simulator, ZeroSpreadGivesIdenticalUsers) {
  auto spec = small(CohortFamily::kMarkovDynamics);
  spec.delta = 0.0;
  const Cohort c = generate_cohort(spec);
  for (std::size_t u = 1; u < c.markov_users.size(); ++u) {
    EXPECT_EQ(to_vector(c.markov_users[u]), to_vector(c.markov_users[0]));
  }
  spec.family = CohortFamily::kSceneWalk;
  const Cohort s = generate_cohort(spec);
  for (const auto& p : s.scenewalk_users) EXPECT_EQ(p.to_array(), s.scenewalk_users[0].to_array());
}

TEST(Simulator, SpreadMakesUsersDifferAndKeepsThemValid) {
  const Cohort c = generate_cohort(small(CohortFamily::kMarkovDynamics));
  EXPECT_NE(to_vector(c.markov_users[0]), to_vector(c.markov_users[1]));
  for (const auto& m : c.markov_users) {
    EXPECT_NO_THROW(m.validate());
    EXPECT_NEAR(m.pi.pi[0] + m.pi.pi[1] + m.pi.pi[2] + m.pi.pi[3], 1.0, 1e-12);
  }
  const Cohort s = generate_cohort(small(CohortFamily::kSceneWalk));
  for (const auto& p : s.scenewalk_users) EXPECT_NO_THROW(p.validate());
}

TEST(Simulator, BaseCohortCarriesBaseChannelsOnly) {
  const Cohort c = generate_cohort(small(CohortFamily::kMarkov));
  EXPECT_EQ(c.markov_users[0].channels.size(), 2u);
  for (const auto& f : c.data.items[0].features) {
    EXPECT_GT(f.amplitude, 0.0);
    EXPECT_GT(f.duration, 0.0);
    EXPECT_TRUE(std::isnan(f.velocity));
  }
  const Cohort d = generate_cohort(small(CohortFamily::kMarkovDynamics));
  for (const auto& f : d.data.items[0].features) {
    for (ChannelId ch : kDynamicsChannels) EXPECT_GT(f.channel(ch), 0.0);
  }
}

TEST(Simulator, MarkovFeaturesMatchTheirScanpath) {
  const Cohort c = generate_cohort(small(CohortFamily::kMarkov));
  for (const auto& it : c.data.items) {
    const auto again = extract_features(it.path);
    for (std::size_t t = 0; t < again.size(); ++t) {
      EXPECT_EQ(again[t].type, it.features[t].type);
      EXPECT_NEAR(again[t].amplitude, it.features[t].amplitude, 1e-9);
      EXPECT_EQ(again[t].duration, it.features[t].duration);
    }
  }
}

TEST(Simulator, SceneWalkCohortLivesOnCellCenters) {
  const auto spec = small(CohortFamily::kSceneWalk);
  const Cohort c = generate_cohort(spec);
  EXPECT_EQ(c.data.saliency.size(), spec.n_images);
  for (const auto& it : c.data.items) {
    ASSERT_TRUE(c.data.saliency.count(it.image_id));
    for (const auto& f : it.path.fixations) {
      const auto cell = spec.grid.cell_of(f.q);
      EXPECT_EQ(spec.grid.center(cell), f.q);
    }
  }
}

TEST(Simulator, RejectsBadSpecs) {
  auto s = small(CohortFamily::kMarkov);
  s.T = 1;
  EXPECT_THROW(generate_cohort(s), Error);
  s = small(CohortFamily::kMarkov);
  s.delta = -0.1;
  EXPECT_THROW(generate_cohort(s), Error);
  s = small(CohortFamily::kMarkov);
  s.n_users = 0;
  EXPECT_THROW(generate_cohort(s), Error);
}
