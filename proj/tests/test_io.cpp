#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "gazeid/io.hpp"
#include "gazeid/simulator.hpp"
#include "support/models.hpp"
#include "support/tempdir.hpp"

using namespace gazeid;
namespace fs = std::filesystem;

namespace {

bool same_bits(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return std::memcmp(&a, &b, sizeof a) == 0;
}

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << s;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Io, FormatDoubleRoundTripsExactly) {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.index(200)) - 100);
    const std::string s = io::format_double(v);
    EXPECT_TRUE(same_bits(std::strtod(s.c_str(), nullptr), v)) << s;
  }
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(io::format_double(kNaN), "nan");
  EXPECT_EQ(io::format_double(-INFINITY), "-inf");
}

TEST(Io, MarkovJsonIsValueExact) {
  Rng rng(5);
  for (const auto& config : {MarkovConfig::base(), MarkovConfig::dynamics()}) {
    MarkovModelParams m = fixtures::random_markov_model(config, rng);
    m.vigor_rate = 3.0 / 7.0;
    const std::string text = io::markov_to_json(m).dump(2);
    const MarkovModelParams back = io::markov_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(back.channels, m.channels);
    const auto a = to_vector(m), b = to_vector(back);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(same_bits(a[i], b[i])) << i;
    EXPECT_TRUE(same_bits(back.vigor_rate, m.vigor_rate));
  }
}

TEST(Io, MarkovJsonShape) {
  Rng rng(6);
  const auto j = io::markov_to_json(fixtures::random_markov_model(MarkovConfig::base(), rng));
  EXPECT_EQ(j.at("config"), "base");
  EXPECT_EQ(j.at("pi").size(), 4u);
  EXPECT_EQ(j.at("channels").at("amplitude").size(), 4u);
  EXPECT_TRUE(j.at("channels").at("duration")[2].contains("alpha"));
  EXPECT_TRUE(j.at("b_star").is_null());
  EXPECT_TRUE(std::isnan(io::markov_from_json(j).vigor_rate));
}

TEST(Io, MarkovJsonRejectsBadInput) {
  Rng rng(7);
  auto j = io::markov_to_json(fixtures::random_markov_model(MarkovConfig::base(), rng));
  auto short_pi = j;
  short_pi["pi"] = {0.5, 0.5};
  EXPECT_THROW(io::markov_from_json(short_pi), Error);
  auto negative = j;
  negative["channels"]["amplitude"][0]["beta"] = -1.0;
  EXPECT_THROW(io::markov_from_json(negative), Error);
  auto unknown = j;
  unknown["channel_order"] = {"amplitude", "wiggle"};
  EXPECT_THROW(io::markov_from_json(unknown), Error);
}

TEST(Io, ScanpathCsvRoundTrip) {
  fixtures::TempDir dir("scanpath");
  Scanpath s;
  s.fixations = {{{1.0 / 3.0, 2.5}, 180.0}, {{-4.25, 1e-7}, 333.3333333333333}, {{7.0, 8.0}, 90.0}};
  const io::Provenance prov = io::Provenance::of({{"k", 1}}, 9);
  io::atomic_write(dir / "p.csv", io::scanpath_csv(s, &prov));
  const Scanpath back = io::read_scanpath(dir / "p.csv");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(same_bits(back.fixations[i].q.x, s.fixations[i].q.x));
    EXPECT_TRUE(same_bits(back.fixations[i].q.y, s.fixations[i].q.y));
    EXPECT_TRUE(same_bits(back.fixations[i].duration_ms, s.fixations[i].duration_ms));
  }
}

TEST(Io, CsvErrorsNameLineAndColumn) {
  fixtures::TempDir dir("csv_errors");
  write_text(dir / "bad_header.csv", "fix,x_deg,y_deg,dur_ms\n0,1,2,3\n");
  EXPECT_NE(error_of([&] { io::read_scanpath(dir / "bad_header.csv"); }).find("line 1"), std::string::npos);

  write_text(dir / "bad_value.csv", "# note\nfix_index,x_deg,y_deg,dur_ms\n0,1,2,3\n1,abc,2,3\n");
  const std::string msg = error_of([&] { io::read_scanpath(dir / "bad_value.csv"); });
  EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
  EXPECT_NE(msg.find("x_deg"), std::string::npos) << msg;
  EXPECT_EQ(msg.find('\n'), std::string::npos);

  write_text(dir / "ragged.csv", "fix_index,x_deg,y_deg,dur_ms\n0,1,2\n");
  EXPECT_NE(error_of([&] { io::read_scanpath(dir / "ragged.csv"); }).find("expected 4 fields"),
            std::string::npos);

  write_text(dir / "gap.csv", "fix_index,x_deg,y_deg,dur_ms\n0,1,2,3\n2,1,2,3\n");
  EXPECT_THROW(io::read_scanpath(dir / "gap.csv"), Error);

  write_text(dir / "zero_dur.csv", "fix_index,x_deg,y_deg,dur_ms\n0,1,2,3\n1,1,2,0\n");
  EXPECT_THROW(io::read_scanpath(dir / "zero_dur.csv"), Error);
}

TEST(Io, RecordingWithSidecar) {
  fixtures::TempDir dir("recording");
  write_text(dir / "r.csv", "t_ms,x_deg,y_deg\n0,1,1\n1,nan,nan\n2,1.5,1\n3,2,1\n");
  write_text(dir / "r.json", R"({"subject_id":"a","image_id":"b","sampling_rate_hz":1000})");
  std::size_t dropped = 0;
  const GazeRecording rec = io::read_recording(dir / "r.csv", &dropped);
  EXPECT_EQ(dropped, 1u);
  EXPECT_EQ(rec.samples.size(), 3u);
  EXPECT_EQ(rec.subject_id, "a");
  EXPECT_EQ(rec.sampling_rate_hz, 1000.0);

  io::write_recording(dir / "copy.csv", rec);
  const GazeRecording again = io::read_recording(dir / "copy.csv");
  EXPECT_EQ(again.samples.size(), 3u);
  EXPECT_EQ(again.image_id, "b");

  write_text(dir / "orphan.csv", "t_ms,x_deg,y_deg\n0,1,1\n");
  EXPECT_THROW(io::read_recording(dir / "orphan.csv"), Error);
}

TEST(Io, FeatureCsvKeepsMissingChannels) {
  fixtures::TempDir dir("features");
  std::vector<SaccadeFeatures> f(2);
  f[0].type = SaccadeType::kReverse;
  f[0].amplitude = 2.5;
  f[0].duration = 210.0;
  f[0].velocity = 123.25;
  f[1].type = SaccadeType::kLeft;
  f[1].amplitude = 0.75;
  f[1].duration = 150.0;
  f[1].vigor_y = 1.0 / 3.0;
  io::atomic_write(dir / "f.csv", io::features_csv(f));
  const auto back = io::read_features(dir / "f.csv");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].type, f[i].type);
    for (ChannelId c : kDynamicsChannels) EXPECT_TRUE(same_bits(back[i].channel(c), f[i].channel(c)));
  }
}

TEST(Io, SaliencyRoundTrip) {
  fixtures::TempDir dir("saliency");
  Rng rng(3);
  const GridSpec grid{6, 9, 30.0, 20.0};
  const SaliencyMap h = fixtures::random_saliency(grid, rng);
  io::atomic_write(dir / "h.csv", io::saliency_text(h));
  const SaliencyMap back = io::read_saliency(dir / "h.csv");
  EXPECT_EQ(back.grid, grid);
  for (std::size_t i = 0; i < h.h.size(); ++i) EXPECT_NEAR(back.h[i], h.h[i], 1e-16 + 1e-15 * h.h[i]);

  write_text(dir / "short.csv", R"({"rows":2,"cols":2,"extent_deg":[1,1]})" "\n1,2\n");
  EXPECT_THROW(io::read_saliency(dir / "short.csv"), Error);
  write_text(dir / "wide.csv", R"({"rows":1,"cols":2,"extent_deg":[1,1]})" "\n1,2,3\n");
  EXPECT_THROW(io::read_saliency(dir / "wide.csv"), Error);
}

TEST(Io, DatasetDirectoryRoundTrip) {
  fixtures::TempDir dir("dataset");
  SyntheticCohortSpec spec;
  spec.family = CohortFamily::kSceneWalk;
  spec.n_users = 2;
  spec.n_images = 3;
  spec.T = 5;
  spec.grid = {8, 8, 48.0, 28.0};
  const Cohort c = generate_cohort(spec);
  io::write_dataset(dir.path, c.data, io::Provenance::of({}, 1));
  const Dataset back = io::read_dataset(dir.path);
  ASSERT_EQ(back.items.size(), c.data.items.size());
  EXPECT_EQ(back.grid, c.data.grid);
  EXPECT_EQ(back.saliency.size(), c.data.saliency.size());
  for (std::size_t i = 0; i < back.items.size(); ++i) {
    const auto& a = c.data.items[i];
    const auto& b = back.items[i];
    EXPECT_EQ(a.subject_id, b.subject_id);
    EXPECT_EQ(a.image_id, b.image_id);
    ASSERT_EQ(a.features.size(), b.features.size());
    for (std::size_t t = 0; t < a.features.size(); ++t) {
      EXPECT_EQ(a.features[t].type, b.features[t].type);
      EXPECT_TRUE(same_bits(a.features[t].amplitude, b.features[t].amplitude));
      EXPECT_NEAR(a.features[t].direction, b.features[t].direction, 1e-12);
    }
  }
}

TEST(Io, LooseScanpathDirectory) {
  fixtures::TempDir dir("loose");
  write_text(dir / "s1_imgA.csv", "fix_index,x_deg,y_deg,dur_ms\n0,1,1,100\n1,3,1,120\n2,3,4,90\n");
  write_text(dir / "s2_imgA.csv", "fix_index,x_deg,y_deg,dur_ms\n0,5,5,100\n1,1,1,200\n");
  const Dataset d = io::read_dataset(dir.path);
  ASSERT_EQ(d.items.size(), 2u);
  EXPECT_EQ(d.items[0].subject_id, "s1");
  EXPECT_EQ(d.items[0].image_id, "imgA");
  EXPECT_EQ(d.items[0].features.size(), 2u);
}

TEST(Io, EmptyDirectoryHasNoScanpaths) {
  fixtures::TempDir dir("empty");
  fs::create_directories(dir.path);
  const std::string msg = error_of([&] { io::read_dataset(dir.path); });
  EXPECT_NE(msg.find("no scanpaths found"), std::string::npos) << msg;
}

TEST(Io, AtomicWriteReplacesWithoutLeftovers) {
  fixtures::TempDir dir("atomic");
  io::atomic_write(dir / "sub" / "a.txt", "first");
  io::atomic_write(dir / "sub" / "a.txt", "second");
  EXPECT_EQ(io::read_file(dir / "sub" / "a.txt"), "second");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "sub")) ++n;
  EXPECT_EQ(n, 1u);
}

TEST(Io, ProvenanceHashFollowsConfig) {
  const auto a = io::Provenance::of({{"x", 1}, {"y", "z"}}, 4);
  const auto b = io::Provenance::of({{"y", "z"}, {"x", 1}}, 4);
  const auto c = io::Provenance::of({{"x", 2}, {"y", "z"}}, 4);
  EXPECT_EQ(a.config_hash, b.config_hash);
  EXPECT_NE(a.config_hash, c.config_hash);
  EXPECT_EQ(a.config_hash.size(), 16u);
  EXPECT_EQ(a.to_json().at("seed"), 4u);
  EXPECT_EQ(a.to_json().at("tool_version"), io::kToolVersion);
  EXPECT_EQ(a.csv_comment().rfind("# tool_version=", 0), 0u);
  EXPECT_EQ(io::fnv1a_hex(""), "cbf29ce484222325");
}

TEST(Io, FeatureMatrixRoundTrip) {
  fixtures::TempDir dir("phi");
  io::FeatureMatrix m{{"s1", "s2"}, {"a", "b"}, {{0.1, -2.0, 1e-300}, {3.0, 4.0, 5.0}}};
  io::atomic_write(dir / "phi.csv", io::feature_matrix_csv(m));
  const auto back = io::read_feature_matrix(dir / "phi.csv");
  EXPECT_EQ(back.subject_ids, m.subject_ids);
  EXPECT_EQ(back.image_ids, m.image_ids);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_TRUE(same_bits(back.rows[i][k], m.rows[i][k]));
}

TEST(Io, InformationRoundTripRebuildsFactor) {
  Rng rng(8);
  std::vector<FisherScore> scores;
  for (int i = 0; i < 30; ++i) scores.push_back({{rng.normal(), 3.0 * rng.normal(), rng.normal() + 1.0}, "t"});
  const auto info = estimate_information(scores, 1e-2);
  const auto back = io::information_from_json(nlohmann::json::parse(io::information_to_json(info).dump()), "x");
  EXPECT_EQ(back.count, info.count);
  EXPECT_DOUBLE_EQ(back.ridge, info.ridge);
  EXPECT_LT((back.factor - info.factor).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Io, ResultsJsonShape) {
  ProtocolResult r;
  r.family = ModelFamily::kFisherSvmMarkov;
  r.subjects = {"a", "b"};
  SplitResult s;
  s.train_images = {{"i1"}, {"i2"}};
  s.test_images = {{"i2"}, {"i1"}};
  s.accuracy = {0.5};
  s.groups = {2};
  s.hyperparams = Hyperparams{1.0, 1e-3, true, 0.75};
  r.splits = {s};
  r.curve = {{1, 0.5, 0.0}};
  const auto j = io::results_json(r, io::Provenance::of({}, 2));
  EXPECT_EQ(j.at("model_family"), "fisher-svm-markov");
  EXPECT_EQ(j.at("curve")[0].at("k"), 1u);
  EXPECT_TRUE(j.at("curve")[0].contains("stderr"));
  EXPECT_EQ(j.at("hyperparams_chosen")[0].at("C"), 1.0);
  EXPECT_EQ(j.at("splits")[0].at("test_images").at("a")[0], "i2");
  EXPECT_TRUE(j.contains("provenance"));
  const std::string csv = io::results_csv(r, io::Provenance::of({}, 2));
  EXPECT_NE(csv.find("model_family,k,mean_acc,stderr\nfisher-svm-markov,1,0.5,0\n"), std::string::npos);
}
