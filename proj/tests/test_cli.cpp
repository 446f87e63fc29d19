#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support/recordings.hpp"
#include "support/tempdir.hpp"

using namespace gazeid;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "gazeid");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << s;
}

/// Every regular file under `a` exists under `b` with identical bytes.
void expect_same_tree(const fs::path& a, const fs::path& b) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(b / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
    ++n;
  }
  EXPECT_GT(n, 0u);
}

void expect_single_line_error(const Outcome& r) {
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
  EXPECT_EQ(r.err.find('\n'), r.err.size() - 1) << r.err;
}

}  // namespace

TEST(Cli, FullMarkovPipeline) {
  fixtures::TempDir dir("cli_pipeline");
  const std::string d = dir.path.string();
  ASSERT_EQ(invoke({"simulate", "--n-users", "3", "--n-images", "6", "--T", "12", "--out", d + "/sim"}).code, 0);
  ASSERT_EQ(invoke({"fit", "--data", d + "/sim", "--out", d + "/pooled.json"}).code, 0);
  ASSERT_EQ(invoke({"scores", "--data", d + "/sim", "--params", d + "/pooled.json", "--out", d + "/phi.csv",
                 "--save-info", d + "/info.json"}).code, 0);
  ASSERT_EQ(invoke({"train", "--features", d + "/phi.csv", "--out", d + "/svm.json"}).code, 0);
  const Outcome id = invoke({"identify", "--classifier", "fisher-svm", "--features", d + "/phi.csv", "--svm",
                      d + "/svm.json", "--k", "2", "--out", d + "/pred.csv"});
  ASSERT_EQ(id.code, 0) << id.err;
  EXPECT_NE(id.out.find("accuracy at k=2"), std::string::npos);
  EXPECT_NE(slurp(dir / "pred.csv").find("subject_id,group,image_ids,predicted_id,correct"), std::string::npos);

  // Scores reusing the stored information reproduce the export.
  ASSERT_EQ(invoke({"scores", "--data", d + "/sim", "--params", d + "/pooled.json", "--out", d + "/phi2.csv",
                 "--info", d + "/info.json"}).code, 0);
  EXPECT_EQ(io::read_feature_matrix(dir / "phi.csv").rows.size(), 18u);

  ASSERT_EQ(invoke({"fit", "--data", d + "/sim", "--per-subject", "--out", d + "/users.json"}).code, 0);
  const Outcome bayes = invoke({"identify", "--classifier", "bayes", "--data", d + "/sim", "--models",
                         d + "/users.json", "--out", d + "/pred_bayes.csv"});
  EXPECT_EQ(bayes.code, 0) << bayes.err;
}

TEST(Cli, FitWritesTheExactMaximumLikelihoodModel) {
  fixtures::TempDir dir("cli_fit");
  const std::string d = dir.path.string();
  ASSERT_EQ(invoke({"simulate", "--model", "markov-dyn", "--n-users", "2", "--n-images", "5", "--out", d + "/sim"}).code, 0);
  ASSERT_EQ(invoke({"fit", "--data", d + "/sim", "--model", "markov-dyn", "--out", d + "/m.json"}).code, 0);
  const Dataset data = io::read_dataset(dir / "sim");
  std::vector<std::vector<SaccadeFeatures>> seqs;
  for (const auto& it : data.items) seqs.push_back(it.features);
  const auto expected = to_vector(fit_markov(seqs, MarkovConfig::dynamics()));
  const auto j = io::read_json(dir / "m.json");
  EXPECT_EQ(j.at("config"), "dynamics");
  EXPECT_TRUE(j.contains("provenance"));
  EXPECT_EQ(to_vector(io::markov_from_json(j)), expected);
}

TEST(Cli, OutputsIndependentOfThreadCount) {
  fixtures::TempDir dir("cli_threads");
  const std::string d = dir.path.string();
  for (std::string t : {"1", "3"}) {
    ASSERT_EQ(invoke({"simulate", "--model", "markov", "--n-users", "4", "--n-images", "8", "--threads", t,
                   "--out", d + "/sim" + t}).code, 0);
    const Outcome r = invoke({"eval", "--data", d + "/sim" + t, "--classifier", "fisher-svm", "--n-splits", "2",
                       "--max-k", "2", "--threads", t, "--out", d + "/res" + t + "/results.json"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  expect_same_tree(dir / "sim1", dir / "sim3");
  expect_same_tree(dir / "res1", dir / "res3");
  EXPECT_TRUE(fs::exists(dir / "res1" / "results.csv"));
}

TEST(Cli, RerunIsByteIdentical) {
  fixtures::TempDir dir("cli_rerun");
  const std::string d = dir.path.string();
  ASSERT_EQ(invoke({"simulate", "--model", "scenewalk", "--grid", "8x8", "--n-users", "2", "--n-images", "4",
                 "--T", "5", "--out", d + "/sim"}).code, 0);
  for (std::string run : {"a", "b"}) {
    ASSERT_EQ(invoke({"fit", "--data", d + "/sim", "--model", "scenewalk", "--max-iterations", "10", "--out",
                   d + "/" + run + "/fit.json"}).code, 0);
  }
  expect_same_tree(dir / "a", dir / "b");
  const auto report = io::read_json(dir / "a" / "fit.json");
  for (const char* key : {"params", "objective", "grad_norm", "iterations", "converged", "provenance"}) {
    EXPECT_TRUE(report.contains(key)) << key;
  }
}

TEST(Cli, ProvenanceInEveryOutput) {
  fixtures::TempDir dir("cli_prov");
  const std::string d = dir.path.string();
  ASSERT_EQ(invoke({"simulate", "--n-users", "2", "--n-images", "4", "--seed", "42", "--out", d + "/sim"}).code, 0);
  ASSERT_EQ(invoke({"eval", "--data", d + "/sim", "--n-splits", "1", "--max-k", "1", "--seed", "42", "--out",
                 d + "/r.json"}).code, 0);
  const auto j = io::read_json(dir / "r.json");
  EXPECT_EQ(j.at("provenance").at("seed"), 42u);
  EXPECT_EQ(j.at("provenance").at("tool_version"), io::kToolVersion);
  EXPECT_EQ(j.at("provenance").at("config_hash").get<std::string>().size(), 16u);
  EXPECT_EQ(slurp(dir / "r.csv").rfind("# tool_version=", 0), 0u);
  EXPECT_EQ(slurp(dir / "sim" / "scanpaths" / "s01_img001.csv").rfind("# tool_version=", 0), 0u);
  EXPECT_TRUE(io::read_json(dir / "sim" / "manifest.json").contains("provenance"));
}

TEST(Cli, FlagsOverrideConfig) {
  fixtures::TempDir dir("cli_config");
  const std::string d = dir.path.string();
  write_text(dir / "cfg.json", R"({"seed": 5, "n_users": 2, "n_images": 4, "T": 6})");
  ASSERT_EQ(invoke({"simulate", "--config", d + "/cfg.json", "--seed", "7", "--out", d + "/sim"}).code, 0);
  const auto m = io::read_json(dir / "sim" / "manifest.json");
  EXPECT_EQ(m.at("provenance").at("seed"), 7u);
  EXPECT_EQ(m.at("provenance").at("config").at("n_users"), 2u);
  EXPECT_EQ(m.at("items").size(), 8u);
}

TEST(Cli, ConfigRejectsUnknownKeysAndWrongTypes) {
  fixtures::TempDir dir("cli_badcfg");
  const std::string d = dir.path.string();
  write_text(dir / "unknown.json", R"({"seed": 1, "colour": "red"})");
  Outcome r = invoke({"simulate", "--config", d + "/unknown.json", "--out", d + "/x"});
  expect_single_line_error(r);
  EXPECT_NE(r.err.find("unknown config key 'colour'"), std::string::npos) << r.err;

  write_text(dir / "typed.json", R"({"n_users": "ten"})");
  r = invoke({"simulate", "--config", d + "/typed.json", "--out", d + "/x"});
  expect_single_line_error(r);
  EXPECT_NE(r.err.find("wrong type"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "x"));
}

TEST(Cli, FitOnEmptyDirectory) {
  fixtures::TempDir dir("cli_empty");
  fs::create_directories(dir / "data");
  const Outcome r = invoke({"fit", "--data", (dir / "data").string(), "--out", (dir / "m.json").string()});
  expect_single_line_error(r);
  EXPECT_NE(r.err.find("no scanpaths found"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "m.json"));
}

TEST(Cli, UsageAndArgumentErrors) {
  Outcome r = invoke({"eval", "--bogus"});
  expect_single_line_error(r);
  EXPECT_EQ(r.code, 2);
  r = invoke({});
  EXPECT_EQ(r.code, 2);
  r = invoke({"simulate", "--n-users", "many", "--out", "x"});
  expect_single_line_error(r);
  r = invoke({"fit", "--data", "."});
  expect_single_line_error(r);
  EXPECT_NE(r.err.find("--out"), std::string::npos);
  r = invoke({"eval", "--data", ".", "--model", "lstm", "--out", "x.json"});
  expect_single_line_error(r);
  r = invoke({"simulate", "--grid", "32by32", "--out", "x"});
  expect_single_line_error(r);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, DetectBuildsDynamicsDataset) {
  fixtures::TempDir dir("cli_detect");
  const std::string d = dir.path.string();
  const std::vector<std::vector<Point>> moves{
      {{4, 0}, {0, 3}, {-5, 1}, {2, -6}, {3, 3}, {-1, 4}},
      {{-3, 2}, {6, 0}, {1, 5}, {-4, -4}, {2, 1}, {0, -3}},
  };
  for (int s = 0; s < 2; ++s) {
    for (int i = 0; i < 2; ++i) {
      GazeRecording rec = fixtures::smooth_recording(moves[static_cast<std::size_t>(i)], 150, 30 + 10 * s, 180);
      rec.subject_id = "p" + std::to_string(s);
      rec.image_id = "i" + std::to_string(i);
      io::write_recording(dir / ("raw/" + rec.subject_id + "_" + rec.image_id + ".csv"), rec);
    }
  }
  const Outcome r = invoke({"detect", "--in", d + "/raw", "--grid", "16x16", "--out", d + "/data"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.err, "");
  const Dataset data = io::read_dataset(dir / "data");
  ASSERT_EQ(data.items.size(), 4u);
  EXPECT_TRUE(std::isfinite(data.vigor_rate));
  EXPECT_EQ(data.grid.rows, 16u);
  for (const auto& it : data.items) {
    ASSERT_EQ(it.features.size(), 6u);
    for (const auto& f : it.features) {
      EXPECT_GT(f.velocity, 0.0);
      EXPECT_TRUE(f.vigor_x > 0.0 || f.vigor_y > 0.0);  // an axis without movement has none
    }
  }
  fs::create_directories(dir / "none");
  expect_single_line_error(invoke({"detect", "--in", d + "/none", "--out", d + "/x"}));
}
