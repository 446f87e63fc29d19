#pragma once

// Command-line front end. Everything lives here so tests can drive the tool
// in-process; main.cpp only forwards argv.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gazeid/gazeid.hpp"

namespace gazeid::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Kind { kString, kUInt, kNumber, kBool, kNumberList, kBoolList };

struct KeySpec {
  Kind kind;
  bool is_path;  // paths and thread counts stay out of the provenance echo
};

inline const std::map<std::string, KeySpec>& key_table() {
  static const std::map<std::string, KeySpec> table{
      {"seed", {Kind::kUInt, false}},
      {"threads", {Kind::kUInt, true}},
      {"model", {Kind::kString, false}},
      {"classifier", {Kind::kString, false}},
      {"grid", {Kind::kString, false}},
      {"extent_deg", {Kind::kNumberList, false}},
      {"out", {Kind::kString, true}},
      {"in", {Kind::kString, true}},
      {"data", {Kind::kString, true}},
      {"params", {Kind::kString, true}},
      {"info", {Kind::kString, true}},
      {"save_info", {Kind::kString, true}},
      {"svm", {Kind::kString, true}},
      {"models", {Kind::kString, true}},
      {"features", {Kind::kString, true}},
      {"per_subject", {Kind::kBool, false}},
      {"n_users", {Kind::kUInt, false}},
      {"n_images", {Kind::kUInt, false}},
      {"T", {Kind::kUInt, false}},
      {"delta", {Kind::kNumber, false}},
      {"train_fraction", {Kind::kNumber, false}},
      {"n_splits", {Kind::kUInt, false}},
      {"cv_folds", {Kind::kUInt, false}},
      {"c_grid", {Kind::kNumberList, false}},
      {"ridge_grid", {Kind::kNumberList, false}},
      {"normalize_grid", {Kind::kBoolList, false}},
      {"max_k", {Kind::kUInt, false}},
      {"rho", {Kind::kNumber, false}},
      {"max_iterations", {Kind::kUInt, false}},
      {"C", {Kind::kNumber, false}},
      {"ridge_epsilon", {Kind::kNumber, false}},
      {"normalize", {Kind::kBool, false}},
      {"k", {Kind::kUInt, false}},
  };
  return table;
}

inline bool kind_matches(Kind kind, const json& v) {
  switch (kind) {
    case Kind::kString: return v.is_string();
    case Kind::kUInt: return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    case Kind::kNumber: return v.is_number();
    case Kind::kBool: return v.is_boolean();
    case Kind::kNumberList:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); });
    case Kind::kBoolList:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_boolean(); });
  }
  return false;
}

inline double parse_number(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size() && !s.empty(), ErrorCode::kInvalidArgument,
          what + ": '" + s + "' is not a number");
  return v;
}

inline bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw Error(ErrorCode::kInvalidArgument, what + ": expected true or false, got '" + s + "'");
}

inline json flag_value(Kind kind, const std::string& s, const std::string& flag) {
  const std::string what = "option " + flag;
  switch (kind) {
    case Kind::kString: return s;
    case Kind::kUInt: {
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      require(ec == std::errc() && ptr == s.data() + s.size() && !s.empty(),
              ErrorCode::kInvalidArgument, what + ": '" + s + "' is not a non-negative integer");
      return v;
    }
    case Kind::kNumber: return parse_number(s, what);
    case Kind::kBool: return parse_bool(s, what);
    case Kind::kNumberList:
    case Kind::kBoolList: {
      json arr = json::array();
      for (const auto& part : io::split_commas(s)) {
        if (kind == Kind::kNumberList) {
          arr.push_back(parse_number(part, what));
        } else {
          arr.push_back(parse_bool(part, what));
        }
      }
      return arr;
    }
  }
  return nullptr;
}

/// Merged settings: config file first, command-line flags on top.
struct Settings {
  json values = json::object();

  bool has(const std::string& key) const { return values.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? values.at(key).get<T>() : fallback;
  }

  std::string path(const std::string& key, const std::string& flag) const {
    require(has(key), ErrorCode::kInvalidArgument, "missing required option " + flag);
    return values.at(key).get<std::string>();
  }

  std::uint64_t seed() const { return get<std::uint64_t>("seed", 1); }
  std::size_t threads() const { return std::max<std::size_t>(1, get<std::size_t>("threads", 1)); }

  /// Everything that shapes the result; paths and thread count left out so
  /// re-runs elsewhere or with more threads produce identical files.
  io::Provenance provenance(const std::string& command) const {
    json echo = json::object();
    echo["command"] = command;
    for (const auto& [key, v] : values.items()) {
      if (!key_table().at(key).is_path) echo[key] = v;
    }
    return io::Provenance::of(echo, seed());
  }
};

inline json load_config(const std::string& path) {
  const json cfg = io::read_json(path);
  require(cfg.is_object(), ErrorCode::kParse, path + ": config must be a JSON object");
  for (const auto& [key, v] : cfg.items()) {
    const auto it = key_table().find(key);
    require(it != key_table().end(), ErrorCode::kInvalidArgument,
            path + ": unknown config key '" + key + "'");
    require(kind_matches(it->second.kind, v), ErrorCode::kInvalidArgument,
            path + ": config key '" + key + "' has the wrong type");
  }
  return cfg;
}

inline GridSpec parse_grid(const std::string& s, const Settings& st) {
  const std::size_t x = s.find('x');
  require(x != std::string::npos, ErrorCode::kInvalidArgument, "grid must look like ROWSxCOLS, got '" + s + "'");
  GridSpec g;
  const std::string r = s.substr(0, x), c = s.substr(x + 1);
  const auto r_ok = std::from_chars(r.data(), r.data() + r.size(), g.rows);
  const auto c_ok = std::from_chars(c.data(), c.data() + c.size(), g.cols);
  require(r_ok.ec == std::errc() && r_ok.ptr == r.data() + r.size() && c_ok.ec == std::errc() &&
              c_ok.ptr == c.data() + c.size() && !r.empty() && !c.empty(),
          ErrorCode::kInvalidArgument, "grid must look like ROWSxCOLS, got '" + s + "'");
  if (st.has("extent_deg")) {
    const auto e = st.values.at("extent_deg").get<std::vector<double>>();
    require(e.size() == 2, ErrorCode::kInvalidArgument, "extent_deg needs [width, height]");
    g.width_deg = e[0];
    g.height_deg = e[1];
  }
  g.validate();
  return g;
}

inline Dataset load_data(const Settings& st) {
  Dataset data = io::read_dataset(st.path("data", "--data"));
  if (st.has("grid")) {
    const GridSpec g = parse_grid(st.values.at("grid").get<std::string>(), st);
    require(data.saliency.empty() || g == data.grid, ErrorCode::kDimensionMismatch,
            "--grid does not match the saliency maps stored with the dataset");
    data.grid = g;
  }
  return data;
}

inline std::vector<std::size_t> all_items(const Dataset& data) {
  std::vector<std::size_t> v(data.items.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

inline SceneWalkFitOptions scenewalk_options(const Settings& st) {
  SceneWalkFitOptions opt;
  opt.rho = st.get<double>("rho", 0.01);
  opt.max_iterations = static_cast<int>(st.get<std::size_t>("max_iterations", 200));
  opt.threads = st.threads();
  return opt;
}

inline std::string model_name(const Settings& st) {
  const std::string m = st.get<std::string>("model", "markov");
  model_family("bayes", m);  // validates the name
  return m;
}

inline void with_provenance(json& j, const io::Provenance& prov) { j["provenance"] = prov.to_json(); }

// ---------------------------------------------------------------- commands

inline int cmd_detect(const Settings& st, std::ostream& out, std::ostream& err) {
  const fs::path in = st.path("in", "--in");
  const fs::path dest = st.path("out", "--out");
  require(fs::is_directory(in), ErrorCode::kIo, "'" + in.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  require(!files.empty(), ErrorCode::kInsufficientData, "no recordings found in '" + in.string() + "'");
  std::sort(files.begin(), files.end());

  std::vector<GazeRecording> recs;
  std::vector<Scanpath> paths;
  for (const auto& f : files) {
    std::size_t dropped = 0;
    GazeRecording rec = io::read_recording(f, &dropped);
    if (dropped) err << "warning: " << f.string() << ": dropped " << dropped << " samples with missing gaze\n";
    try {
      Scanpath p = detect_saccades(rec);
      if (p.size() < 2) {
        err << "warning: " << f.string() << ": fewer than 2 fixations, skipped\n";
        continue;
      }
      p.subject_id = rec.subject_id;
      p.image_id = rec.image_id;
      paths.push_back(std::move(p));
      recs.push_back(std::move(rec));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateRecording) throw;
      err << "warning: " << f.string() << ": " << e.what() << ", skipped\n";
    }
  }
  require(!paths.empty(), ErrorCode::kInsufficientData, "no recording produced a scanpath");

  std::map<std::string, std::vector<std::pair<double, double>>> pairs;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    auto ms = main_sequence_pairs(paths[i], recs[i]);
    auto& dst = pairs[recs[i].subject_id];
    dst.insert(dst.end(), ms.begin(), ms.end());
  }
  std::optional<VigorFit> vigor;
  try {
    vigor = fit_vigor_rate(pairs);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInsufficientData) throw;
    err << "warning: vigor channels left empty: " << e.what() << "\n";
  }

  Dataset data;
  data.grid = parse_grid(st.get<std::string>("grid", "128x128"), st);
  if (vigor) data.vigor_rate = vigor->b_star;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    DatasetItem item;
    item.subject_id = recs[i].subject_id;
    item.image_id = recs[i].image_id;
    item.features = extract_features(paths[i], &recs[i], vigor ? &*vigor : nullptr, {.dynamics = true});
    item.path = std::move(paths[i]);
    data.items.push_back(std::move(item));
  }
  io::write_dataset(dest, data, st.provenance("detect"));
  out << "detected " << data.items.size() << " scanpaths from " << files.size() << " recordings\n";
  return 0;
}

inline int cmd_fit(const Settings& st, std::ostream& out, std::ostream&) {
  const std::string model = model_name(st);
  const fs::path dest = st.path("out", "--out");
  const Dataset data = load_data(st);
  const bool per_subject = st.get<bool>("per_subject", false);
  const auto prov = st.provenance("fit");
  const auto by_subject = data.items_by_subject();
  const auto subjects = data.subjects();

  json result = json::object();
  if (model == "scenewalk") {
    const auto saliency = detail::saliency_for(data, all_items(data));
    const auto opt = scenewalk_options(st);
    auto fit_items = [&](const std::vector<std::size_t>& items) {
      std::vector<SceneWalkTrial> trials;
      for (std::size_t i : items) trials.push_back({&data.items[i].path, &saliency.at(data.items[i].image_id)});
      return io::scenewalk_report_json(fit_scenewalk(trials, SceneWalkParams{}, opt));
    };
    if (per_subject) {
      json fits = json::object();
      for (std::size_t y = 0; y < subjects.size(); ++y) fits[subjects[y]] = fit_items(by_subject[y]);
      result["fits"] = fits;
    } else {
      result = fit_items(all_items(data));
    }
  } else {
    const MarkovConfig config = model == "markov-dyn" ? MarkovConfig::dynamics() : MarkovConfig::base();
    auto fit_items = [&](const std::vector<std::size_t>& items) {
      std::vector<std::vector<SaccadeFeatures>> seqs;
      for (std::size_t i : items) seqs.push_back(data.items[i].features);
      MarkovModelParams m = fit_markov(seqs, config);
      m.vigor_rate = data.vigor_rate;
      return io::markov_to_json(m);
    };
    if (per_subject) {
      json models = json::object();
      for (std::size_t y = 0; y < subjects.size(); ++y) models[subjects[y]] = fit_items(by_subject[y]);
      result["models"] = models;
    } else {
      result = fit_items(all_items(data));
    }
  }
  with_provenance(result, prov);
  io::write_json(dest, result);
  out << "fitted " << model << (per_subject ? " per subject" : "") << " on " << data.items.size()
      << " scanpaths\n";
  return 0;
}

inline int cmd_scores(const Settings& st, std::ostream& out, std::ostream&) {
  const std::string model = model_name(st);
  const std::string params_path = st.path("params", "--params");
  const fs::path dest = st.path("out", "--out");
  const Dataset data = load_data(st);
  const json params = io::read_json(params_path);

  std::vector<FisherScore> scores;
  if (model == "scenewalk") {
    require(params.contains("params"), ErrorCode::kParse, params_path + ": not a SceneWalk fit report");
    const SceneWalkParams p = io::scenewalk_params_from_json(params.at("params"), params_path);
    const auto saliency = detail::saliency_for(data, all_items(data));
    std::vector<SceneWalkTrial> trials;
    for (const auto& it : data.items) trials.push_back({&it.path, &saliency.at(it.image_id)});
    scores = compute_scenewalk_scores(trials, p, st.threads());
  } else {
    const MarkovModelParams m = io::markov_from_json(params, params_path);
    std::vector<std::vector<SaccadeFeatures>> seqs;
    for (const auto& it : data.items) seqs.push_back(it.features);
    scores = compute_markov_scores(seqs, m, st.threads());
  }

  FisherInformation info;
  if (st.has("info")) {
    const std::string p = st.path("info", "--info");
    info = io::information_from_json(io::read_json(p), p);
  } else {
    info = estimate_information(scores, st.get<double>("ridge_epsilon", 1e-3));
  }
  const auto prov = st.provenance("scores");
  if (st.has("save_info")) {
    json j = io::information_to_json(info);
    with_provenance(j, prov);
    io::write_json(st.path("save_info", "--save-info"), j);
  }
  const bool normalize = st.get<bool>("normalize", true);
  io::FeatureMatrix fm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    fm.subject_ids.push_back(data.items[i].subject_id);
    fm.image_ids.push_back(data.items[i].image_id);
    fm.rows.push_back(feature_map(scores[i], info, normalize));
  }
  io::atomic_write(dest, io::feature_matrix_csv(fm, &prov));
  out << "wrote " << fm.rows.size() << " feature vectors of dimension " << info.dim() << "\n";
  return 0;
}

inline int cmd_train(const Settings& st, std::ostream& out, std::ostream&) {
  const io::FeatureMatrix fm = io::read_feature_matrix(st.path("features", "--features"));
  const fs::path dest = st.path("out", "--out");
  std::vector<std::string> names(fm.subject_ids);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::vector<int> labels;
  for (const auto& s : fm.subject_ids) {
    labels.push_back(static_cast<int>(std::lower_bound(names.begin(), names.end(), s) - names.begin()));
  }
  const LinearModel m = train_linear(fm.rows, labels, {.C = st.get<double>("C", 1.0), .seed = st.seed()});
  json j = io::classifier_to_json(m, names);
  with_provenance(j, st.provenance("train"));
  io::write_json(dest, j);
  out << "trained " << names.size() << " one-vs-rest classifiers on " << fm.rows.size() << " examples\n";
  return 0;
}

inline int cmd_identify(const Settings& st, std::ostream& out, std::ostream&) {
  const std::string classifier = st.get<std::string>("classifier", "fisher-svm");
  model_family(classifier, "markov");  // validates the name
  const std::size_t k = st.get<std::size_t>("k", 1);
  require(k >= 1, ErrorCode::kInvalidArgument, "k must be >= 1");
  const fs::path dest = st.path("out", "--out");

  // Candidate names, and per item: true subject, image, score per candidate.
  std::vector<std::string> names, subject_of, image_of;
  std::vector<std::vector<double>> score_of;
  if (classifier == "fisher-svm") {
    const std::string svm_path = st.path("svm", "--svm");
    const auto [m, n] = io::classifier_from_json(io::read_json(svm_path), svm_path);
    names = n;
    const io::FeatureMatrix fm = io::read_feature_matrix(st.path("features", "--features"));
    subject_of = fm.subject_ids;
    image_of = fm.image_ids;
    for (const auto& row : fm.rows) score_of.push_back(decision_scores(m, row));
  } else {
    const std::string model = model_name(st);
    const std::string models_path = st.path("models", "--models");
    const json mj = io::read_json(models_path);
    const Dataset data = load_data(st);
    const std::string key = model == "scenewalk" ? "fits" : "models";
    require(mj.contains(key) && mj.at(key).is_object() && !mj.at(key).empty(), ErrorCode::kParse,
            models_path + ": expected per-subject '" + key + "' (from fit --per-subject)");
    std::vector<MarkovModelParams> markov;
    std::vector<SceneWalkParams> sw;
    for (const auto& [name, v] : mj.at(key).items()) {
      names.push_back(name);
      if (model == "scenewalk") {
        sw.push_back(io::scenewalk_params_from_json(v.at("params"), models_path));
      } else {
        markov.push_back(io::markov_from_json(v, models_path));
      }
    }
    const auto saliency = model == "scenewalk" ? detail::saliency_for(data, all_items(data))
                                               : std::map<std::string, SaliencyMap>{};
    score_of.resize(data.items.size());
    parallel_for(data.items.size(), st.threads(), [&](std::size_t i) {
      const auto& it = data.items[i];
      for (std::size_t y = 0; y < names.size(); ++y) {
        score_of[i].push_back(model == "scenewalk"
                                  ? scenewalk_loglik(it.path, saliency.at(it.image_id), sw[y])
                                  : markov_loglik(it.features, markov[y]));
      }
    });
    for (const auto& it : data.items) {
      subject_of.push_back(it.subject_id);
      image_of.push_back(it.image_id);
    }
  }

  // Groups of k consecutive items per subject, in image order.
  std::map<std::string, std::vector<std::size_t>> per_subject;
  for (std::size_t i = 0; i < subject_of.size(); ++i) per_subject[subject_of[i]].push_back(i);
  std::string csv = st.provenance("identify").csv_comment();
  csv += "subject_id,group,image_ids,predicted_id,correct\n";
  std::size_t groups = 0, correct = 0;
  for (auto& [subject, items] : per_subject) {
    std::sort(items.begin(), items.end(), [&](std::size_t a, std::size_t b) { return image_of[a] < image_of[b]; });
    for (std::size_t g = 0; (g + 1) * k <= items.size(); ++g) {
      std::vector<double> total(names.size(), 0.0);
      std::string images;
      for (std::size_t j = g * k; j < (g + 1) * k; ++j) {
        for (std::size_t y = 0; y < names.size(); ++y) total[y] += score_of[items[j]][y];
        images += (images.empty() ? "" : ";") + image_of[items[j]];
      }
      const std::string& predicted = names[argmax_first(total)];
      const bool ok = predicted == subject;
      csv += subject + "," + std::to_string(g) + "," + images + "," + predicted + "," + (ok ? "1" : "0") + "\n";
      ++groups;
      correct += ok ? 1 : 0;
    }
  }
  require(groups > 0, ErrorCode::kInsufficientData,
          "no subject has " + std::to_string(k) + " items to form a group");
  io::atomic_write(dest, csv);
  out << "accuracy at k=" << k << ": " << io::format_double(static_cast<double>(correct) / static_cast<double>(groups))
      << " over " << groups << " groups\n";
  return 0;
}

inline int cmd_simulate(const Settings& st, std::ostream& out, std::ostream&) {
  const fs::path dest = st.path("out", "--out");
  SyntheticCohortSpec spec;
  spec.family = cohort_family_from_string(st.get<std::string>("model", "markov"));
  spec.n_users = st.get<std::size_t>("n_users", spec.n_users);
  spec.n_images = st.get<std::size_t>("n_images", spec.n_images);
  spec.T = st.get<std::size_t>("T", spec.T);
  spec.delta = st.get<double>("delta", spec.delta);
  spec.seed = st.seed();
  if (st.has("grid")) spec.grid = parse_grid(st.values.at("grid").get<std::string>(), st);
  const Cohort cohort = generate_cohort(spec, st.threads());
  const auto prov = st.provenance("simulate");
  io::write_dataset(dest, cohort.data, prov);

  json users = json::object();
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    users[subject_name(u)] = spec.family == CohortFamily::kSceneWalk
                                 ? io::scenewalk_params_json(cohort.scenewalk_users[u])
                                 : io::markov_to_json(cohort.markov_users[u]);
  }
  json gen{{"family", to_string(spec.family)}, {"users", users}};
  with_provenance(gen, prov);
  io::write_json(dest / "generator.json", gen);
  out << "simulated " << cohort.data.items.size() << " scanpaths for " << spec.n_users << " users\n";
  return 0;
}

inline int cmd_eval(const Settings& st, std::ostream& out, std::ostream& err) {
  const ModelFamily family =
      model_family(st.get<std::string>("classifier", "bayes"), st.get<std::string>("model", "markov"));
  fs::path dest = st.path("out", "--out");
  const Dataset data = load_data(st);
  EvalProtocol proto;
  proto.train_fraction = st.get<double>("train_fraction", proto.train_fraction);
  proto.n_splits = st.get<std::size_t>("n_splits", proto.n_splits);
  proto.cv_folds = st.get<std::size_t>("cv_folds", proto.cv_folds);
  proto.c_grid = st.get<std::vector<double>>("c_grid", proto.c_grid);
  proto.ridge_grid = st.get<std::vector<double>>("ridge_grid", proto.ridge_grid);
  proto.normalize_grid = st.get<std::vector<bool>>("normalize_grid", proto.normalize_grid);
  proto.max_k = st.get<std::size_t>("max_k", proto.max_k);
  proto.seed = st.seed();
  proto.threads = st.threads();
  proto.scenewalk_fit = scenewalk_options(st);
  const ProtocolResult r = run_protocol(data, family, proto);
  for (const auto& w : r.warnings) err << "warning: " << w << "\n";

  const auto prov = st.provenance("eval");
  io::write_json(dest, io::results_json(r, prov));
  fs::path csv = dest;
  csv.replace_extension(".csv");
  if (csv == dest) csv += ".csv";
  io::atomic_write(csv, io::results_csv(r, prov));
  for (const auto& p : r.curve) {
    out << to_string(family) << " k=" << p.k << " acc=" << io::format_double(p.mean_acc)
        << " stderr=" << io::format_double(p.stderr_acc) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- driver

inline std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

/// Parses arguments and runs one subcommand. Returns the process exit code:
/// 0 on success, 1 on a runtime failure, 2 on a usage error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Identify viewers from their eye movements"};
  app.set_version_flag("--version", std::string(io::kToolVersion));
  app.require_subcommand(1);

  struct Flag {
    std::string key;
    std::string name;
    CLI::Option* opt = nullptr;
  };
  std::map<std::string, std::vector<Flag>> flags;
  std::map<std::string, std::string> raw;  // "<command>/<key>" -> value
  std::map<std::string, std::string> config_path;

  auto command = [&](const std::string& name, const std::string& about,
                     const std::vector<std::pair<std::string, std::string>>& opts) {
    CLI::App* sub = app.add_subcommand(name, about);
    sub->add_option("--config", config_path[name], "JSON config; flags take precedence");
    auto add = [&](const std::string& key, const std::string& flag, const std::string& help) {
      Flag f{key, flag};
      if (key == "per_subject") {
        f.opt = sub->add_flag(flag, help);
      } else {
        f.opt = sub->add_option(flag, raw[name + "/" + key], help);
      }
      flags[name].push_back(f);
    };
    add("seed", "--seed", "random seed");
    add("threads", "--threads", "worker threads (results do not depend on it)");
    add("out", "--out", "output path");
    add("grid", "--grid", "saliency grid as ROWSxCOLS");
    for (const auto& [key, help] : opts) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      add(key, flag, help);
    }
    return sub;
  };

  command("detect", "detect saccades in raw recordings and write a dataset",
          {{"in", "directory of recordings (CSV + JSON sidecar)"}});
  command("fit", "fit a model to a dataset",
          {{"data", "dataset directory"}, {"model", "markov, markov-dyn or scenewalk"},
           {"per_subject", "fit one model per subject"}, {"rho", "SceneWalk regularization"},
           {"max_iterations", "SceneWalk optimizer iterations"}});
  command("scores", "export Fisher feature vectors",
          {{"data", "dataset directory"}, {"model", "markov, markov-dyn or scenewalk"},
           {"params", "pooled model from fit"}, {"info", "stored Fisher information"},
           {"save_info", "write the Fisher information here"},
           {"ridge_epsilon", "relative ridge"}, {"normalize", "scale features to unit length"}});
  command("train", "train the one-vs-rest SVM", {{"features", "feature CSV from scores"}, {"C", "SVM cost"}});
  command("identify", "identify the viewer of groups of k scanpaths",
          {{"classifier", "bayes or fisher-svm"}, {"features", "feature CSV (fisher-svm)"},
           {"svm", "trained classifier (fisher-svm)"}, {"data", "dataset directory (bayes)"},
           {"models", "per-subject models (bayes)"}, {"model", "markov, markov-dyn or scenewalk"},
           {"k", "scanpaths per decision"}});
  command("simulate", "generate a synthetic cohort",
          {{"model", "markov, markov-dyn or scenewalk"}, {"n_users", "users"}, {"n_images", "images per user"},
           {"T", "fixations per scanpath"}, {"delta", "between-user spread"}});
  command("eval", "run the identification protocol",
          {{"data", "dataset directory"}, {"model", "markov, markov-dyn or scenewalk"},
           {"classifier", "bayes or fisher-svm"}, {"n_splits", "random splits"}, {"max_k", "largest k"},
           {"rho", "SceneWalk regularization"}, {"max_iterations", "SceneWalk optimizer iterations"}});

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::CallForVersion&) {
      out << io::kToolVersion << "\n";
      return 0;
    } catch (const CLI::ParseError& e) {
      err << "error: usage: " << one_line(e.what()) << "\n";
      return 2;
    }
    const std::string name = app.get_subcommands().front()->get_name();
    Settings st;
    if (!config_path[name].empty()) st.values = load_config(config_path[name]);
    for (const auto& f : flags[name]) {
      if (f.opt->count() == 0) continue;
      st.values[f.key] = f.key == "per_subject"
                             ? json(true)
                             : flag_value(key_table().at(f.key).kind, raw[name + "/" + f.key], f.name);
    }
    if (name == "detect") return cmd_detect(st, out, err);
    if (name == "fit") return cmd_fit(st, out, err);
    if (name == "scores") return cmd_scores(st, out, err);
    if (name == "train") return cmd_train(st, out, err);
    if (name == "identify") return cmd_identify(st, out, err);
    if (name == "simulate") return cmd_simulate(st, out, err);
    return cmd_eval(st, out, err);
  } catch (const Error& e) {
    err << "error: " << one_line(e.what()) << "\n";
  } catch (const fs::filesystem_error& e) {
    err << "error: io_error: " << one_line(e.what()) << "\n";
  } catch (const json::exception& e) {
    err << "error: parse_error: " << one_line(e.what()) << "\n";
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << "\n";
  }
  return 1;
}

}  // namespace gazeid::cli
