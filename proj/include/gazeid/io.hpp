#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazeid/classify.hpp"
#include "gazeid/dataset.hpp"
#include "gazeid/error.hpp"
#include "gazeid/fisher.hpp"
#include "gazeid/markov.hpp"
#include "gazeid/protocol.hpp"
#include "gazeid/scenewalk.hpp"

#ifndef GAZEID_VERSION
#define GAZEID_VERSION "0.0.0"
#endif

namespace gazeid::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kToolVersion = GAZEID_VERSION;

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// What produced an artifact. The config echo must not contain anything that
/// varies between equivalent runs (thread count, timestamps).
struct Provenance {
  std::string tool_version = kToolVersion;
  std::string config_hash;
  std::uint64_t seed = 0;
  json config = json::object();

  static Provenance of(const json& config, std::uint64_t seed) {
    Provenance p;
    p.config = config;
    p.seed = seed;
    // nlohmann keeps object keys sorted, so dump() is canonical.
    p.config_hash = fnv1a_hex(config.dump());
    return p;
  }

  json to_json() const {
    return {{"tool_version", tool_version}, {"config_hash", config_hash}, {"seed", seed},
            {"config", config}};
  }

  std::string csv_comment() const {
    return "# tool_version=" + tool_version + " config_hash=" + config_hash +
           " seed=" + std::to_string(seed) + "\n";
  }
};

/// Writes to a temporary sibling and renames it over `path`.
inline void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    require(static_cast<bool>(out), ErrorCode::kIo, "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::kIo, "cannot rename '" + tmp.string() + "' to '" + path.string() +
                                    "': " + ec.message());
  }
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

/// Shortest text that parses back to the same double; nan and inf spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// ---------------------------------------------------------------- CSV

struct CsvRow {
  std::size_t line = 0;  // 1-based line number in the file
  std::vector<std::string> fields;
};

struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  [[noreturn]] void fail(const CsvRow& row, std::size_t col, const std::string& what) const {
    const std::string name = col < header.size() ? header[col] : std::to_string(col + 1);
    throw Error(ErrorCode::kParse, source + ": line " + std::to_string(row.line) + ", column '" +
                                       name + "': " + what);
  }

  double number(const CsvRow& row, std::size_t col) const {
    const std::string& s = row.fields[col];
    if (s == "nan" || s == "NaN" || s == "NAN") return kNaN;
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    double v = 0.0;
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) fail(row, col, "not a number: '" + s + "'");
    return v;
  }

  long long integer(const CsvRow& row, std::size_t col) const {
    const std::string& s = row.fields[col];
    long long v = 0;
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) fail(row, col, "not an integer: '" + s + "'");
    return v;
  }
};

inline std::vector<std::string> split_commas(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? comma : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    out.emplace_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Parses comma-separated text; lines starting with '#' and blank lines are
/// skipped. When `expected_header` is non-empty it must match exactly.
inline CsvTable parse_csv(const std::string& text, const std::string& source,
                          const std::vector<std::string>& expected_header = {},
                          std::size_t first_line = 1) {
  CsvTable t;
  t.source = source;
  std::istringstream in(text);
  std::string line;
  std::size_t n = first_line - 1;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_commas(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      if (!expected_header.empty() && t.header != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw Error(ErrorCode::kParse,
                    source + ": line " + std::to_string(n) + ": expected header '" + want + "'");
      }
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw Error(ErrorCode::kParse, source + ": line " + std::to_string(n) + ": expected " +
                                         std::to_string(t.header.size()) + " fields, found " +
                                         std::to_string(fields.size()));
    }
    t.rows.push_back({n, std::move(fields)});
  }
  require(have_header, ErrorCode::kParse, source + ": missing header");
  return t;
}

inline CsvTable read_csv(const fs::path& path, const std::vector<std::string>& expected_header = {}) {
  return parse_csv(read_file(path), path.string(), expected_header);
}

// ---------------------------------------------------------------- gaze data

inline const std::vector<std::string> kRecordingHeader{"t_ms", "x_deg", "y_deg"};
inline const std::vector<std::string> kScanpathHeader{"fix_index", "x_deg", "y_deg", "dur_ms"};
inline const std::vector<std::string> kFeatureHeader{
    "sacc_index", "type", "amplitude", "duration", "velocity", "acceleration",
    "ratio_x", "ratio_y", "vigor_x", "vigor_y"};

/// Reads `<name>.csv` samples plus the sidecar `<name>.json` holding
/// subject_id, image_id and sampling_rate_hz. Rows with a NaN coordinate are
/// dropped; `dropped` receives their count.
inline GazeRecording read_recording(const fs::path& csv_path, std::size_t* dropped = nullptr) {
  fs::path sidecar = csv_path;
  sidecar.replace_extension(".json");
  const json meta = read_json(sidecar);
  GazeRecording rec;
  try {
    rec.subject_id = meta.at("subject_id").get<std::string>();
    rec.image_id = meta.at("image_id").get<std::string>();
    rec.sampling_rate_hz = meta.at("sampling_rate_hz").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, sidecar.string() + ": " + e.what());
  }
  const CsvTable t = read_csv(csv_path, kRecordingHeader);
  std::size_t skipped = 0;
  for (const auto& row : t.rows) {
    const GazeSample s{t.number(row, 0), t.number(row, 1), t.number(row, 2)};
    if (std::isnan(s.x_deg) || std::isnan(s.y_deg)) {
      ++skipped;
      continue;
    }
    if (!std::isfinite(s.t_ms) || !std::isfinite(s.x_deg) || !std::isfinite(s.y_deg)) {
      t.fail(row, std::isfinite(s.t_ms) ? 1 : 0, "non-finite value");
    }
    rec.samples.push_back(s);
  }
  if (dropped) *dropped = skipped;
  rec.validate();
  return rec;
}

inline void write_recording(const fs::path& csv_path, const GazeRecording& rec) {
  std::string out = "t_ms,x_deg,y_deg\n";
  for (const auto& s : rec.samples) {
    out += format_double(s.t_ms) + "," + format_double(s.x_deg) + "," + format_double(s.y_deg) + "\n";
  }
  atomic_write(csv_path, out);
  fs::path sidecar = csv_path;
  sidecar.replace_extension(".json");
  write_json(sidecar, {{"subject_id", rec.subject_id},
                       {"image_id", rec.image_id},
                       {"sampling_rate_hz", rec.sampling_rate_hz}});
}

inline std::string scanpath_csv(const Scanpath& path, const Provenance* prov = nullptr) {
  std::string out = prov ? prov->csv_comment() : "";
  out += "fix_index,x_deg,y_deg,dur_ms\n";
  for (std::size_t i = 0; i < path.fixations.size(); ++i) {
    const auto& f = path.fixations[i];
    out += std::to_string(i) + "," + format_double(f.q.x) + "," + format_double(f.q.y) + "," +
           format_double(f.duration_ms) + "\n";
  }
  return out;
}

inline Scanpath read_scanpath(const fs::path& path) {
  const CsvTable t = read_csv(path, kScanpathHeader);
  Scanpath s;
  for (const auto& row : t.rows) {
    if (t.integer(row, 0) != static_cast<long long>(s.fixations.size())) {
      t.fail(row, 0, "fixation indices must count up from 0");
    }
    const Fixation f{{t.number(row, 1), t.number(row, 2)}, t.number(row, 3)};
    if (!std::isfinite(f.q.x)) t.fail(row, 1, "non-finite value");
    if (!std::isfinite(f.q.y)) t.fail(row, 2, "non-finite value");
    if (!(f.duration_ms > 0.0) || !std::isfinite(f.duration_ms)) t.fail(row, 3, "duration must be positive");
    s.fixations.push_back(f);
  }
  require(s.fixations.size() >= 2, ErrorCode::kParse,
          path.string() + ": a scanpath needs at least 2 fixations");
  return s;
}

inline std::string features_csv(const std::vector<SaccadeFeatures>& features,
                                const Provenance* prov = nullptr) {
  std::string out = prov ? prov->csv_comment() : "";
  out += "sacc_index,type,amplitude,duration,velocity,acceleration,ratio_x,ratio_y,vigor_x,vigor_y\n";
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    out += std::to_string(i) + "," + std::to_string(static_cast<int>(f.type));
    for (ChannelId c : kDynamicsChannels) out += "," + format_double(f.channel(c));
    out += "\n";
  }
  return out;
}

inline std::vector<SaccadeFeatures> read_features(const fs::path& path) {
  const CsvTable t = read_csv(path, kFeatureHeader);
  std::vector<SaccadeFeatures> out;
  for (const auto& row : t.rows) {
    if (t.integer(row, 0) != static_cast<long long>(out.size())) {
      t.fail(row, 0, "saccade indices must count up from 0");
    }
    const long long type = t.integer(row, 1);
    if (type < 1 || type > 4) t.fail(row, 1, "saccade type must be 1..4");
    SaccadeFeatures f;
    f.type = static_cast<SaccadeType>(type);
    for (std::size_t c = 0; c < kDynamicsChannels.size(); ++c) {
      f.channel(kDynamicsChannels[c]) = t.number(row, 2 + c);
    }
    out.push_back(f);
  }
  return out;
}

/// Fills direction and displacement from the fixations the features belong to.
inline void attach_geometry(std::vector<SaccadeFeatures>& features, const Scanpath& path) {
  for (std::size_t t = 0; t < features.size() && t + 1 < path.size(); ++t) {
    auto& f = features[t];
    f.dx = path.fixations[t + 1].q.x - path.fixations[t].q.x;
    f.dy = path.fixations[t + 1].q.y - path.fixations[t].q.y;
    f.direction = direction_degrees(f.dx, f.dy);
  }
}

// ---------------------------------------------------------------- saliency

inline std::string saliency_text(const SaliencyMap& m) {
  const json header{{"rows", m.grid.rows},
                    {"cols", m.grid.cols},
                    {"extent_deg", {m.grid.width_deg, m.grid.height_deg}}};
  std::string out = header.dump() + "\n";
  for (std::size_t r = 0; r < m.grid.rows; ++r) {
    for (std::size_t c = 0; c < m.grid.cols; ++c) {
      if (c) out += ",";
      out += format_double(m.at(r, c));
    }
    out += "\n";
  }
  return out;
}

/// First line: JSON header {rows, cols, extent_deg: [width, height]}; then
/// one comma-separated line per grid row.
inline SaliencyMap read_saliency(const fs::path& path) {
  const std::string text = read_file(path);
  const std::size_t nl = text.find('\n');
  require(nl != std::string::npos, ErrorCode::kParse, path.string() + ": missing JSON header line");
  GridSpec grid;
  try {
    const json h = json::parse(text.substr(0, nl));
    grid.rows = h.at("rows").get<std::size_t>();
    grid.cols = h.at("cols").get<std::size_t>();
    grid.width_deg = h.at("extent_deg").at(0).get<double>();
    grid.height_deg = h.at("extent_deg").at(1).get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": line 1: " + e.what());
  }
  grid.validate();
  std::vector<double> values;
  values.reserve(grid.size());
  std::istringstream in(text.substr(nl + 1));
  std::string line;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    require(fields.size() == grid.cols, ErrorCode::kParse,
            path.string() + ": line " + std::to_string(n) + ": expected " +
                std::to_string(grid.cols) + " values, found " + std::to_string(fields.size()));
    CsvTable t;
    t.source = path.string();
    const CsvRow row{n, fields};
    for (std::size_t c = 0; c < fields.size(); ++c) values.push_back(t.number(row, c));
  }
  require(values.size() == grid.size(), ErrorCode::kParse,
          path.string() + ": expected " + std::to_string(grid.rows) + " rows of values");
  return SaliencyMap::from_values(grid, std::move(values));
}

// ---------------------------------------------------------------- models

inline json markov_to_json(const MarkovModelParams& m) {
  json channels = json::object();
  json order = json::array();
  for (std::size_t c = 0; c < m.channels.size(); ++c) {
    json cells = json::array();
    for (const auto& g : m.cells[c]) cells.push_back({{"alpha", g.alpha}, {"beta", g.beta}});
    const std::string name(channel_name(m.channels[c]));
    channels[name] = cells;
    order.push_back(name);
  }
  json j{{"config", m.config().name()},
         {"channel_order", order},
         {"pi", m.pi.pi},
         {"channels", channels}};
  j["b_star"] = std::isfinite(m.vigor_rate) ? json(m.vigor_rate) : json(nullptr);
  return j;
}

inline MarkovModelParams markov_from_json(const json& j, const std::string& source = "model") {
  MarkovModelParams m;
  try {
    const auto pi = j.at("pi").get<std::vector<double>>();
    require(pi.size() == 4, ErrorCode::kParse, source + ": pi must have 4 entries");
    std::copy(pi.begin(), pi.end(), m.pi.pi.begin());
    std::vector<std::string> order;
    if (j.contains("channel_order")) {
      order = j.at("channel_order").get<std::vector<std::string>>();
    } else {
      const std::string config = j.at("config").get<std::string>();
      const MarkovConfig c = config == "dynamics" ? MarkovConfig::dynamics() : MarkovConfig::base();
      for (ChannelId id : c.channels) order.emplace_back(channel_name(id));
    }
    for (const auto& name : order) {
      m.channels.push_back(channel_from_name(name));
      const json& cells = j.at("channels").at(name);
      require(cells.size() == 4, ErrorCode::kParse,
              source + ": channel '" + name + "' needs 4 Gamma cells");
      TypeGammas tg;
      for (std::size_t u = 0; u < 4; ++u) {
        tg[u] = {cells[u].at("alpha").get<double>(), cells[u].at("beta").get<double>()};
      }
      m.cells.push_back(tg);
    }
    m.vigor_rate = j.contains("b_star") && !j["b_star"].is_null() ? j["b_star"].get<double>() : kNaN;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, source + ": " + e.what());
  }
  m.validate();
  return m;
}

inline json scenewalk_params_json(const SceneWalkParams& p) {
  json j = json::object();
  const auto v = p.to_array();
  for (std::size_t k = 0; k < kSceneWalkParamCount; ++k) j[kSceneWalkParamNames[k]] = v[k];
  return j;
}

inline SceneWalkParams scenewalk_params_from_json(const json& j, const std::string& source) {
  std::array<double, kSceneWalkParamCount> v{};
  try {
    for (std::size_t k = 0; k < kSceneWalkParamCount; ++k) v[k] = j.at(kSceneWalkParamNames[k]).get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, source + ": " + e.what());
  }
  const auto p = SceneWalkParams::from_array(v);
  p.validate();
  return p;
}

inline json scenewalk_report_json(const SceneWalkFitResult& r) {
  return {{"params", scenewalk_params_json(r.params)},
          {"objective", r.objective},
          {"grad_norm", r.grad_norm},
          {"iterations", r.iterations},
          {"converged", r.converged}};
}

inline json classifier_to_json(const LinearModel& m, const std::vector<std::string>& names) {
  return {{"labels", names}, {"C", m.C}, {"weights", m.weights}, {"bias", m.bias}};
}

inline std::pair<LinearModel, std::vector<std::string>> classifier_from_json(
    const json& j, const std::string& source) {
  LinearModel m;
  std::vector<std::string> names;
  try {
    names = j.at("labels").get<std::vector<std::string>>();
    m.C = j.at("C").get<double>();
    m.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    m.bias = j.at("bias").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, source + ": " + e.what());
  }
  require(names.size() == m.weights.size() && names.size() == m.bias.size() && !names.empty(),
          ErrorCode::kParse, source + ": labels, weights and bias differ in length");
  for (std::size_t k = 0; k < names.size(); ++k) m.labels.push_back(static_cast<int>(k));
  return {m, names};
}

inline json information_to_json(const FisherInformation& info) {
  std::vector<std::vector<double>> rows(info.dim());
  for (std::size_t i = 0; i < info.dim(); ++i) {
    for (std::size_t k = 0; k < info.dim(); ++k) {
      rows[i].push_back(info.information(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
    }
  }
  return {{"information", rows}, {"ridge_epsilon", info.ridge_epsilon}, {"count", info.count}};
}

/// Rebuilds the regularized factor from a stored information matrix.
inline FisherInformation information_from_json(const json& j, const std::string& source) {
  std::vector<std::vector<double>> rows;
  FisherInformation info;
  try {
    rows = j.at("information").get<std::vector<std::vector<double>>>();
    info.ridge_epsilon = j.at("ridge_epsilon").get<double>();
    info.count = j.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, source + ": " + e.what());
  }
  const auto d = static_cast<Eigen::Index>(rows.size());
  require(d > 0, ErrorCode::kParse, source + ": empty information matrix");
  info.information.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    require(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) == d,
            ErrorCode::kParse, source + ": information matrix is not square");
    for (Eigen::Index k = 0; k < d; ++k) info.information(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  const double trace = info.information.trace();
  info.ridge = info.ridge_epsilon * (trace > 0.0 ? trace / static_cast<double>(d) : 1.0);
  Eigen::LLT<Eigen::MatrixXd> llt(info.regularized());
  require(llt.info() == Eigen::Success, ErrorCode::kNonFinite,
          source + ": stored information is not positive definite");
  info.factor = llt.matrixL();
  return info;
}

// ---------------------------------------------------------------- feature matrices

struct FeatureMatrix {
  std::vector<std::string> subject_ids;
  std::vector<std::string> image_ids;
  std::vector<std::vector<double>> rows;
};

inline std::string feature_matrix_csv(const FeatureMatrix& m, const Provenance* prov = nullptr) {
  std::string out = prov ? prov->csv_comment() : "";
  out += "subject_id,image_id";
  const std::size_t dim = m.rows.empty() ? 0 : m.rows.front().size();
  for (std::size_t k = 0; k < dim; ++k) out += ",phi_" + std::to_string(k + 1);
  out += "\n";
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    out += m.subject_ids[i] + "," + m.image_ids[i];
    for (double v : m.rows[i]) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

inline FeatureMatrix read_feature_matrix(const fs::path& path) {
  const CsvTable t = read_csv(path);
  require(t.header.size() >= 3 && t.header[0] == "subject_id" && t.header[1] == "image_id",
          ErrorCode::kParse, path.string() + ": expected header 'subject_id,image_id,phi_1,...'");
  for (std::size_t k = 2; k < t.header.size(); ++k) {
    require(t.header[k] == "phi_" + std::to_string(k - 1), ErrorCode::kParse,
            path.string() + ": unexpected column '" + t.header[k] + "'");
  }
  FeatureMatrix m;
  for (const auto& row : t.rows) {
    m.subject_ids.push_back(row.fields[0]);
    m.image_ids.push_back(row.fields[1]);
    std::vector<double> phi;
    for (std::size_t k = 2; k < row.fields.size(); ++k) {
      const double v = t.number(row, k);
      if (!std::isfinite(v)) t.fail(row, k, "non-finite feature value");
      phi.push_back(v);
    }
    m.rows.push_back(std::move(phi));
  }
  require(!m.rows.empty(), ErrorCode::kParse, path.string() + ": no feature rows");
  return m;
}

// ---------------------------------------------------------------- results

inline json results_json(const ProtocolResult& r, const Provenance& prov) {
  json splits = json::array();
  json hyper = json::array();
  for (const auto& s : r.splits) {
    json train = json::object(), test = json::object();
    for (std::size_t y = 0; y < r.subjects.size(); ++y) {
      train[r.subjects[y]] = s.train_images[y];
      test[r.subjects[y]] = s.test_images[y];
    }
    splits.push_back({{"split", s.index},
                      {"accuracy", s.accuracy},
                      {"groups", s.groups},
                      {"train_images", train},
                      {"test_images", test}});
    if (s.hyperparams) {
      hyper.push_back({{"split", s.index},
                       {"C", s.hyperparams->C},
                       {"ridge_epsilon", s.hyperparams->ridge_epsilon},
                       {"normalize", s.hyperparams->normalize},
                       {"cv_accuracy", s.hyperparams->cv_accuracy}});
    }
  }
  json curve = json::array();
  for (const auto& p : r.curve) {
    curve.push_back({{"k", p.k}, {"mean_acc", p.mean_acc}, {"stderr", p.stderr_acc}});
  }
  return {{"model_family", to_string(r.family)},
          {"subjects", r.subjects},
          {"splits", splits},
          {"curve", curve},
          {"hyperparams_chosen", hyper},
          {"warnings", r.warnings},
          {"provenance", prov.to_json()}};
}

inline std::string results_csv(const ProtocolResult& r, const Provenance& prov) {
  std::string out = prov.csv_comment();
  out += "model_family,k,mean_acc,stderr\n";
  for (const auto& p : r.curve) {
    out += to_string(r.family) + "," + std::to_string(p.k) + "," + format_double(p.mean_acc) +
           "," + format_double(p.stderr_acc) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------- dataset directories

inline std::string item_stem(const DatasetItem& item) {
  return item.subject_id + "_" + item.image_id;
}

/// Directory layout: manifest.json, scanpaths/<subject>_<image>.csv,
/// features/<subject>_<image>.csv and saliency/<image>.csv.
inline void write_dataset(const fs::path& dir, const Dataset& data, const Provenance& prov) {
  data.validate();
  json items = json::array();
  for (const auto& item : data.items) {
    const std::string stem = item_stem(item);
    const std::string sp = "scanpaths/" + stem + ".csv";
    const std::string ft = "features/" + stem + ".csv";
    atomic_write(dir / sp, scanpath_csv(item.path, &prov));
    atomic_write(dir / ft, features_csv(item.features, &prov));
    items.push_back({{"subject_id", item.subject_id},
                     {"image_id", item.image_id},
                     {"scanpath", sp},
                     {"features", ft}});
  }
  json saliency = json::object();
  for (const auto& [image, map] : data.saliency) {
    const std::string file = "saliency/" + image + ".csv";
    atomic_write(dir / file, saliency_text(map));
    saliency[image] = file;
  }
  json manifest{{"grid",
                 {{"rows", data.grid.rows},
                  {"cols", data.grid.cols},
                  {"extent_deg", {data.grid.width_deg, data.grid.height_deg}}}},
                {"items", items},
                {"saliency", saliency},
                {"provenance", prov.to_json()}};
  manifest["vigor_rate"] = std::isfinite(data.vigor_rate) ? json(data.vigor_rate) : json(nullptr);
  write_json(dir / "manifest.json", manifest);
}

/// Loose scanpath CSVs named <subject>_<image>.csv, directly in `dir` or in
/// dir/scanpaths. Features come from the fixations alone.
inline Dataset read_scanpath_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const fs::path& d : {dir, dir / "scanpaths"}) {
    if (!fs::is_directory(d)) continue;
    for (const auto& e : fs::directory_iterator(d)) {
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    }
  }
  require(!files.empty(), ErrorCode::kInsufficientData, "no scanpaths found in '" + dir.string() + "'");
  std::sort(files.begin(), files.end());
  Dataset data;
  for (const auto& f : files) {
    const std::string stem = f.stem().string();
    const std::size_t cut = stem.find('_');
    require(cut != std::string::npos && cut > 0 && cut + 1 < stem.size(), ErrorCode::kParse,
            f.string() + ": file name must look like <subject>_<image>.csv");
    DatasetItem item;
    item.subject_id = stem.substr(0, cut);
    item.image_id = stem.substr(cut + 1);
    item.path = read_scanpath(f);
    item.path.subject_id = item.subject_id;
    item.path.image_id = item.image_id;
    item.features = extract_features(item.path);
    data.items.push_back(std::move(item));
  }
  data.validate();
  return data;
}

/// A dataset directory with manifest.json, or else a directory of loose
/// scanpath CSVs.
inline Dataset read_dataset(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::kIo, "'" + dir.string() + "' is not a directory");
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) return read_scanpath_directory(dir);
  const json m = read_json(manifest_path);
  Dataset data;
  try {
    const json& g = m.at("grid");
    data.grid = {g.at("rows").get<std::size_t>(), g.at("cols").get<std::size_t>(),
                 g.at("extent_deg").at(0).get<double>(), g.at("extent_deg").at(1).get<double>()};
    data.vigor_rate = m.contains("vigor_rate") && !m["vigor_rate"].is_null()
                          ? m["vigor_rate"].get<double>()
                          : kNaN;
    for (const auto& it : m.at("items")) {
      DatasetItem item;
      item.subject_id = it.at("subject_id").get<std::string>();
      item.image_id = it.at("image_id").get<std::string>();
      item.path = read_scanpath(dir / it.at("scanpath").get<std::string>());
      item.path.subject_id = item.subject_id;
      item.path.image_id = item.image_id;
      if (it.contains("features")) {
        item.features = read_features(dir / it.at("features").get<std::string>());
        attach_geometry(item.features, item.path);
      } else {
        item.features = extract_features(item.path);
      }
      data.items.push_back(std::move(item));
    }
    if (m.contains("saliency")) {
      for (const auto& [image, file] : m.at("saliency").items()) {
        data.saliency.emplace(image, read_saliency(dir / file.get<std::string>()));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, manifest_path.string() + ": " + e.what());
  }
  require(!data.items.empty(), ErrorCode::kInsufficientData,
          "no scanpaths found in '" + dir.string() + "'");
  data.validate();
  return data;
}

}  // namespace gazeid::io
