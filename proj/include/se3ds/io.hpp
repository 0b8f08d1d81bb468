#pragma once

// File formats: trajectory JSON, model JSON and CSV rollout traces. Every
// writer goes through write_atomic().

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "se3ds/dataset.hpp"
#include "se3ds/ds_model.hpp"
#include "se3ds/errors.hpp"
#include "se3ds/mixture.hpp"
#include "se3ds/rollout.hpp"

namespace se3ds::io {

using Json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kModelFormat = "se3ds-model";
inline constexpr int kModelVersion = 1;

[[nodiscard]] inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return ss.str();
}

/// Writes to a sibling temporary file and renames it over `path`, so a
/// failed write never leaves a partial file behind.
inline void write_atomic(const std::filesystem::path& path,
                         const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw IoError("cannot move output into '" + path.string() +
                  "': " + ec.message());
  }
}

[[nodiscard]] inline Json parse_json(const std::string& text,
                                     const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

namespace detail {

inline double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw ParseError(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(what + " must be finite");
  return v;
}

inline const Json& field(const Json& j, const char* key,
                         const std::string& what) {
  if (!j.is_object()) throw ParseError(what + " must be an object");
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(what + " is missing field '" + key + "'");
  }
  return *it;
}

template <int N>
Eigen::Matrix<double, N, 1> vector(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(N)) {
    throw ParseError(what + " must be an array of " + std::to_string(N) +
                     " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    v[i] = number(j[static_cast<std::size_t>(i)], what);
  }
  return v;
}

inline Eigen::MatrixXd matrix(const Json& j, Eigen::Index n,
                              const std::string& what) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(n * n)) {
    throw ParseError(what + " must hold " + std::to_string(n * n) +
                     " row-major entries");
  }
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      m(r, c) = number(j[static_cast<std::size_t>(r * n + c)], what);
    }
  }
  return m;
}

template <typename Derived>
Json flat(const Eigen::MatrixBase<Derived>& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

inline Json quat(const UnitQuaternion& q) {
  return Json::array({q.w(), q.x(), q.y(), q.z()});
}

inline UnitQuaternion load_quat(const Json& j, const std::string& what,
                                double tol) {
  const Vec4 v = vector<4>(j, what);
  if (std::abs(v.norm() - 1.0) > tol) {
    throw ValidationError(what + " is not a unit quaternion");
  }
  return UnitQuaternion::from_unit(v);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectories

[[nodiscard]] inline Json trajectories_to_json(
    const std::vector<Demonstration>& demos) {
  Json root;
  root["dt"] = demos.empty() ? 0.0 : demos.front().dt;
  Json arr = Json::array();
  for (const auto& demo : demos) {
    Json samples = Json::array();
    for (const auto& s : demo.samples) {
      samples.push_back({{"t", s.t},
                         {"p", detail::flat(s.p.transpose())},
                         {"q", detail::quat(s.q)}});
    }
    arr.push_back(std::move(samples));
  }
  root["demos"] = std::move(arr);
  return root;
}

/// Quaternions must be unit within 1e-6 and are renormalized; timestamps
/// must strictly increase within each demo.
[[nodiscard]] inline std::vector<Demonstration> trajectories_from_json(
    const Json& root) {
  const double dt = detail::number(detail::field(root, "dt", "trajectory file"),
                                   "dt");
  if (!(dt > 0.0)) throw ValidationError("trajectory dt must be positive");
  const Json& demos = detail::field(root, "demos", "trajectory file");
  if (!demos.is_array()) throw ParseError("'demos' must be an array");
  std::vector<Demonstration> out;
  for (std::size_t d = 0; d < demos.size(); ++d) {
    const std::string where = "demo " + std::to_string(d);
    if (!demos[d].is_array()) throw ParseError(where + " must be an array");
    Demonstration demo;
    demo.dt = dt;
    for (std::size_t i = 0; i < demos[d].size(); ++i) {
      const Json& js = demos[d][i];
      const std::string at = where + " sample " + std::to_string(i);
      PoseSample s;
      s.t = detail::number(detail::field(js, "t", at), at + " t");
      s.p = detail::vector<3>(detail::field(js, "p", at), at + " p");
      s.q = detail::load_quat(detail::field(js, "q", at), at + " q", 1e-6);
      if (!demo.samples.empty() && !(s.t > demo.samples.back().t)) {
        throw ValidationError(at + ": timestamps must strictly increase");
      }
      demo.samples.push_back(s);
    }
    out.push_back(std::move(demo));
  }
  return out;
}

inline void save_trajectories(const std::filesystem::path& path,
                              const std::vector<Demonstration>& demos) {
  write_atomic(path, trajectories_to_json(demos).dump(1) + "\n");
}

[[nodiscard]] inline std::vector<Demonstration> load_trajectories(
    const std::filesystem::path& path) {
  return trajectories_from_json(
      parse_json(read_file(path), "trajectory file '" + path.string() + "'"));
}

// ---------------------------------------------------------------------------
// Models

struct TrainingInfo {
  std::uint64_t seed = 0;
  KRange k_range;
  std::string tool_version = kToolVersion;
};

struct ModelFile {
  Se3Policy policy;
  TrainingInfo training;
};

[[nodiscard]] inline Json model_to_json(const Se3Policy& policy,
                                        const TrainingInfo& info) {
  Json root;
  root["format"] = kModelFormat;
  root["version"] = kModelVersion;
  root["mode"] = std::string(to_string(policy.mixture.mode()));
  root["K"] = policy.size();
  root["dt"] = policy.dt;
  root["attractor"] = {{"p", detail::flat(policy.attractor_pos.transpose())},
                       {"q", detail::quat(policy.attractor_ori)}};
  Json comps = Json::array();
  for (std::size_t k = 0; k < policy.mixture.size(); ++k) {
    const GaussianComponent& c = policy.mixture.component(k);
    Json jc;
    jc["prior"] = c.prior;
    jc["mean_ori"] = detail::quat(c.mean_ori);
    if (c.mean_pos) jc["mean_pos"] = detail::flat(c.mean_pos->transpose());
    jc["covariance"] = detail::flat(c.covariance);
    comps.push_back(std::move(jc));
  }
  root["components"] = std::move(comps);
  Json a_ori = Json::array(), a_pos = Json::array();
  for (const auto& a : policy.A_ori) a_ori.push_back(detail::flat(a));
  for (const auto& a : policy.A_pos) a_pos.push_back(detail::flat(a));
  root["A_ori"] = std::move(a_ori);
  root["A_pos"] = std::move(a_pos);
  root["training"] = {{"seed", info.seed},
                      {"k_range", {info.k_range.min, info.k_range.max}},
                      {"epsilon", policy.epsilon},
                      {"residual_ori", policy.residual_ori},
                      {"residual_pos", policy.residual_pos},
                      {"converged", policy.converged},
                      {"tool_version", info.tool_version}};
  return root;
}

/// Rebuilds the policy and re-validates every stability invariant.
[[nodiscard]] inline ModelFile model_from_json(const Json& root) {
  const std::string what = "model file";
  const Json& format = detail::field(root, "format", what);
  if (!format.is_string() || format.get<std::string>() != kModelFormat) {
    throw ParseError("not an se3ds model file");
  }
  const Json& version = detail::field(root, "version", what);
  if (!version.is_number_integer() || version.get<int>() != kModelVersion) {
    throw ParseError("unsupported model version");
  }
  const Json& jmode = detail::field(root, "mode", what);
  if (!jmode.is_string()) throw ParseError("'mode' must be a string");
  const MixtureMode mode = parse_mixture_mode(jmode.get<std::string>());
  const Json& jk = detail::field(root, "K", what);
  if (!jk.is_number_unsigned() || jk.get<std::size_t>() == 0) {
    throw ParseError("'K' must be a positive integer");
  }
  const std::size_t k = jk.get<std::size_t>();

  ModelFile out;
  Se3Policy& policy = out.policy;
  policy.dt = detail::number(detail::field(root, "dt", what), "dt");
  if (!(policy.dt > 0.0)) throw ValidationError("model dt must be positive");
  const Json& att = detail::field(root, "attractor", what);
  policy.attractor_pos =
      detail::vector<3>(detail::field(att, "p", "attractor"), "attractor p");
  policy.attractor_ori = detail::load_quat(
      detail::field(att, "q", "attractor"), "attractor q", 1e-9);

  const Json& comps = detail::field(root, "components", what);
  const Json& a_ori = detail::field(root, "A_ori", what);
  const Json& a_pos = detail::field(root, "A_pos", what);
  if (!comps.is_array() || comps.size() != k || !a_ori.is_array() ||
      a_ori.size() != k || !a_pos.is_array() || a_pos.size() != k) {
    throw DimensionMismatch("components, A_ori and A_pos must each hold K = " +
                            std::to_string(k) + " entries");
  }
  const Eigen::Index dim = mode == MixtureMode::kCoupled ? 7 : 4;
  std::vector<GaussianComponent> originals;
  for (std::size_t i = 0; i < k; ++i) {
    const std::string at = "component " + std::to_string(i);
    const Json& jc = comps[i];
    GaussianComponent c;
    c.prior = detail::number(detail::field(jc, "prior", at), at + " prior");
    c.mean_ori = detail::load_quat(detail::field(jc, "mean_ori", at),
                                   at + " mean_ori", 1e-9);
    if (mode == MixtureMode::kCoupled) {
      c.mean_pos = detail::vector<3>(detail::field(jc, "mean_pos", at),
                                     at + " mean_pos");
    } else if (jc.contains("mean_pos")) {
      throw DimensionMismatch(at + " has a position mean in quat-only mode");
    }
    c.covariance =
        detail::matrix(detail::field(jc, "covariance", at), dim,
                       at + " covariance");
    originals.push_back(std::move(c));
    policy.A_ori.push_back(
        detail::matrix(a_ori[i], 4, "A_ori[" + std::to_string(i) + "]"));
    policy.A_pos.push_back(
        detail::matrix(a_pos[i], 3, "A_pos[" + std::to_string(i) + "]"));
  }
  policy.mixture =
      MixtureModel(mode, policy.attractor_ori, std::move(originals));

  const Json& tr = detail::field(root, "training", what);
  policy.epsilon =
      detail::number(detail::field(tr, "epsilon", "training"), "epsilon");
  policy.residual_ori = detail::number(
      detail::field(tr, "residual_ori", "training"), "residual_ori");
  policy.residual_pos = detail::number(
      detail::field(tr, "residual_pos", "training"), "residual_pos");
  const Json& conv = detail::field(tr, "converged", "training");
  const Json& seed = detail::field(tr, "seed", "training");
  const Json& kr = detail::field(tr, "k_range", "training");
  const Json& ver = detail::field(tr, "tool_version", "training");
  if (!conv.is_boolean() || !seed.is_number_unsigned() || !kr.is_array() ||
      kr.size() != 2 || !kr[0].is_number_integer() ||
      !kr[1].is_number_integer() || !ver.is_string()) {
    throw ParseError("malformed training metadata");
  }
  policy.converged = conv.get<bool>();
  out.training.seed = seed.get<std::uint64_t>();
  out.training.k_range = {kr[0].get<int>(), kr[1].get<int>()};
  out.training.tool_version = ver.get<std::string>();

  if (!(policy.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  validate_policy(policy);
  return out;
}

inline void save_model(const std::filesystem::path& path,
                       const Se3Policy& policy, const TrainingInfo& info) {
  write_atomic(path, model_to_json(policy, info).dump(1) + "\n");
}

[[nodiscard]] inline ModelFile load_model(const std::filesystem::path& path) {
  return model_from_json(
      parse_json(read_file(path), "model file '" + path.string() + "'"));
}

// ---------------------------------------------------------------------------
// Traces

/// Shortest decimal form that parses back to the same double.
[[nodiscard]] inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

[[nodiscard]] inline std::string trace_header(std::size_t k) {
  std::string h = "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz";
  for (std::size_t i = 1; i <= k; ++i) h += ",gamma_" + std::to_string(i);
  return h + ",V,dV";
}

[[nodiscard]] inline std::string trace_to_csv(const RolloutTrace& trace,
                                              std::size_t k) {
  std::string out = trace_header(k) + "\n";
  for (const auto& row : trace.rows) {
    std::vector<double> v = {row.t,
                             row.p.x(),
                             row.p.y(),
                             row.p.z(),
                             row.q.w(),
                             row.q.x(),
                             row.q.y(),
                             row.q.z(),
                             row.velocity.x(),
                             row.velocity.y(),
                             row.velocity.z(),
                             row.angular_velocity.wx(),
                             row.angular_velocity.wy(),
                             row.angular_velocity.wz()};
    for (Eigen::Index i = 0; i < row.gamma.size(); ++i) {
      v.push_back(row.gamma[i]);
    }
    v.push_back(row.V);
    v.push_back(row.dV);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i > 0) out += ',';
      out += format_double(v[i]);
    }
    out += '\n';
  }
  return out;
}

inline void save_trace(const std::filesystem::path& path,
                       const RolloutTrace& trace, std::size_t k) {
  write_atomic(path, trace_to_csv(trace, k));
}

/// Parsed CSV trace: header names and numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  [[nodiscard]] std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ParseError("trace has no column '" + name + "'");
  }
};

[[nodiscard]] inline CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  const auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line)) throw ParseError("trace is empty");
  table.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw ParseError("trace row has " + std::to_string(cells.size()) +
                       " cells, header has " +
                       std::to_string(table.header.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        throw ParseError("bad number '" + c + "' in trace");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

[[nodiscard]] inline CsvTable load_trace(const std::filesystem::path& path) {
  return parse_csv(read_file(path));
}

}  // namespace se3ds::io
