#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "certify.hpp"
#include "lmi_builder.hpp"
#include "model.hpp"
#include "sdp.hpp"
#include "types.hpp"

namespace stepstab::io {

using json = nlohmann::json;

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Matrix matrix_from(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw ConfigError("'" + key + "' must be a nonempty array of arrays");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw ConfigError("'" + key + "' must be a nonempty array of arrays");
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError("'" + key + "' has ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ConfigError("'" + key + "' has a non-numeric entry");
      m(static_cast<Index>(r), static_cast<Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

inline Vector vector_from(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw ConfigError("'" + key + "' must be a nonempty array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("'" + key + "' has a non-numeric entry");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline const json& require(const json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError("missing key '" + key + "'");
  return j.at(key);
}

inline json parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

struct Config {
  SystemData sys;
  CertifyOptions options;
};

inline Objective objective_from(const std::string& s) {
  if (s == "feasibility") return Objective::Feasibility;
  if (s == "max-decay") return Objective::MaxDecay;
  if (s == "min-trace-p") return Objective::MinTraceP;
  throw ConfigError("unknown objective '" + s + "'");
}

inline Config config_from_json(const json& j) {
  Config c;
  const Matrix A = matrix_from(require(j, "A"), "A");
  const Matrix B = matrix_from(require(j, "B"), "B");
  const Matrix K = matrix_from(require(j, "K"), "K");
  const Vector delta = vector_from(require(j, "Delta_diag"), "Delta_diag");
  const Vector d = vector_from(require(j, "d"), "d");
  try {
    c.sys = make_system(A, B, K, delta, d);
  } catch (const DimensionError& e) {
    throw ConfigError(e.what());
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    if (!s.is_object()) throw ConfigError("'solver' must be an object");
    auto num = [&s](const char* key, double& dst) {
      if (!s.contains(key)) return;
      if (!s.at(key).is_number()) throw ConfigError(std::string("'solver.") + key + "' must be a number");
      dst = s.at(key).get<double>();
    };
    num("eps", c.options.eps);
    num("variable_bound", c.options.solve.variable_bound);
    num("timeout", c.options.solve.timeout_seconds);
    num("rank_tol", c.options.rank_rel_tol);
    if (s.contains("objective")) {
      if (!s.at("objective").is_string()) throw ConfigError("'solver.objective' must be a string");
      c.options.solve.objective = objective_from(s.at("objective").get<std::string>());
    }
    if (!(c.options.eps > 0.0) || !(c.options.solve.variable_bound > 0.0) || !(c.options.solve.timeout_seconds > 0.0))
      throw ConfigError("solver settings must be positive");
  }
  return c;
}

inline Config load_config(const std::string& path) { return config_from_json(parse_file(path)); }

inline json to_json(const VerificationReport& r) {
  json j;
  j["pass"] = r.pass();
  j["tol"] = r.tol;
  j["lambda_max"] = {r.lmi_max_eigenvalue[0], r.lmi_max_eigenvalue[1], r.lmi_max_eigenvalue[2]};
  j["min_M_entry"] = {r.m_min_entry[0], r.m_min_entry[1], r.m_min_entry[2]};
  j["c_margins"] = {{"c1", r.c1}, {"c3", r.c3}, {"c2_minus_c1", r.c2 - r.c1}};
  j["failures"] = r.failures;
  return j;
}

inline json to_json(const Certificate& c) {
  json j;
  j["P"] = to_json(c.P);
  j["M"] = json::array();
  j["G"] = json::array();
  for (int i = 0; i < 3; ++i) {
    j["M"].push_back(to_json(c.M[static_cast<std::size_t>(i)]));
    j["G"].push_back({{"first", to_json(c.G1[static_cast<std::size_t>(i)])},
                      {"successor", to_json(c.G2[static_cast<std::size_t>(i)])}});
  }
  j["c"] = {c.c1, c.c2, c.c3};
  j["verification"] = to_json(c.report);
  return j;
}

inline Certificate certificate_from_json(const json& j) {
  Certificate c;
  c.P = matrix_from(require(j, "P"), "P");
  const json& M = require(j, "M");
  const json& G = require(j, "G");
  const json& cs = require(j, "c");
  if (!M.is_array() || M.size() != 3) throw ConfigError("'M' must hold three matrices");
  if (!G.is_array() || G.size() != 3) throw ConfigError("'G' must hold three entries");
  if (!cs.is_array() || cs.size() != 3) throw ConfigError("'c' must hold three numbers");
  for (std::size_t i = 0; i < 3; ++i) {
    c.M[i] = matrix_from(M[i], "M");
    c.G1[i] = vector_from(require(G[i], "first"), "G.first");
    c.G2[i] = vector_from(require(G[i], "successor"), "G.successor");
    if (!cs[i].is_number()) throw ConfigError("'c' has a non-numeric entry");
  }
  c.c1 = cs[0].get<double>();
  c.c2 = cs[1].get<double>();
  c.c3 = cs[2].get<double>();
  return c;
}

inline Certificate load_certificate(const std::string& path) { return certificate_from_json(parse_file(path)); }

inline void write_json(const json& j, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write to " + path + " failed");
}

inline json to_json(const LmiData& d) {
  json j;
  j["n_p"] = d.n_p;
  j["n_u"] = d.n_u;
  j["n_theta"] = d.n_theta;
  j["rank_W"] = d.rank_W;
  j["V_plus"] = to_json(d.V_plus);
  j["Pi1"] = to_json(d.Pi1);
  j["Pi2"] = to_json(d.Pi2);
  j["F"] = to_json(d.F);
  j["H"] = to_json(d.H);
  j["X"] = to_json(d.X);
  j["T"] = to_json(d.T);
  j["R"] = to_json(d.R);
  j["E"] = to_json(d.E);
  j["Z"] = to_json(d.Z);
  j["J"] = to_json(d.J);
  j["L"] = to_json(d.L);
  j["W"] = to_json(d.W);
  j["W_perp"] = to_json(d.W_perp);
  return j;
}

}  // namespace stepstab::io
