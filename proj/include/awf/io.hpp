#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "awf/bounds.hpp"
#include "awf/cone.hpp"
#include "awf/field_sim.hpp"
#include "awf/grid.hpp"
#include "awf/rkhs.hpp"

namespace awf::io {

using nlohmann::json;

inline json to_json(const GridSpec& g) { return json{{"T", g.T}, {"n", g.n}}; }

inline GridSpec grid_from_json(const json& j) {
  return make_grid(j.at("T").get<double>(), j.at("n").get<int>());
}

inline json to_json(const GridField& f) {
  json rows = json::array();
  for (int i = 0; i <= f.grid.n; ++i) {
    json row = json::array();
    for (int j = 0; j <= f.grid.n; ++j) row.push_back(f.at(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"T", f.grid.T}, {"n", f.grid.n}, {"values", std::move(rows)}};
}

inline GridField field_from_json(const json& j) {
  GridSpec g = grid_from_json(j);
  const auto& rows = j.at("values");
  if (!rows.is_array() || rows.size() != static_cast<std::size_t>(g.n + 1))
    throw std::invalid_argument("GridField: values must be an (n+1)x(n+1) matrix");
  GridField out(g);
  for (int i = 0; i <= g.n; ++i) {
    const auto& row = rows.at(i);
    if (row.size() != static_cast<std::size_t>(g.n + 1))
      throw std::invalid_argument("GridField: ragged value matrix");
    for (int jj = 0; jj <= g.n; ++jj) out.at(i, jj) = row.at(jj).get<double>();
  }
  return out;
}

inline json to_json(const H1Fn& h) {
  return json{{"kind", "h1"}, {"T", h.grid.T}, {"n", h.grid.n}, {"values", h.d}};
}

inline json to_json(const H2Fn& h) {
  json rows = json::array();
  for (int i = 0; i < h.grid.n; ++i) {
    json row = json::array();
    for (int j = 0; j < h.grid.n; ++j) row.push_back(h.cell(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"kind", "h2"}, {"T", h.grid.T}, {"n", h.grid.n}, {"values", std::move(rows)}};
}

inline H1Fn h1_from_json(const json& j) {
  if (j.at("kind").get<std::string>() != "h1")
    throw std::invalid_argument("h1_from_json: kind tag mismatch");
  GridSpec g = grid_from_json(j);
  return H1Fn(g, j.at("values").get<std::vector<double>>());
}

inline H2Fn h2_from_json(const json& j) {
  if (j.at("kind").get<std::string>() != "h2")
    throw std::invalid_argument("h2_from_json: kind tag mismatch");
  GridSpec g = grid_from_json(j);
  H2Fn out(g);
  const auto& rows = j.at("values");
  if (rows.size() != static_cast<std::size_t>(g.n))
    throw std::invalid_argument("h2_from_json: values must be n x n");
  for (int i = 0; i < g.n; ++i)
    for (int jj = 0; jj < g.n; ++jj) out.cell(i, jj) = rows.at(i).at(jj).get<double>();
  return out;
}

inline json to_json(const AdditiveRkhsFn& f) {
  return json{{"kind", "additive"},
              {"h1", to_json(f.h1)},
              {"h2", to_json(f.h2)},
              {"h3", to_json(f.h3)}};
}

inline AdditiveRkhsFn additive_from_json(const json& j) {
  if (j.at("kind").get<std::string>() != "additive")
    throw std::invalid_argument("additive_from_json: kind tag mismatch");
  return AdditiveRkhsFn(h1_from_json(j.at("h1")), h1_from_json(j.at("h2")),
                        h2_from_json(j.at("h3")));
}

inline const char* method_name(Method m) { return m == Method::Plain ? "plain" : "importance"; }

inline json to_json(const CrossingEstimate& e) {
  json j{{"p_hat", e.p_hat},       {"std_err", e.std_err}, {"n", e.n_samples},
         {"method", method_name(e.method)}, {"seed", e.seed},
         {"grid", to_json(e.grid)}};
  if (e.method == Method::Importance) j["rejected"] = e.rejected;
  return j;
}

inline json to_json(const ConditionReport& c) {
  return json{{"f13_nonneg", c.f13_nonneg},
              {"f13_nonincreasing", c.f13_nonincreasing},
              {"f23_nonneg", c.f23_nonneg},
              {"f23_nonincreasing", c.f23_nonincreasing},
              {"limits_ok", c.limits_ok},
              {"max_violation", c.max_violation},
              {"tol", c.tol}};
}

inline json to_json(const BoundReport& r) {
  json j{{"norm_f", r.norm_f},
         {"norm_fbar", r.norm_fbar},
         {"li_kuelbs_delta", r.li_kuelbs_delta},
         {"alpha", r.alpha},
         {"sandwich_lower", r.sandwich_lower},
         {"sandwich_upper", r.sandwich_upper},
         {"status", r.applicable ? "APPLICABLE" : "NOT_APPLICABLE"},
         {"conditions", to_json(r.conditions)},
         {"projection_residual", r.projection_residual},
         {"projection_ortho_defect", r.projection_ortho_defect}};
  if (r.applicable) {
    j["theorem1_factor"] = *r.theorem1_factor;
    j["theorem1_bound"] = *r.theorem1_bound;
    j["stieltjes_s1"] = r.stieltjes_s1;
    j["stieltjes_s2"] = r.stieltjes_s2;
    j["stieltjes_s3"] = r.stieltjes_s3;
  }
  if (r.residual_estimate) j["residual"] = to_json(*r.residual_estimate);
  else j["residual"] = 1.0;
  if (r.p0_estimate) j["p0"] = to_json(*r.p0_estimate);
  return j;
}

inline json to_json(const ProjectionResult<AdditiveRkhsFn>& r) {
  return json{{"projection", to_json(r.projection)},
              {"polar", to_json(r.polar_part)},
              {"norm_sq", r.projection.norm_sq()},
              {"iterations", r.iterations},
              {"residual", r.residual},
              {"orthogonality_defect", r.orthogonality_defect}};
}

inline json to_json(const LdReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back(json{{"gamma", row.gamma},
                        {"p_hat", row.p_hat},
                        {"std_err", row.std_err},
                        {"ln_p", row.ln_p},
                        {"ci_lo", row.ci_lo},
                        {"ci_hi", row.ci_hi},
                        {"p_hat_fbar", row.p_hat_fbar},
                        {"std_err_fbar", row.std_err_fbar},
                        {"ln_p_fbar", row.ln_p_fbar}});
  return json{{"slope", r.slope}, {"target", r.target}, {"ratio", r.ratio}, {"rows", rows}};
}

// ---- files -----------------------------------------------------------------

/// Write-temp-then-rename so readers never observe a partial file.
inline void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// CSV matrix form: row i holds the first-coordinate index, 17 significant
/// digits (decimal round-trip exact for IEEE doubles).
inline std::string field_to_csv(const GridField& f) {
  std::string out;
  for (int i = 0; i <= f.grid.n; ++i) {
    for (int j = 0; j <= f.grid.n; ++j) {
      if (j) out += ',';
      out += format_g17(f.at(i, j));
    }
    out += '\n';
  }
  return out;
}

inline GridField field_from_csv(const std::string& text, double T) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("field_from_csv: empty matrix");
  const int m = static_cast<int>(rows.size());
  for (const auto& r : rows)
    if (static_cast<int>(r.size()) != m)
      throw std::invalid_argument("field_from_csv: matrix must be square");
  GridField out(make_grid(T, m - 1));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out.at(i, j) = rows[i][j];
  return out;
}

/// Reads a trend/boundary field from .json (self-describing) or .csv
/// (grid horizon supplied by the caller).
inline GridField load_field(const std::string& path, double csv_T) {
  const std::string text = read_file(path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    return field_from_csv(text, csv_T);
  return field_from_json(json::parse(text));
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace awf::io
