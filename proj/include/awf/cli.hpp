#pragma once

#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "awf/bounds.hpp"
#include "awf/builtins.hpp"
#include "awf/io.hpp"
#include "awf/verify.hpp"

namespace awf::cli {

using nlohmann::json;

// Exit codes: 0 ok, 1 check/convergence failure, 2 usage or I/O error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailure = 1;
inline constexpr int kExitUsage = 2;

struct RunConfig {
  GridSpec grid = make_grid(1.0, 16);

  std::string trend_builtin = "zero";
  TrendParams trend_params;
  std::string trend_file;  // overrides the builtin when set

  double boundary_value = 1.0;
  std::string boundary_file;

  Method method = Method::Plain;
  long n_samples = 10000;
  std::uint64_t seed = 1;
  bool shift_projection = true;  // importance shift = projection of the trend

  int threads = 1;
  std::vector<double> gammas = {1.0, 2.0, 3.0, 4.0};
  ResidualMode residual_mode = ResidualMode::One;
  std::string axis_mode = "full";  // full | w1 | w2

  ProjectionOptions projection;
  double condition_tol = 1e-9;

  std::string out_format = "json";  // json | csv
  std::string out_path;             // empty: stdout
  std::string csv_path;             // asymptotics row file
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key \"" + it.key() + "\" in " + where);
}

inline RunConfig parse_config(const json& j, const std::string& command) {
  RunConfig cfg;
  if (command == "verify") {  // verify defaults to the desk-scale suite
    cfg.grid = make_grid(1.0, 8);
    cfg.n_samples = 20000;
  }
  check_keys(j, {"grid", "trend", "boundary", "estimator", "threads", "gammas",
                 "residual_mode", "axis_mode", "tolerances", "output"},
             "top level");

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, {"T", "n"}, "grid");
    cfg.grid = make_grid(g.value("T", 1.0), g.value("n", cfg.grid.n));
  }
  if (j.contains("trend")) {
    const auto& t = j.at("trend");
    check_keys(t, {"builtin", "file", "scale", "cap", "coef", "ax", "ay"}, "trend");
    if (t.contains("file")) {
      cfg.trend_file = t.at("file").get<std::string>();
      if (t.contains("builtin"))
        throw std::invalid_argument("config: trend cannot set both builtin and file");
    } else {
      cfg.trend_builtin = t.value("builtin", std::string("zero"));
    }
    cfg.trend_params.scale = t.value("scale", 1.0);
    cfg.trend_params.cap = t.value("cap", 1.0);
    cfg.trend_params.coef = t.value("coef", 0.5);
    cfg.trend_params.ax = t.value("ax", 0.5);
    cfg.trend_params.ay = t.value("ay", 0.5);
  }
  if (j.contains("boundary")) {
    const auto& b = j.at("boundary");
    check_keys(b, {"constant", "builtin", "value", "file"}, "boundary");
    if (b.contains("file")) cfg.boundary_file = b.at("file").get<std::string>();
    else if (b.contains("constant")) cfg.boundary_value = b.at("constant").get<double>();
    else if (b.contains("builtin")) {
      if (b.at("builtin").get<std::string>() != "constant")
        throw std::invalid_argument("config: unknown builtin boundary");
      cfg.boundary_value = b.value("value", 1.0);
    }
  }
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    check_keys(e, {"method", "n_samples", "seed", "shift"}, "estimator");
    const std::string m = e.value("method", std::string("plain"));
    if (m == "plain") cfg.method = Method::Plain;
    else if (m == "importance") cfg.method = Method::Importance;
    else throw std::invalid_argument("config: estimator.method must be plain or importance");
    cfg.n_samples = e.value("n_samples", cfg.n_samples);
    if (cfg.n_samples < 1) throw std::invalid_argument("config: n_samples must be >= 1");
    cfg.seed = e.value("seed", static_cast<std::uint64_t>(1));
    const std::string sh = e.value("shift", std::string("projection"));
    if (sh == "projection") cfg.shift_projection = true;
    else if (sh == "none") cfg.shift_projection = false;
    else throw std::invalid_argument("config: estimator.shift must be projection or none");
  }
  if (j.contains("threads")) {
    cfg.threads = j.at("threads").get<int>();
    if (cfg.threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  }
  if (j.contains("gammas")) {
    cfg.gammas = j.at("gammas").get<std::vector<double>>();
  }
  if (j.contains("residual_mode")) {
    const std::string r = j.at("residual_mode").get<std::string>();
    if (r == "one") cfg.residual_mode = ResidualMode::One;
    else if (r == "mc") cfg.residual_mode = ResidualMode::MonteCarlo;
    else throw std::invalid_argument("config: residual_mode must be one or mc");
  }
  if (j.contains("axis_mode")) {
    cfg.axis_mode = j.at("axis_mode").get<std::string>();
    if (cfg.axis_mode != "full" && cfg.axis_mode != "w1" && cfg.axis_mode != "w2")
      throw std::invalid_argument("config: axis_mode must be full, w1 or w2");
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    check_keys(t, {"cycle_tol", "max_cycles", "ortho_tol", "node_tol", "condition_tol"},
               "tolerances");
    cfg.projection.cycle_tol = t.value("cycle_tol", cfg.projection.cycle_tol);
    cfg.projection.max_cycles = t.value("max_cycles", cfg.projection.max_cycles);
    cfg.projection.ortho_tol = t.value("ortho_tol", cfg.projection.ortho_tol);
    cfg.projection.node_tol = t.value("node_tol", cfg.projection.node_tol);
    cfg.condition_tol = t.value("condition_tol", cfg.condition_tol);
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    check_keys(o, {"format", "path", "csv_path"}, "output");
    cfg.out_format = o.value("format", std::string("json"));
    if (cfg.out_format != "json" && cfg.out_format != "csv")
      throw std::invalid_argument("config: output.format must be json or csv");
    cfg.out_path = o.value("path", std::string());
    cfg.csv_path = o.value("csv_path", std::string());
  }
  return cfg;
}

/// Canonical serialization of the effective config; hashed into every output.
/// Execution knobs that cannot change any computed value (thread count,
/// output destinations) stay out of the hash.
inline json config_to_json(const RunConfig& c) {
  json t;
  if (!c.trend_file.empty()) t = json{{"file", c.trend_file}};
  else
    t = json{{"builtin", c.trend_builtin}, {"scale", c.trend_params.scale},
             {"cap", c.trend_params.cap},  {"coef", c.trend_params.coef},
             {"ax", c.trend_params.ax},    {"ay", c.trend_params.ay}};
  json b = c.boundary_file.empty() ? json{{"constant", c.boundary_value}}
                                   : json{{"file", c.boundary_file}};
  return json{
      {"grid", json{{"T", c.grid.T}, {"n", c.grid.n}}},
      {"trend", t},
      {"boundary", b},
      {"estimator", json{{"method", c.method == Method::Plain ? "plain" : "importance"},
                         {"n_samples", c.n_samples},
                         {"seed", c.seed},
                         {"shift", c.shift_projection ? "projection" : "none"}}},
      {"gammas", c.gammas},
      {"residual_mode", c.residual_mode == ResidualMode::One ? "one" : "mc"},
      {"axis_mode", c.axis_mode},
      {"tolerances", json{{"cycle_tol", c.projection.cycle_tol},
                          {"max_cycles", c.projection.max_cycles},
                          {"ortho_tol", c.projection.ortho_tol},
                          {"node_tol", c.projection.node_tol},
                          {"condition_tol", c.condition_tol}}}};
}

inline std::string config_hash(const RunConfig& c) {
  return io::hex64(io::fnv1a64(config_to_json(c).dump()));
}

inline GridField load_trend(const RunConfig& c) {
  GridField F = c.trend_file.empty()
                    ? builtin_trend(c.trend_builtin, c.grid, c.trend_params)
                    : io::load_field(c.trend_file, c.grid.T);
  if (F.grid != c.grid)
    throw std::invalid_argument("trend file grid does not match the configured grid");
  return F;
}

inline GridField load_boundary(const RunConfig& c) {
  GridField U = c.boundary_file.empty()
                    ? GridField::constant(c.grid, c.boundary_value)
                    : io::load_field(c.boundary_file, c.grid.T);
  if (U.grid != c.grid)
    throw std::invalid_argument("boundary file grid does not match the configured grid");
  return U;
}

inline void emit(const RunConfig& cfg, const std::string& content) {
  if (cfg.out_path.empty()) std::cout << content;
  else io::atomic_write_file(cfg.out_path, content);
}

}  // namespace detail

inline int cmd_simulate(const RunConfig& cfg) {
  EstimatorOptions opts;
  opts.threads = cfg.threads;
  CrossingEstimate est;

  if (cfg.axis_mode != "full") {
    if (!cfg.trend_file.empty() || !cfg.boundary_file.empty())
      throw std::invalid_argument("axis_mode requires builtin trend and boundary");
    if (cfg.method != Method::Plain)
      throw std::invalid_argument("axis_mode supports the plain estimator only");
    // reduce the 2D problem to the selected one-parameter marginal: the
    // suppressed components are identically zero, so the indicator becomes a
    // per-node comparison against the row minima of boundary - trend. Builtins
    // are evaluated pointwise to avoid materializing 2D fields at large n.
    const int n = cfg.grid.n;
    std::vector<double> zero(n + 1, 0.0), gap(n + 1, 0.0);
    for (int i = 0; i <= n; ++i) {
      double m = std::numeric_limits<double>::infinity();
      for (int j = 0; j <= n; ++j) {
        const double s = cfg.grid.node(cfg.axis_mode == "w1" ? i : j);
        const double t = cfg.grid.node(cfg.axis_mode == "w1" ? j : i);
        m = std::min(m, cfg.boundary_value -
                            builtin_trend_value(cfg.trend_builtin, s, t, cfg.trend_params));
      }
      gap[i] = m;
    }
    est = estimate_axis(zero, gap, cfg.grid, cfg.n_samples, cfg.seed, opts);
  } else {
    GridField F = detail::load_trend(cfg);
    GridField U = detail::load_boundary(cfg);
    if (cfg.method == Method::Plain) {
      est = estimate_plain(F, U, cfg.n_samples, cfg.seed, opts);
    } else {
      AdditiveRkhsFn f = differentiate(decompose_trend(F));
      AdditiveRkhsFn shift = cfg.shift_projection
                                 ? project_v2plus(f, cfg.projection).projection
                                 : AdditiveRkhsFn(cfg.grid);
      est = estimate_importance(F, U, shift, cfg.n_samples, cfg.seed, opts);
    }
  }

  const std::string hash = detail::config_hash(cfg);
  if (cfg.out_format == "csv") {
    std::string row = "# config_hash=" + hash + "\n";
    row += "gamma,n,method,p_hat,std_err,seed\n";
    row += io::format_g17(cfg.trend_params.scale);
    row += ',' + std::to_string(cfg.n_samples) + ',' + io::method_name(est.method) + ',' +
           io::format_g17(est.p_hat) + ',' + io::format_g17(est.std_err) + ',' +
           std::to_string(est.seed) + '\n';
    detail::emit(cfg, row);
  } else {
    json j = io::to_json(est);
    j["config_hash"] = hash;
    detail::emit(cfg, j.dump(2) + "\n");
  }
  return kExitOk;
}

inline int cmd_project(const RunConfig& cfg) {
  GridField F = detail::load_trend(cfg);
  AdditiveRkhsFn f = differentiate(decompose_trend(F));
  auto r = project_v2plus(f, cfg.projection);
  json j = io::to_json(r);
  j["config_hash"] = detail::config_hash(cfg);
  j["seed"] = cfg.seed;
  detail::emit(cfg, j.dump(2) + "\n");
  return kExitOk;
}

inline int cmd_bound(const RunConfig& cfg) {
  GridField F = detail::load_trend(cfg);
  GridField U = detail::load_boundary(cfg);
  AdditiveRkhsFn f = differentiate(decompose_trend(F));
  BoundConfig bc;
  bc.residual_mode = cfg.residual_mode;
  bc.n_samples = cfg.n_samples;
  bc.seed = cfg.seed;
  bc.threads = cfg.threads;
  bc.condition_tol = cfg.condition_tol;
  bc.projection = cfg.projection;
  BoundReport rep = theorem1_upper_bound(f, U, bc);
  json j = io::to_json(rep);
  j["config_hash"] = detail::config_hash(cfg);
  j["seed"] = cfg.seed;
  detail::emit(cfg, j.dump(2) + "\n");
  return kExitOk;
}

inline int cmd_asymptotics(const RunConfig& cfg) {
  GridField F = detail::load_trend(cfg);
  GridField U = detail::load_boundary(cfg);
  AdditiveRkhsFn f = differentiate(decompose_trend(F));
  LdOptions opts;
  opts.n_samples = cfg.n_samples;
  opts.seed = cfg.seed;
  opts.threads = cfg.threads;
  opts.method = cfg.method == Method::Plain && !cfg.shift_projection ? Method::Plain
                                                                      : Method::Importance;
  opts.projection = cfg.projection;
  LdReport rep = ld_slope(f, U, cfg.gammas, opts);

  const std::string hash = detail::config_hash(cfg);
  std::string csv = "# config_hash=" + hash + " seed=" + std::to_string(cfg.seed) + "\n";
  csv += "gamma,ln_p_hat,ci_lo,ci_hi\n";
  for (const auto& row : rep.rows)
    csv += io::format_g17(row.gamma) + "," + io::format_g17(row.ln_p) + "," +
           io::format_g17(row.ci_lo) + "," + io::format_g17(row.ci_hi) + "\n";
  if (!cfg.csv_path.empty()) io::atomic_write_file(cfg.csv_path, csv);

  json j = io::to_json(rep);
  j["config_hash"] = hash;
  j["seed"] = cfg.seed;
  if (cfg.out_format == "csv" && cfg.csv_path.empty()) detail::emit(cfg, csv);
  else detail::emit(cfg, j.dump(2) + "\n");
  return kExitOk;
}

inline int cmd_verify(const RunConfig& cfg) {
  VerifyConfig vc;
  vc.grid = cfg.grid;
  vc.n_samples = cfg.n_samples;
  vc.seed = cfg.seed;
  vc.threads = cfg.threads;
  vc.projection = cfg.projection;
  std::vector<CheckResult> checks = run_verify_suite(vc);
  bool all = true;
  json rows = json::array();
  for (const auto& c : checks) {
    all = all && c.pass;
    rows.push_back(json{{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  }
  json j{{"all_pass", all},
         {"checks", rows},
         {"config_hash", detail::config_hash(cfg)},
         {"seed", cfg.seed},
         {"grid", io::to_json(cfg.grid)},
         {"n_samples", cfg.n_samples}};
  detail::emit(cfg, j.dump(2) + "\n");
  if (!all) {
    for (const auto& c : checks)
      if (!c.pass) std::cerr << "verify: check failed: " << c.name << "\n";
    return kExitCheckFailure;
  }
  return kExitOk;
}

/// Entry point shared by the binary and the in-process tests.
inline int run(const std::vector<std::string>& args) {
  CLI::App app{"Boundary non-crossing probabilities of the additive Wiener field"};
  app.require_subcommand(1);

  struct Shared {
    std::string config_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
  };
  Shared shared;
  std::string command;

  for (const char* name : {"simulate", "project", "bound", "asymptotics", "verify"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", shared.config_path, "JSON run configuration");
    sub->add_option("--out", shared.out_path, "output path (default: stdout)");
    sub->add_option("--seed", shared.seed, "override the configured seed");
    sub->add_option("--threads", shared.threads, "override the configured thread count");
    sub->callback([&command, name]() { command = name; });
  }

  std::vector<const char*> argv;
  argv.push_back("awf");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    json raw = json::object();
    if (!shared.config_path.empty()) raw = json::parse(io::read_file(shared.config_path));
    RunConfig cfg = detail::parse_config(raw, command);
    if (shared.seed) cfg.seed = *shared.seed;
    if (shared.threads) cfg.threads = *shared.threads;
    if (!shared.out_path.empty()) cfg.out_path = shared.out_path;

    if (command == "simulate") return cmd_simulate(cfg);
    if (command == "project") return cmd_project(cfg);
    if (command == "bound") return cmd_bound(cfg);
    if (command == "asymptotics") return cmd_asymptotics(cfg);
    if (command == "verify") return cmd_verify(cfg);
    std::cerr << "awf: unknown command\n";
    return kExitUsage;
  } catch (const ConvergenceError& e) {
    std::cerr << "awf: " << e.what() << " (residual " << e.residual() << ")\n";
    return kExitCheckFailure;
  } catch (const json::exception& e) {
    std::cerr << "awf: config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "awf: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "awf: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::cerr << "awf: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace awf::cli
