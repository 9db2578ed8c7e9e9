#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dichospec/corpus.hpp"
#include "dichospec/errors.hpp"
#include "dichospec/kinematics.hpp"
#include "dichospec/ratio.hpp"
#include "dichospec/spectrum.hpp"

// File-based run plumbing shared by the command-line tool and its tests:
// run configuration (config file plus flag overrides), JSON reports, CSV
// tables. Every report embeds the effective configuration, numeric fields
// carry 12 significant digits, and equal inputs produce byte-equal files.

namespace dichospec {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline std::string fmt_g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Rounds to 12 significant digits so serialized numbers match fmt_g12; the
// JSON layer then prints the shortest decimal that round-trips that value.
inline double round_sig12(double v) {
  return std::strtod(fmt_g12(v).c_str(), nullptr);
}

inline ordered_json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return round_sig12(v);
}

// One run's effective settings. `system` is a corpus name or "csv:<path>";
// an empty `rate` means the corpus entry's own rate (exponential for CSV).
struct RunConfig {
  std::string system = "ex731";
  std::map<std::string, double> params;
  std::string rate;
  std::string cls = "nonuniform";
  Window window{-400, 400};
  std::optional<std::pair<double, double>> gamma_range;
  double grid_step = 0.05;
  std::optional<double> refinement_tol;
  FitCaps caps{};
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int jobs = 1;
};

inline RateKind rate_kind_from_name(const std::string& s) {
  if (s == "exponential") return RateKind::exponential;
  if (s == "polynomial") return RateKind::polynomial;
  if (s == "quadratic") return RateKind::quadratic;
  if (s == "cubic") return RateKind::cubic;
  throw ConfigError("unknown rate '" + s +
                    "' (known: exponential polynomial quadratic cubic)");
}

inline DichotomyClass class_from_name(const std::string& s) {
  if (s == "uniform") return DichotomyClass::uniform;
  if (s == "nonuniform") return DichotomyClass::nonuniform;
  if (s == "slow") return DichotomyClass::slow;
  throw ConfigError("unknown class '" + s + "' (known: uniform nonuniform slow)");
}

namespace detail {

inline double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ConfigError(what + ": cannot parse number '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& what) {
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw ConfigError(what + ": cannot parse integer '" + s + "'");
  return v;
}

inline std::pair<std::string, std::string> split_once(const std::string& s, char sep,
                                                      const std::string& what) {
  auto pos = s.find(sep);
  if (pos == std::string::npos)
    throw ConfigError(what + ": expected '" + std::string(1, sep) + "' in '" + s + "'");
  return {s.substr(0, pos), s.substr(pos + 1)};
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline Window parse_window(const std::string& s) {
  auto [lo, hi] = detail::split_once(s, ',', "window");
  return Window(detail::parse_int(detail::trim(lo), "window"),
                detail::parse_int(detail::trim(hi), "window"));
}

inline std::pair<double, double> parse_range(const std::string& s) {
  auto [lo, hi] = detail::split_once(s, ',', "gamma_range");
  double a = detail::parse_double(detail::trim(lo), "gamma_range");
  double b = detail::parse_double(detail::trim(hi), "gamma_range");
  if (!(a < b)) throw ConfigError("gamma_range must satisfy lo < hi");
  return {a, b};
}

// "omega=2,a=1" -> {omega: 2, a: 1}
inline std::map<std::string, double> parse_params_list(const std::string& s) {
  std::map<std::string, double> out;
  std::istringstream ls(s);
  std::string item;
  while (std::getline(ls, item, ',')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    auto [k, v] = detail::split_once(item, '=', "params");
    out[detail::trim(k)] = detail::parse_double(detail::trim(v), "params");
  }
  return out;
}

inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& value) {
  if (key == "system") cfg.system = value;
  else if (key == "params") cfg.params = parse_params_list(value);
  else if (key == "rate") cfg.rate = value;
  else if (key == "class") cfg.cls = value;
  else if (key == "window") cfg.window = parse_window(value);
  else if (key == "gamma_range") cfg.gamma_range = parse_range(value);
  else if (key == "grid_step") cfg.grid_step = detail::parse_double(value, key);
  else if (key == "refinement_tol") cfg.refinement_tol = detail::parse_double(value, key);
  else if (key == "log_k_cap") cfg.caps.log_k_cap = detail::parse_double(value, key);
  else if (key == "theta_cap") cfg.caps.theta_cap = detail::parse_double(value, key);
  else if (key == "alpha_min") cfg.caps.alpha_min = detail::parse_double(value, key);
  else if (key == "beta_min") cfg.caps.beta_min = detail::parse_double(value, key);
  else if (key == "out") cfg.out_dir = value;
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::parse_int(value, key));
  else if (key == "jobs") cfg.jobs = static_cast<int>(detail::parse_int(value, key));
  else
    throw ConfigError("unknown config key '" + key +
                      "' (known: system params rate class window gamma_range grid_step "
                      "refinement_tol log_k_cap theta_cap alpha_min beta_min out seed jobs)");
}

// key=value per line, # starts a comment, blank lines ignored.
inline void read_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    try {
      auto [k, v] = detail::split_once(line, '=', "config");
      apply_config_entry(cfg, detail::trim(k), detail::trim(v));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

struct LoadedSystem {
  LinearSystem system;
  GrowthRate rate;
  std::optional<ExampleEntry> entry;  // set for corpus systems
};

inline LoadedSystem load_run_system(const RunConfig& cfg) {
  LoadedSystem out;
  if (cfg.system.rfind("csv:", 0) == 0) {
    out.system = system_from_csv(cfg.system.substr(4), cfg.caps.sigma_min);
    out.rate = make_rate(rate_kind_from_name(cfg.rate.empty() ? "exponential" : cfg.rate));
  } else {
    out.entry = get_example(cfg.system, cfg.params);
    out.system = out.entry->system;
    out.rate = cfg.rate.empty() ? out.entry->rate : make_rate(rate_kind_from_name(cfg.rate));
  }
  return out;
}

inline SweepSettings sweep_settings(const RunConfig& cfg) {
  SweepSettings s;
  s.gamma_range = cfg.gamma_range;
  s.grid_step = cfg.grid_step;
  s.window = cfg.window;
  s.caps = cfg.caps;
  s.refinement_tol = cfg.refinement_tol;
  s.jobs = cfg.jobs;
  return s;
}

inline ordered_json config_json(const RunConfig& cfg, const std::string& rate_label) {
  ordered_json j;
  j["system"] = cfg.system;
  ordered_json p = ordered_json::object();
  for (const auto& [k, v] : cfg.params) p[k] = json_number(v);
  j["params"] = p;
  j["rate"] = rate_label;
  j["class"] = cfg.cls;
  j["window"] = {cfg.window.lo, cfg.window.hi};
  if (cfg.gamma_range)
    j["gamma_range"] = {json_number(cfg.gamma_range->first),
                        json_number(cfg.gamma_range->second)};
  else
    j["gamma_range"] = nullptr;
  j["grid_step"] = json_number(cfg.grid_step);
  j["refinement_tol"] =
      cfg.refinement_tol ? json_number(*cfg.refinement_tol) : ordered_json(nullptr);
  j["caps"] = {{"log_k_cap", json_number(cfg.caps.log_k_cap)},
               {"theta_cap", json_number(cfg.caps.theta_cap)},
               {"alpha_min", json_number(cfg.caps.alpha_min)},
               {"beta_min", json_number(cfg.caps.beta_min)}};
  j["out"] = cfg.out_dir;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  return j;
}

inline ordered_json interval_json(const GammaInterval& g) {
  return {{"lo", json_number(g.lo)},
          {"hi", json_number(g.hi)},
          {"open_lo", g.open_lo},
          {"open_hi", g.open_hi}};
}

inline ordered_json spectrum_json(const SpectrumEstimate& est) {
  ordered_json j;
  j["class"] = class_name(est.cls);
  j["upp"] = est.upp;
  ordered_json iv = ordered_json::array();
  for (const auto& g : est.intervals) iv.push_back(interval_json(g));
  j["intervals"] = iv;
  j["gap_ranks"] = est.gap_ranks;
  j["starts_with_interval"] = est.starts_with_interval;
  j["gamma_lo"] = json_number(est.gamma_lo);
  j["gamma_hi"] = json_number(est.gamma_hi);
  j["grid_step"] = json_number(est.grid_step);
  j["refinement_tol"] = json_number(est.refinement_tol);
  j["window"] = {est.window.lo, est.window.hi};
  j["flags"] = est.flags;
  j["grid_points"] = est.grid.size();
  return j;
}

inline ordered_json fit_report_json(const FitReport& r) {
  ordered_json j;
  j["feasible"] = r.feasible;
  j["class"] = class_name(r.cls);
  j["gamma"] = json_number(r.gamma);
  j["alpha"] = r.alpha ? json_number(*r.alpha) : ordered_json(nullptr);
  j["theta"] = r.theta ? json_number(*r.theta) : ordered_json(nullptr);
  j["beta"] = r.beta ? json_number(*r.beta) : ordered_json(nullptr);
  j["nu"] = r.nu ? json_number(*r.nu) : ordered_json(nullptr);
  j["objective"] = json_number(r.objective);
  j["class_objective"] = json_number(r.class_objective);
  j["log_k"] = json_number(r.log_k);
  j["worst_slack"] = json_number(r.worst_slack);
  j["n_constraints"] = r.n_constraints;
  j["note"] = r.note;
  return j;
}

inline ordered_json growth_json(const GrowthFit& g) {
  return {{"a_hat", json_number(g.a_hat)},
          {"eps_hat", json_number(g.eps_hat)},
          {"log_k_hat", json_number(g.log_k_hat)},
          {"worst_slack", json_number(g.worst_slack)},
          {"n_constraints", g.n_constraints}};
}

inline ordered_json usp_json(const UspReport& r) {
  ordered_json sup = ordered_json::array();
  for (double v : r.sup_log_norm) sup.push_back(json_number(v));
  return {{"violated", r.violated()},
          {"flagged", r.flagged},
          {"sup_log_norm", sup},
          {"bound_log", json_number(r.bound_log)}};
}

inline ordered_json upp_json(const UppReport& r) {
  return {{"class", class_name(r.cls)},
          {"gamma", json_number(r.gamma)},
          {"feasible_splits", r.feasible_splits},
          {"unique", r.unique()}};
}

inline ordered_json nondegeneracy_json(const NondegeneracyReport& r) {
  return {{"passes", r.passes},
          {"worst_forward", json_number(r.worst_forward)},
          {"worst_inverse", json_number(r.worst_inverse)},
          {"arg_forward", r.arg_forward},
          {"arg_inverse", r.arg_inverse},
          {"window", {r.window.lo, r.window.hi}}};
}

inline ordered_json invariance_json(const InvarianceReport& rep) {
  ordered_json j;
  j["base"] = spectrum_json(rep.base);
  j["transformed"] = spectrum_json(rep.transformed);
  ordered_json shifts = ordered_json::array();
  for (const auto& s : rep.shifts)
    shifts.push_back({{"lo_shift", json_number(s.lo_shift)},
                      {"hi_shift", json_number(s.hi_shift)},
                      {"lo_quantized", json_number(s.lo_quantized)},
                      {"hi_quantized", json_number(s.hi_quantized)}});
  j["shifts"] = shifts;
  j["counts_match"] = rep.counts_match;
  j["non_invariance"] = rep.non_invariance;
  j["verdict"] = rep.verdict;
  j["notes"] = rep.notes;
  return j;
}

inline ordered_json reference_json(const SpectrumReference& ref) {
  ordered_json iv = ordered_json::array();
  for (const auto& r : ref.intervals)
    iv.push_back({{"lo", json_number(r.lo)},
                  {"hi", json_number(r.hi)},
                  {"open_lo", r.open_lo},
                  {"open_hi", r.open_hi}});
  return {{"intervals", iv}, {"whole_line", ref.whole_line}, {"source", ref.source}};
}

inline ordered_json example_json(const ExampleEntry& e) {
  ordered_json j;
  j["name"] = e.name;
  ordered_json p = ordered_json::object();
  for (const auto& [k, v] : e.params) p[k] = json_number(v);
  j["params"] = p;
  j["dim"] = e.system.dim;
  j["rate"] = e.rate.label;
  j["label"] = e.system.label;
  ordered_json refs = ordered_json::object();
  for (const auto& [k, v] : e.references) refs[k] = reference_json(v);
  j["references"] = refs;
  j["notes"] = e.notes;
  return j;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

inline void write_json_file(const std::string& path, const ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline void write_spectrum_grid_csv(const std::string& path, const SpectrumEstimate& est) {
  std::string body = "gamma,member,margin,rank\n";
  for (const ResolventVerdict& v : est.grid) {
    body += fmt_g12(v.gamma);
    body += v.member ? ",1," : ",0,";
    body += fmt_g12(v.margin);
    body += ',';
    body += std::to_string(v.projector_rank ? *v.projector_rank : -1);
    body += '\n';
  }
  write_text_file(path, body);
}

inline void write_ratio_csv(const std::string& path, const RatioCurve& curve) {
  std::string body = "gamma,st,un,feasible_st,feasible_un\n";
  for (const RatioSample& s : curve.samples) {
    body += fmt_g12(s.gamma);
    body += ',';
    if (s.st) body += fmt_g12(*s.st);
    body += ',';
    if (s.un) body += fmt_g12(*s.un);
    body += s.st ? ",1" : ",0";
    body += s.un ? ",1\n" : ",0\n";
  }
  write_text_file(path, body);
}

// Named similarity maps for the command line. "identity" ignores params;
// "exp-scaling" is S(n) = e^{-a n} I with parameter a (envelope defaults:
// log M = 0, theta_S = 2|a|); "csv:<path>" reads a per-index matrix table in
// the system CSV grammar and needs the envelope passed explicitly.
inline SimilarityMap similarity_from_spec(const std::string& spec,
                                          const std::map<std::string, double>& params,
                                          int dim, std::optional<double> log_m,
                                          std::optional<double> theta_s, GrowthRate rate,
                                          double sigma_min = 1e-12) {
  auto take = [&params](const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  if (spec == "identity") {
    SimilarityMap s = identity_similarity(dim, std::move(rate));
    if (log_m) s.log_m = *log_m;
    if (theta_s) s.theta_s = *theta_s;
    return s;
  }
  if (spec == "exp-scaling") {
    double a = take("a", 1.0);
    std::vector<std::function<double(Index)>> logs(
        static_cast<size_t>(dim), [a](Index n) { return -a * static_cast<double>(n); });
    char label[48];
    std::snprintf(label, sizeof label, "exp-scaling(a=%.6g)", a);
    return make_diagonal_similarity(label, std::move(logs), log_m.value_or(0.0),
                                    theta_s.value_or(2.0 * std::abs(a)), std::move(rate));
  }
  if (spec.rfind("csv:", 0) == 0) {
    LinearSystem table = system_from_csv(spec.substr(4), sigma_min);
    if (table.dim != dim)
      throw ConfigError("similarity table has dimension " + std::to_string(table.dim) +
                        ", system has " + std::to_string(dim));
    SimilarityMap s;
    s.dim = table.dim;
    s.map = table.coeff;
    s.diagonal = table.diagonal && static_cast<bool>(table.diag_log);
    s.diag_log = table.diag_log;
    s.log_m = log_m.value_or(0.0);
    s.theta_s = theta_s.value_or(0.0);
    s.rate = std::move(rate);
    s.label = table.label;
    return s;
  }
  throw ConfigError("unknown similarity map '" + spec +
                    "' (known: identity exp-scaling csv:<path>)");
}

}  // namespace dichospec
