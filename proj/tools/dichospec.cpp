// Command-line laboratory for discrete nonautonomous linear systems:
// spectrum sweeps, per-gap ratio curves, dichotomy certificates, similarity
// experiments, and growth/projector diagnostics, all as JSON + CSV artifacts.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dichospec/io.hpp"

namespace {

using namespace dichospec;

struct CommonFlags {
  std::optional<std::string> config_file, corpus, system_csv, params, rate, cls, window,
      gamma_range, out;
  std::optional<double> grid_step, refinement_tol, log_k_cap, theta_cap, alpha_min, beta_min;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "key=value config file; flags override it");
  cmd->add_option("--corpus", f.corpus, "corpus system name (see `corpus list`)");
  cmd->add_option("--system-csv", f.system_csv, "coefficient table CSV (n,a11,...,add)");
  cmd->add_option("--params", f.params, "corpus parameters, e.g. omega=2,a=1");
  cmd->add_option("--rate", f.rate, "exponential|polynomial|quadratic|cubic");
  cmd->add_option("--class", f.cls, "uniform|nonuniform|slow");
  cmd->add_option("--window", f.window, "time window LO,HI");
  cmd->add_option("--gamma-range", f.gamma_range, "sweep range LO,HI");
  cmd->add_option("--grid-step", f.grid_step, "gamma grid step");
  cmd->add_option("--refinement-tol", f.refinement_tol, "endpoint bisection tolerance");
  cmd->add_option("--log-k-cap", f.log_k_cap, "cap on fitted log K");
  cmd->add_option("--theta-cap", f.theta_cap, "cap on nonuniform weights");
  cmd->add_option("--alpha-min", f.alpha_min, "minimal stable rate magnitude");
  cmd->add_option("--beta-min", f.beta_min, "minimal unstable rate magnitude");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "seed recorded with the outputs");
  cmd->add_option("--jobs", f.jobs, "sweep worker count (output is identical for any N)");
}

RunConfig build_config(const CommonFlags& f) {
  RunConfig cfg;
  if (f.config_file) read_config_file(cfg, *f.config_file);
  if (f.corpus) cfg.system = *f.corpus;
  if (f.system_csv) cfg.system = "csv:" + *f.system_csv;
  if (f.corpus && f.system_csv)
    throw ConfigError("--corpus and --system-csv are mutually exclusive");
  if (f.params) cfg.params = parse_params_list(*f.params);
  if (f.rate) cfg.rate = *f.rate;
  if (f.cls) cfg.cls = *f.cls;
  if (f.window) cfg.window = parse_window(*f.window);
  if (f.gamma_range) cfg.gamma_range = parse_range(*f.gamma_range);
  if (f.grid_step) cfg.grid_step = *f.grid_step;
  if (f.refinement_tol) cfg.refinement_tol = *f.refinement_tol;
  if (f.log_k_cap) cfg.caps.log_k_cap = *f.log_k_cap;
  if (f.theta_cap) cfg.caps.theta_cap = *f.theta_cap;
  if (f.alpha_min) cfg.caps.alpha_min = *f.alpha_min;
  if (f.beta_min) cfg.caps.beta_min = *f.beta_min;
  if (f.out) cfg.out_dir = *f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (f.jobs) cfg.jobs = *f.jobs;
  class_from_name(cfg.cls);
  if (!cfg.rate.empty()) rate_kind_from_name(cfg.rate);
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

ordered_json report_head(const std::string& kind, const RunConfig& cfg,
                         const GrowthRate& rate) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  j["config"] = config_json(cfg, rate.label);
  return j;
}

int cmd_spectrum(const CommonFlags& flags, bool upp) {
  RunConfig cfg = build_config(flags);
  LoadedSystem loaded = load_run_system(cfg);
  DichotomyClass cls = class_from_name(cfg.cls);
  if (upp && cls != DichotomyClass::slow) {
    // The unique-projector variant is defined over the slow class.
    cfg.cls = "slow";
    cls = DichotomyClass::slow;
  }
  SpectrumEstimate est = estimate_spectrum(loaded.system, loaded.rate, cls,
                                           sweep_settings(cfg), upp);
  ordered_json j = report_head("spectrum", cfg, loaded.rate);
  j["estimate"] = spectrum_json(est);
  std::string json_path = out_path(cfg, "spectrum.json");
  std::string csv_path = out_path(cfg, "spectrum_grid.csv");
  write_json_file(json_path, j);
  write_spectrum_grid_csv(csv_path, est);
  std::printf("spectrum: %zu interval(s)", est.intervals.size());
  for (const auto& g : est.intervals)
    std::printf(" [%s, %s]", fmt_g12(g.lo).c_str(), fmt_g12(g.hi).c_str());
  std::printf("\nwrote %s and %s\n", json_path.c_str(), csv_path.c_str());
  for (const auto& fl : est.flags) std::printf("flag: %s\n", fl.c_str());
  return 0;
}

int cmd_ratios(const CommonFlags& flags, int gap_index, int n_samples,
               std::optional<double> horizon) {
  RunConfig cfg = build_config(flags);
  LoadedSystem loaded = load_run_system(cfg);
  DichotomyClass cls = class_from_name(cfg.cls);
  SpectrumEstimate est = estimate_spectrum(loaded.system, loaded.rate, cls,
                                           sweep_settings(cfg));
  if (est.intervals.empty())
    throw ConfigError("no spectral interval found; the gap structure is undefined");

  int n_gaps = static_cast<int>(est.intervals.size()) + 1;
  if (gap_index < -1 || gap_index >= n_gaps)
    throw ConfigError("gap index " + std::to_string(gap_index) + " outside 0.." +
                      std::to_string(n_gaps - 1));

  ordered_json j = report_head("ratios", cfg, loaded.rate);
  j["spectrum"] = spectrum_json(est);
  ordered_json gaps = ordered_json::array();
  for (int g = 0; g < n_gaps; ++g) {
    if (gap_index != -1 && g != gap_index) continue;
    GammaInterval gap;
    gap.lo = g == 0 ? -kPosInf : est.intervals[static_cast<size_t>(g - 1)].hi;
    gap.hi = g == n_gaps - 1 ? kPosInf : est.intervals[static_cast<size_t>(g)].lo;
    RatioCurve curve = sweep_ratios(loaded.system, loaded.rate, gap, n_samples, cfg.window,
                                    cfg.caps, horizon);
    char name[48];
    std::snprintf(name, sizeof name, "ratios_gap%d.csv", g);
    std::string csv_path = out_path(cfg, name);
    write_ratio_csv(csv_path, curve);
    ordered_json gj;
    gj["index"] = g;
    gj["lo"] = json_number(gap.lo);
    gj["hi"] = json_number(gap.hi);
    gj["n_samples"] = n_samples;
    gj["csv"] = name;
    gj["flags"] = curve.flags;
    gaps.push_back(gj);
    std::printf("gap %d: (%s, %s) -> %s\n", g, fmt_g12(gap.lo).c_str(),
                fmt_g12(gap.hi).c_str(), csv_path.c_str());
  }
  j["gaps"] = gaps;
  std::string json_path = out_path(cfg, "ratios.json");
  write_json_file(json_path, j);
  std::printf("wrote %s\n", json_path.c_str());
  return 0;
}

int cmd_verify(const CommonFlags& flags, const std::string& dichotomy_path, double gamma) {
  RunConfig cfg = build_config(flags);
  LoadedSystem loaded = load_run_system(cfg);

  std::ifstream in(dichotomy_path);
  if (!in) throw ConfigError("cannot open dichotomy file '" + dichotomy_path + "'");
  ordered_json spec;
  try {
    in >> spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(dichotomy_path + ": " + e.what());
  }

  DichotomyParams params;
  std::vector<int> coords;
  try {
    params.cls = class_from_name(spec.at("class").get<std::string>());
    coords = spec.at("coords").get<std::vector<int>>();
    if (spec.contains("alpha") && !spec["alpha"].is_null())
      params.alpha = spec["alpha"].get<double>();
    if (spec.contains("beta") && !spec["beta"].is_null())
      params.beta = spec["beta"].get<double>();
    params.theta = spec.value("theta", 0.0);
    params.nu = spec.value("nu", 0.0);
    params.log_k = spec.value("log_k", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(dichotomy_path + ": " + e.what());
  }

  LinearSystem sys = loaded.system;
  if (gamma != 0.0) sys = weighted_coefficients(make_weighted(sys, loaded.rate, gamma));
  ProjectorFamily family = coordinate_projector(sys.dim, coords);
  FitReport rep = verify(sys, loaded.rate, family, params, cfg.window, cfg.caps.sigma_min);
  rep.gamma = gamma;

  ordered_json j = report_head("verify", cfg, loaded.rate);
  j["gamma"] = json_number(gamma);
  j["coords"] = coords;
  j["report"] = fit_report_json(rep);
  std::string json_path = out_path(cfg, "verify.json");
  write_json_file(json_path, j);
  std::printf("%s: worst slack %s over %zu constraints\nwrote %s\n",
              rep.feasible ? "feasible" : "infeasible", fmt_g12(rep.worst_slack).c_str(),
              rep.n_constraints, json_path.c_str());
  return rep.feasible ? 0 : 3;
}

int cmd_similarity(const CommonFlags& flags, const std::string& map_spec,
                   const std::string& map_params, std::optional<double> map_log_m,
                   std::optional<double> map_theta_s) {
  RunConfig cfg = build_config(flags);
  LoadedSystem loaded = load_run_system(cfg);
  DichotomyClass cls = class_from_name(cfg.cls);
  SimilarityMap s =
      similarity_from_spec(map_spec, parse_params_list(map_params), loaded.system.dim,
                           map_log_m, map_theta_s, loaded.rate, cfg.caps.sigma_min);

  ordered_json j = report_head("similarity", cfg, loaded.rate);
  j["map"] = {{"spec", map_spec},
              {"label", s.label},
              {"log_m", json_number(s.log_m)},
              {"theta_s", json_number(s.theta_s)}};

  NondegeneracyReport nd = check_weakly_nondegenerate(s, cfg.window);
  j["nondegeneracy"] = nondegeneracy_json(nd);
  std::string json_path = out_path(cfg, "similarity.json");
  if (!nd.passes) {
    j["error"] = "similarity map fails the weak nondegeneracy bounds";
    write_json_file(json_path, j);
    std::fprintf(stderr,
                 "error: map '%s' fails weak nondegeneracy: forward slack %s at n = %lld, "
                 "inverse slack %s at n = %lld\n",
                 s.label.c_str(), fmt_g12(nd.worst_forward).c_str(),
                 static_cast<long long>(nd.arg_forward), fmt_g12(nd.worst_inverse).c_str(),
                 static_cast<long long>(nd.arg_inverse));
    return 3;
  }

  InvarianceReport rep = invariance_experiment(loaded.system, s, loaded.rate, cls,
                                               sweep_settings(cfg));
  j["experiment"] = invariance_json(rep);
  write_json_file(json_path, j);
  std::printf("%s\nwrote %s\n", rep.verdict.c_str(), json_path.c_str());
  return 0;
}

int cmd_diagnose(const CommonFlags& flags, double gamma, double bound_factor) {
  RunConfig cfg = build_config(flags);
  LoadedSystem loaded = load_run_system(cfg);
  DichotomyClass cls = class_from_name(cfg.cls);

  ordered_json j = report_head("diagnose", cfg, loaded.rate);
  GrowthFit growth = growth_fit(loaded.system, loaded.rate, cfg.window, cfg.caps);
  j["growth"] = growth_json(growth);
  std::printf("growth: a_hat %s, eps_hat %s, log_k_hat %s\n", fmt_g12(growth.a_hat).c_str(),
              fmt_g12(growth.eps_hat).c_str(), fmt_g12(growth.log_k_hat).c_str());

  if (loaded.system.diagonal && loaded.system.diag_log) {
    UspReport usp = usp_check(loaded.system, cfg.window, bound_factor);
    j["usp"] = usp_json(usp);
    std::printf("unbounded solutions: %s\n", usp.violated() ? "violated" : "holds");
    UppReport upp = upp_check(loaded.system, loaded.rate, cfg.window, cls, cfg.caps);
    upp.gamma = gamma;
    if (gamma != 0.0) {
      FitContext ctx(loaded.system, loaded.rate, cfg.window, cfg.caps.sigma_min);
      upp = upp_check(ctx, gamma, cls, cfg.caps);
    }
    j["upp"] = upp_json(upp);
    std::printf("unique projector: %s (%zu feasible split(s) at gamma = %s)\n",
                upp.unique() ? "holds" : "violated", upp.feasible_splits.size(),
                fmt_g12(upp.gamma).c_str());
  } else {
    j["usp"] = {{"skipped", "diagnostic requires diagonal structure"}};
    j["upp"] = {{"skipped", "diagnostic requires diagonal structure"}};
    std::printf("projector diagnostics skipped: system is not diagonal\n");
  }

  std::string json_path = out_path(cfg, "diagnose.json");
  write_json_file(json_path, j);
  std::printf("wrote %s\n", json_path.c_str());
  return 0;
}

int cmd_corpus_list() {
  ordered_json j = ordered_json::array();
  for (const auto& name : example_names()) j.push_back(name);
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

int cmd_corpus_show(const std::string& name, const std::string& params) {
  ExampleEntry e = get_example(name, parse_params_list(params));
  std::printf("%s\n", example_json(e).dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for dichotomy spectra of discrete linear systems"};
  app.require_subcommand(1);

  CommonFlags flags;
  int rc = 0;

  auto* sp = app.add_subcommand("spectrum", "estimate a dichotomy spectrum");
  add_common(sp, flags);
  bool upp = false;
  sp->add_flag("--upp", upp, "unique-projector variant (slow class)");
  sp->callback([&] { rc = cmd_spectrum(flags, upp); });

  auto* ra = app.add_subcommand("ratios", "optimal ratio curves over spectral gaps");
  add_common(ra, flags);
  int gap_index = -1, n_samples = 9;
  std::optional<double> horizon;
  ra->add_option("--gap", gap_index, "gap index (leftmost = 0; default: all gaps)");
  ra->add_option("--samples", n_samples, "samples per gap");
  ra->add_option("--horizon", horizon, "outermost sample for unbounded gaps");
  ra->callback([&] { rc = cmd_ratios(flags, gap_index, n_samples, horizon); });

  auto* ve = app.add_subcommand("verify", "check given dichotomy constants");
  add_common(ve, flags);
  std::string dichotomy_path;
  double verify_gamma = 0.0;
  ve->add_option("--dichotomy", dichotomy_path,
                 "JSON file: class, coords, alpha/beta, theta, nu, log_k")
      ->required();
  ve->add_option("--gamma", verify_gamma, "verify the gamma-weighted system");
  ve->callback([&] { rc = cmd_verify(flags, dichotomy_path, verify_gamma); });

  auto* si = app.add_subcommand("similarity", "invariance experiment under a similarity map");
  add_common(si, flags);
  std::string map_spec = "exp-scaling", map_params;
  std::optional<double> map_log_m, map_theta_s;
  si->add_option("--map", map_spec, "identity | exp-scaling | csv:<path>");
  si->add_option("--map-params", map_params, "map parameters, e.g. a=1");
  si->add_option("--map-log-m", map_log_m, "envelope constant log M");
  si->add_option("--map-theta-s", map_theta_s, "envelope exponent theta_S");
  si->callback([&] { rc = cmd_similarity(flags, map_spec, map_params, map_log_m, map_theta_s); });

  auto* di = app.add_subcommand("diagnose", "growth fit plus projector diagnostics");
  add_common(di, flags);
  double diag_gamma = 0.0, bound_factor = 10.0;
  di->add_option("--gamma", diag_gamma, "gamma for the projector-uniqueness scan");
  di->add_option("--bound-factor", bound_factor, "bounded-solution threshold");
  di->callback([&] { rc = cmd_diagnose(flags, diag_gamma, bound_factor); });

  auto* co = app.add_subcommand("corpus", "inspect the example registry");
  co->require_subcommand(1);
  auto* li = co->add_subcommand("list", "list example names");
  li->callback([&] { rc = cmd_corpus_list(); });
  auto* sh = co->add_subcommand("show", "show one example entry");
  std::string show_name, show_params;
  sh->add_option("name", show_name, "example name")->required();
  sh->add_option("--params", show_params, "parameters, e.g. omega=2,a=1");
  sh->callback([&] { rc = cmd_corpus_show(show_name, show_params); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const dichospec::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const dichospec::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return rc;
}
