#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dichospec/errors.hpp"
#include "dichospec/growth.hpp"
#include "dichospec/system.hpp"

// Built-in example systems with analytic reference data. Each scalar entry
// carries an exact closed-form log transition so tests can cross-check the
// step-by-step evaluator, and reference spectra evaluated at the entry's
// parameters so sweeps have something sharp to hit.

namespace dichospec {

struct RefInterval {
  double lo = 0.0, hi = 0.0;
  bool open_lo = false, open_hi = false;
};

struct SpectrumReference {
  std::vector<RefInterval> intervals;  // disjoint, ascending
  bool whole_line = false;
  std::string source;  // "analytic": stated for the example; "derived": worked out here
  bool empty_set() const { return !whole_line && intervals.empty(); }
};

struct ExampleEntry {
  std::string name;
  std::map<std::string, double> params;
  LinearSystem system;
  GrowthRate rate;
  // Exact log transition for scalar entries; composed entries leave it unset.
  std::function<double(Index, Index)> log_phi;
  // Keyed by class name ("uniform", "nonuniform", "slow") plus "upp".
  std::map<std::string, SpectrumReference> references;
  std::vector<std::string> notes;
};

namespace detail {

inline double take_param(const std::map<std::string, double>& given, const std::string& key,
                         double fallback) {
  auto it = given.find(key);
  return it == given.end() ? fallback : it->second;
}

inline void reject_unknown_params(const std::map<std::string, double>& given,
                                  const std::vector<std::string>& known,
                                  const std::string& name) {
  for (const auto& [k, v] : given) {
    (void)v;
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      std::string msg = name + " does not take parameter '" + k + "' (known:";
      for (const auto& s : known) msg += " " + s;
      throw ConfigError(msg + ")");
    }
  }
}

// Shared oscillatory coefficient: log A(n) = -w + a(n+1)cos(n+1) - an cos(n)
//                                           - a sin(n+1) + a sin(n),
// whose transition telescopes to
// log Phi(k,n) = -w(k-n) + ak cos(k) - an cos(n) - a sin(k) + a sin(n).
inline std::function<double(Index)> osc_log_coeff(double w, double a) {
  return [w, a](Index n) {
    double x = static_cast<double>(n);
    return -w + a * (x + 1.0) * std::cos(x + 1.0) - a * x * std::cos(x) -
           a * std::sin(x + 1.0) + a * std::sin(x);
  };
}

inline std::function<double(Index, Index)> osc_log_phi(double w, double a) {
  return [w, a](Index k, Index n) {
    double xk = static_cast<double>(k), xn = static_cast<double>(n);
    return -w * (xk - xn) + a * xk * std::cos(xk) - a * xn * std::cos(xn) - a * std::sin(xk) +
           a * std::sin(xn);
  };
}

inline std::string fmt_params(const std::map<std::string, double>& p) {
  std::string s;
  for (const auto& [k, v] : p) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%s=%.6g", s.empty() ? "" : ", ", k.c_str(), v);
    s += buf;
  }
  return s;
}

}  // namespace detail

inline std::vector<std::string> example_names() {
  return {"ex707", "ex718", "ex708", "ex731", "ex735", "autonomous"};
}

// Instantiates a registry entry. Missing parameters take the entry's
// defaults; values violating an entry's constraint are rejected with the
// constraint quoted.
inline ExampleEntry get_example(const std::string& name,
                                const std::map<std::string, double>& params = {}) {
  ExampleEntry e;
  e.name = name;
  if (name == "ex707") {
    detail::reject_unknown_params(params, {}, name);
    e.system = make_scalar_system("ex707", [](Index n) {
      return -2.0 * static_cast<double>(n) - 1.0;
    });
    e.rate = make_rate(RateKind::quadratic);
    e.log_phi = [](Index k, Index n) {
      double xk = static_cast<double>(k), xn = static_cast<double>(n);
      return -(xk * xk - xn * xn);
    };
    e.references["uniform"] = {{}, true, "analytic"};
    e.references["nonuniform"] = {{{-1.0, 1.0}}, false, "analytic"};
    e.references["slow"] = {{}, false, "analytic"};
    e.references["upp"] = {{{-1.0, 1.0, true, true}}, false, "analytic"};
    e.notes = {"scalar x(n+1) = e^{-2n-1} x(n) under the quadratic rate",
               "admits slow dichotomies with projectors of both ranks at the same gamma",
               "bounded solution through n = 0 defeats the unbounded-solution property"};
  } else if (name == "ex718") {
    detail::reject_unknown_params(params, {}, name);
    e.system = make_scalar_system("ex718", [](Index n) { return n < -1 ? 1.0 : -1.0; });
    e.rate = make_rate(RateKind::exponential);
    // The coefficient switches at n = -1 as printed, so the cumulative log
    // through 0 is -m forward and m + 2 backward.
    e.log_phi = [](Index k, Index n) {
      auto f = [](Index m) {
        return m >= 0 ? -static_cast<double>(m) : static_cast<double>(m) + 2.0;
      };
      return f(k) - f(n);
    };
    e.notes = {"piecewise scalar coefficient e (n < -1) and 1/e (n >= -1)",
               "the solution through n = 0 stays within e of its start on all of Z",
               "shows the bounded-solution defect already under the exponential rate"};
  } else if (name == "ex708" || name == "ex731" || name == "ex735") {
    detail::reject_unknown_params(params, {"omega", "a"}, name);
    double w = detail::take_param(params, "omega", name == "ex708" ? 2.0 : 2.0);
    double a = detail::take_param(params, "a", name == "ex708" ? 0.8 : 1.0);
    e.params = {{"omega", w}, {"a", a}};
    if (name == "ex708") {
      if (!(3.0 * a > w && w > 2.0 * a)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "ex708 requires 3a > omega > 2a (got omega=%.6g, a=%.6g)",
                      w, a);
        throw ConfigError(buf);
      }
    } else {
      if (!(3.0 * a > w && w > a)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s requires 3a > omega > a (got omega=%.6g, a=%.6g)",
                      name.c_str(), w, a);
        throw ConfigError(buf);
      }
    }
    double shift = name == "ex735" ? w - a : w;
    e.system = make_scalar_system(name + "(" + detail::fmt_params(e.params) + ")",
                                  detail::osc_log_coeff(shift, a));
    e.rate = make_rate(RateKind::exponential);
    e.log_phi = detail::osc_log_phi(shift, a);
    if (name == "ex731") {
      e.references["nonuniform"] = {{{-w - 3.0 * a, -w + 3.0 * a}}, false, "analytic"};
      e.notes = {"oscillatory scalar coefficient with nonuniform spectrum [-omega-3a, -omega+3a]",
                 "weakly similar to ex735 via S(n) = e^{-an}, which moves the spectrum"};
    } else if (name == "ex735") {
      e.references["nonuniform"] = {{{-w - 2.0 * a, -w + 4.0 * a}}, false, "analytic"};
      e.notes = {"ex731's oscillatory coefficient with omega replaced by omega - a",
                 "the weakly similar partner of ex731; spectrum [-omega-2a, -omega+4a]"};
    } else {
      e.references["nonuniform"] = {{{-w - 3.0 * a, -w + 3.0 * a}}, false, "derived"};
      e.notes = {"oscillatory scalar coefficient in the regime 3a > omega > 2a",
                 "every nontrivial solution is unbounded on the negative half line",
                 "admits a slow dichotomy only with the identity projector"};
    }
  } else if (name == "autonomous") {
    detail::reject_unknown_params(params, {"c"}, name);
    double c = detail::take_param(params, "c", 0.0);
    e.params = {{"c", c}};
    char label[48];
    std::snprintf(label, sizeof label, "autonomous(c=%.6g)", c);
    e.system = make_scalar_system(label, [c](Index) { return c; });
    e.rate = make_rate(RateKind::exponential);
    e.log_phi = [c](Index k, Index n) { return c * static_cast<double>(k - n); };
    SpectrumReference point{{{c, c}}, false, "derived"};
    e.references["uniform"] = point;
    e.references["nonuniform"] = point;
    e.references["slow"] = point;
    e.references["upp"] = point;
    e.notes = {"constant scalar coefficient e^c; every spectrum class is the point {c}"};
  } else {
    std::string msg = "unknown example '" + name + "' (known:";
    for (const auto& s : example_names()) msg += " " + s;
    throw ConfigError(msg + ")");
  }
  return e;
}

// Block-diagonal composition of scalar entries sharing a rate. Reference
// spectra become unions; a class survives only if every component carries it.
inline ExampleEntry diagonal_compose(const std::vector<ExampleEntry>& entries) {
  if (entries.empty()) throw ConfigError("diagonal_compose needs at least one entry");
  for (const auto& in : entries) {
    if (in.system.dim != 1)
      throw ConfigError("diagonal_compose accepts scalar entries only; '" + in.name +
                        "' has dimension " + std::to_string(in.system.dim));
    if (in.rate.label != entries.front().rate.label)
      throw ConfigError("diagonal_compose needs one shared rate; got '" +
                        entries.front().rate.label + "' and '" + in.rate.label + "'");
  }
  ExampleEntry e;
  e.rate = entries.front().rate;
  std::vector<std::function<double(Index)>> logs;
  bool invertible = true;
  for (const auto& in : entries) {
    e.name += (e.name.empty() ? "" : "+") + in.name;
    auto dl = in.system.diag_log;
    logs.push_back([dl](Index n) { return dl(n, 0); });
    invertible = invertible && in.system.invertible;
  }
  e.system = make_diagonal_system(e.name, std::move(logs), invertible);
  for (const auto& key : {"uniform", "nonuniform", "slow", "upp"}) {
    bool all = true;
    std::vector<RefInterval> pool;
    bool whole = false;
    for (const auto& in : entries) {
      auto it = in.references.find(key);
      if (it == in.references.end()) {
        all = false;
        break;
      }
      whole = whole || it->second.whole_line;
      pool.insert(pool.end(), it->second.intervals.begin(), it->second.intervals.end());
    }
    if (!all) continue;
    std::sort(pool.begin(), pool.end(),
              [](const RefInterval& a, const RefInterval& b) { return a.lo < b.lo; });
    std::vector<RefInterval> merged;
    for (const RefInterval& iv : pool) {
      if (!merged.empty() && iv.lo <= merged.back().hi) {
        merged.back().hi = std::max(merged.back().hi, iv.hi);
        merged.back().open_hi = false;
      } else {
        merged.push_back(iv);
      }
    }
    e.references[key] = {std::move(merged), whole, "derived"};
  }
  e.notes = {"block-diagonal composition; reference spectra are component unions"};
  return e;
}

}  // namespace dichospec
