#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>

#include "dichospec/errors.hpp"

namespace dichospec {

using Index = std::int64_t;

inline double sign_of(Index n) { return n > 0 ? 1.0 : (n < 0 ? -1.0 : 0.0); }

// A growth rate mu: Z -> (0, inf), kept purely in log space:
// mu_log(n) = log mu(n). Contract: mu_log(0) == 0 and mu_log non-decreasing.
// Everything downstream consumes mu only through logs, so rates like
// exp(n^3) stay representable across the whole integer line.
struct GrowthRate {
  std::string label;
  std::function<double(Index)> mu_log;

  double log_at(Index n) const { return mu_log(n); }
};

// log(mu(k)/mu(n)): the exponent the weighting gamma multiplies.
inline double log_ratio(const GrowthRate& r, Index k, Index n) {
  return r.mu_log(k) - r.mu_log(n);
}

// lambda(n) = sgn(n) * log mu(n) >= 0: the exponent of the allowance factor
// mu(n)^{sgn(n) theta} a nonuniform bound grants at starting time n.
inline double nonuniform_weight(const GrowthRate& r, Index n) {
  return sign_of(n) * r.mu_log(n);
}

// Checks mu_log(0) == 0 and monotonicity over [lo, hi]; reports the first
// offending index. Cost is linear in the range, callers pick sane ranges.
inline void validate_rate(const GrowthRate& r, Index lo, Index hi) {
  if (lo > hi) throw ConfigError("validate_rate: empty range");
  if (lo <= 0 && 0 <= hi && r.mu_log(0) != 0.0)
    throw ConfigError("growth rate '" + r.label + "': log mu(0) = " +
                      std::to_string(r.mu_log(0)) + ", expected 0");
  double prev = r.mu_log(lo);
  if (!std::isfinite(prev))
    throw ConfigError("growth rate '" + r.label + "': non-finite value at n = " +
                      std::to_string(lo));
  for (Index n = lo + 1; n <= hi; ++n) {
    double cur = r.mu_log(n);
    if (!std::isfinite(cur))
      throw ConfigError("growth rate '" + r.label + "': non-finite value at n = " +
                        std::to_string(n));
    if (cur < prev)
      throw ConfigError("growth rate '" + r.label + "': not non-decreasing at n = " +
                        std::to_string(n));
    prev = cur;
  }
}

enum class RateKind { exponential, polynomial, quadratic, cubic };

inline GrowthRate make_rate(RateKind kind) {
  switch (kind) {
    case RateKind::exponential:
      return {"exponential", [](Index n) { return static_cast<double>(n); }};
    case RateKind::polynomial:
      // mu(n) = |n| for |n| >= 1 extended by mu(0) = 1, mu(-n) = 1/mu(n).
      return {"polynomial", [](Index n) {
                if (n == 0) return 0.0;
                return sign_of(n) * std::log(static_cast<double>(n < 0 ? -n : n));
              }};
    case RateKind::quadratic:
      return {"quadratic", [](Index n) {
                double d = static_cast<double>(n);
                return sign_of(n) * d * d;
              }};
    case RateKind::cubic:
      return {"cubic", [](Index n) {
                double d = static_cast<double>(n);
                return d * d * d;
              }};
  }
  throw ConfigError("unknown rate kind");
}

inline GrowthRate rate_by_name(const std::string& name) {
  if (name == "exponential" || name == "exp") return make_rate(RateKind::exponential);
  if (name == "polynomial" || name == "poly") return make_rate(RateKind::polynomial);
  if (name == "quadratic" || name == "quad") return make_rate(RateKind::quadratic);
  if (name == "cubic") return make_rate(RateKind::cubic);
  throw ConfigError("unknown growth rate '" + name +
                    "' (expected exponential|polynomial|quadratic|cubic)");
}

// Wraps a user-supplied log-rate after validating it on [-check_range, check_range].
inline GrowthRate make_custom_rate(std::string label, std::function<double(Index)> mu_log,
                                   Index check_range) {
  GrowthRate r{std::move(label), std::move(mu_log)};
  validate_rate(r, -check_range, check_range);
  return r;
}

// Loads a rate from CSV lines "n,log_mu". Exact integer lookups only: asking
// for an n outside the table is an error, never an interpolation.
inline GrowthRate rate_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open rate file '" + path + "'");
  auto table = std::make_shared<std::map<Index, double>>();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string ns, vs;
    if (!std::getline(ls, ns, ',') || !std::getline(ls, vs))
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'n,log_mu'");
    try {
      Index n = std::stoll(ns);
      double v = std::stod(vs);
      if (!table->emplace(n, v).second)
        throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate index " + ns);
    } catch (const std::invalid_argument&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": unparsable entry");
    } catch (const std::out_of_range&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": value out of range");
    }
  }
  if (table->empty()) throw ConfigError(path + ": empty rate table");
  auto it0 = table->find(0);
  if (it0 == table->end() || it0->second != 0.0)
    throw ConfigError(path + ": rate table must contain '0,0'");
  double prev = table->begin()->second;
  for (auto it = std::next(table->begin()); it != table->end(); ++it) {
    if (it->second < prev)
      throw ConfigError(path + ": not non-decreasing at n = " + std::to_string(it->first));
    prev = it->second;
  }
  std::string label = "csv:" + path;
  return {label, [table, path](Index n) {
            auto it = table->find(n);
            if (it == table->end())
              throw ConfigError("rate table '" + path + "' has no entry for n = " +
                                std::to_string(n));
            return it->second;
          }};
}

}  // namespace dichospec
