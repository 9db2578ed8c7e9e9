#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dichospec/errors.hpp"
#include "dichospec/fit.hpp"
#include "dichospec/spectrum.hpp"
#include "dichospec/system.hpp"

// Weak kinematic similarity: coordinate changes x = S(n) y whose growth and
// inverse growth stay inside an envelope M mu(n)^{sgn(n) theta_S}. Such maps
// preserve nonuniform dichotomies only after a parameter tax (transported_params)
// and need not preserve the spectrum at all; invariance_experiment measures the
// displacement they cause.

namespace dichospec {

// S(n) in scaled form plus the envelope it claims. The envelope must bound
// both log ||S(n)|| and log ||S(n)^{-1}|| by log_m + theta_s * lambda(n);
// check_weakly_nondegenerate verifies that claim over a window.
struct SimilarityMap {
  int dim = 1;
  std::function<ScaledMatrix(Index)> map;
  bool diagonal = false;
  std::function<double(Index, int)> diag_log;  // set iff diagonal
  double log_m = 0.0;
  double theta_s = 0.0;  // must be >= 0
  GrowthRate rate;
  std::string label;
};

namespace detail {

// Dense scaled assembly of a diagonal log family, largest entry at norm 1.
inline ScaledMatrix diagonal_scaled(const std::function<double(Index, int)>& lg, int d,
                                    Index n) {
  double mx = kNegInf;
  std::vector<double> l(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    l[static_cast<size_t>(i)] = lg(n, i);
    mx = std::max(mx, l[static_cast<size_t>(i)]);
  }
  Matrix m = Matrix::Zero(d, d);
  if (mx == kNegInf) return ScaledMatrix{m, kNegInf};
  for (int i = 0; i < d; ++i) {
    double v = l[static_cast<size_t>(i)];
    m(i, i) = v == kNegInf ? 0.0 : std::exp(v - mx);
  }
  return ScaledMatrix{m, mx};
}

}  // namespace detail

inline SimilarityMap make_diagonal_similarity(std::string label,
                                              std::vector<std::function<double(Index)>> logs,
                                              double log_m, double theta_s, GrowthRate rate) {
  if (logs.empty()) throw ConfigError("diagonal similarity needs at least one coordinate");
  if (theta_s < 0.0)
    throw ConfigError("similarity map '" + label + "': theta_S must be nonnegative");
  int d = static_cast<int>(logs.size());
  auto shared = std::make_shared<std::vector<std::function<double(Index)>>>(std::move(logs));
  SimilarityMap s;
  s.dim = d;
  s.diagonal = true;
  s.log_m = log_m;
  s.theta_s = theta_s;
  s.rate = std::move(rate);
  s.label = std::move(label);
  s.diag_log = [shared](Index n, int i) { return (*shared)[static_cast<size_t>(i)](n); };
  auto lg = s.diag_log;
  s.map = [lg, d](Index n) { return detail::diagonal_scaled(lg, d, n); };
  return s;
}

inline SimilarityMap make_scalar_similarity(std::string label, std::function<double(Index)> log_s,
                                            double log_m, double theta_s, GrowthRate rate) {
  return make_diagonal_similarity(std::move(label), {std::move(log_s)}, log_m, theta_s,
                                  std::move(rate));
}

inline SimilarityMap identity_similarity(int dim, GrowthRate rate) {
  if (dim < 1) throw ConfigError("similarity map needs dimension at least one");
  SimilarityMap s;
  s.dim = dim;
  s.diagonal = true;
  s.log_m = 0.0;
  s.theta_s = 0.0;
  s.rate = std::move(rate);
  s.label = "identity";
  s.diag_log = [](Index, int) { return 0.0; };
  s.map = [dim](Index) { return ScaledMatrix::identity(dim); };
  return s;
}

// S(n)^{-1} as a map. The nondegeneracy envelope is symmetric in S and its
// inverse, so log_m and theta_s carry over unchanged.
inline SimilarityMap inverse_map(const SimilarityMap& s, double sigma_min = 1e-12) {
  SimilarityMap r = s;
  r.label = s.label + "^-1";
  if (s.diagonal && s.diag_log) {
    auto base = s.diag_log;
    r.diag_log = [base](Index n, int i) { return -base(n, i); };
    auto lg = r.diag_log;
    int d = r.dim;
    r.map = [lg, d](Index n) { return detail::diagonal_scaled(lg, d, n); };
  } else {
    auto base = s.map;
    std::string lbl = s.label;
    r.diag_log = nullptr;
    r.map = [base, sigma_min, lbl](Index n) {
      return inverse(base(n), sigma_min,
                     "similarity map '" + lbl + "' at n = " + std::to_string(n));
    };
  }
  return r;
}

// Worst violation of each envelope bound over the window; positive slack
// means the bound fails at that index.
struct NondegeneracyReport {
  bool passes = false;
  double worst_forward = kNegInf;  // max_n log||S(n)||     - (log_m + theta_s lambda(n))
  double worst_inverse = kNegInf;  // max_n log||S(n)^{-1}|| - (log_m + theta_s lambda(n))
  Index arg_forward = 0;
  Index arg_inverse = 0;
  Window window{};
};

inline NondegeneracyReport check_weakly_nondegenerate(const SimilarityMap& s, Window w,
                                                      double sigma_min = 1e-12) {
  if (!s.map) throw ConfigError("similarity map '" + s.label + "' has no matrix function");
  if (s.theta_s < 0.0)
    throw ConfigError("similarity map '" + s.label + "': theta_S must be nonnegative");
  NondegeneracyReport rep;
  rep.window = w;
  for (Index n = w.lo; n <= w.hi; ++n) {
    double fwd, inv;
    if (s.diagonal && s.diag_log) {
      double mx = kNegInf, mn = kPosInf;
      for (int i = 0; i < s.dim; ++i) {
        double v = s.diag_log(n, i);
        mx = std::max(mx, v);
        mn = std::min(mn, v);
      }
      if (mn == kNegInf)
        throw ConfigError("similarity map '" + s.label + "' is singular at n = " +
                          std::to_string(n));
      fwd = mx;
      inv = -mn;
    } else {
      ScaledMatrix m = s.map(n);
      if (m.is_zero() || smallest_singular_value(m.mat) < sigma_min)
        throw ConfigError("similarity map '" + s.label + "' is singular at n = " +
                          std::to_string(n));
      fwd = m.log_norm();
      inv = -(m.log_scale + std::log(smallest_singular_value(m.mat)));
    }
    double bound = s.log_m + s.theta_s * nonuniform_weight(s.rate, n);
    if (fwd - bound > rep.worst_forward) {
      rep.worst_forward = fwd - bound;
      rep.arg_forward = n;
    }
    if (inv - bound > rep.worst_inverse) {
      rep.worst_inverse = inv - bound;
      rep.arg_inverse = n;
    }
  }
  rep.passes = rep.worst_forward <= 0.0 && rep.worst_inverse <= 0.0;
  return rep;
}

// Coefficients of the transformed system y(k+1) = B(k) y(k) under x = S y:
// B(k) = S(k+1)^{-1} A(k) S(k), so Phi_A(k, n) S(n) = S(k) Phi_B(k, n).
// Diagonal system and map compose in log space, which keeps coordinates with
// very different magnitudes exact; anything else goes through scaled products.
inline LinearSystem transform(const LinearSystem& sys, const SimilarityMap& s,
                              double sigma_min = 1e-12) {
  if (!s.map) throw ConfigError("similarity map '" + s.label + "' has no matrix function");
  if (s.dim != sys.dim)
    throw ConfigError("similarity map '" + s.label + "' has dimension " +
                      std::to_string(s.dim) + ", system has " + std::to_string(sys.dim));
  LinearSystem out;
  out.dim = sys.dim;
  out.invertible = sys.invertible;
  out.label = sys.label + " ~ " + s.label;
  if (sys.diagonal && sys.diag_log && s.diagonal && s.diag_log) {
    auto adiag = sys.diag_log;
    auto sdiag = s.diag_log;
    int d = sys.dim;
    out.diagonal = true;
    out.diag_log = [adiag, sdiag](Index n, int i) {
      return adiag(n, i) + (sdiag(n, i) - sdiag(n + 1, i));
    };
    auto lg = out.diag_log;
    out.coeff = [lg, d](Index n) { return detail::diagonal_scaled(lg, d, n); };
  } else {
    auto coeff = sys.coeff;
    auto smap = s.map;
    std::string lbl = s.label;
    out.diagonal = false;
    out.coeff = [coeff, smap, sigma_min, lbl](Index n) {
      ScaledMatrix ahead = inverse(smap(n + 1), sigma_min,
                                   "similarity map '" + lbl + "' at n = " +
                                       std::to_string(n + 1));
      return ahead * coeff(n) * smap(n);
    };
  }
  return out;
}

// Outcome of pushing dichotomy parameters through a weakly nondegenerate map.
// margin = min{-alpha, beta} - 4 theta; the transport exists iff it is positive.
struct TransportReport {
  bool feasible = false;
  std::optional<DichotomyParams> transported;  // set iff feasible
  double theta_used = 0.0;
  double margin = 0.0;
};

// Parameter transport across a weakly nondegenerate similarity: a nonuniform
// dichotomy (alpha, beta, theta, theta) becomes (alpha + theta, beta - theta,
// 3 theta, 3 theta) provided min{-alpha, beta} > 4 theta. The dichotomy
// envelope and the map bound must share one exponent; a bound with a smaller
// exponent also holds with a larger one, so the shared value is the maximum
// of params.theta and theta_s. The multiplicative constant is not transported;
// log_k carries over as a floor.
inline TransportReport transported_params(const DichotomyParams& params, double theta_s) {
  if (theta_s < 0.0) throw ConfigError("transported_params: theta_S must be nonnegative");
  if (params.cls != DichotomyClass::nonuniform)
    throw ConfigError("transported_params expects nonuniform-class parameters, got " +
                      std::string(class_name(params.cls)));
  if (params.theta != params.nu)
    throw ConfigError("transported_params: lemma hypothesis requires theta = nu");
  if (!params.alpha && !params.beta)
    throw ConfigError("transported_params: parameters carry neither a stable nor an "
                      "unstable rate");
  TransportReport rep;
  double th = std::max(params.theta, theta_s);
  rep.theta_used = th;
  double m = kPosInf;
  if (params.alpha) m = std::min(m, -*params.alpha);
  if (params.beta) m = std::min(m, *params.beta);
  rep.margin = m - 4.0 * th;
  if (rep.margin <= 0.0) return rep;
  DichotomyParams out;
  out.cls = DichotomyClass::nonuniform;
  if (params.alpha) out.alpha = *params.alpha + th;
  if (params.beta) out.beta = *params.beta - th;
  out.theta = 3.0 * th;
  out.nu = 3.0 * th;
  out.log_k = params.log_k;
  rep.feasible = true;
  rep.transported = out;
  return rep;
}

// Endpoint displacement of one spectral interval, transformed minus base.
// The quantized values are integer multiples of the sweep's refinement_tol.
struct EndpointShift {
  double lo_shift = 0.0, hi_shift = 0.0;
  double lo_quantized = 0.0, hi_quantized = 0.0;
};

struct InvarianceReport {
  SpectrumEstimate base;
  SpectrumEstimate transformed;
  std::vector<EndpointShift> shifts;  // paired by interval index
  bool counts_match = true;
  bool non_invariance = false;
  std::string verdict;
  std::vector<std::string> notes;
};

// Estimates the same spectrum before and after the transform, with identical
// sweep settings, and reports per-endpoint displacement. Displacements are
// quantized to refinement_tol; "non-invariance demonstrated" is claimed only
// when some endpoint moves by more than three refinement steps, so estimator
// jitter is never reported as a discovery. When no gamma_range is given, one
// shared range is derived from the growth fits of both systems.
inline InvarianceReport invariance_experiment(const LinearSystem& sys, const SimilarityMap& s,
                                              const GrowthRate& rate, DichotomyClass cls,
                                              SweepSettings settings = {}) {
  NondegeneracyReport nd = check_weakly_nondegenerate(s, settings.window);
  if (!nd.passes) {
    char buf[192];
    std::snprintf(buf, sizeof buf,
                  "similarity map '%s' fails weak nondegeneracy on [%lld, %lld] "
                  "(worst slack %.6g)",
                  s.label.c_str(), static_cast<long long>(settings.window.lo),
                  static_cast<long long>(settings.window.hi),
                  std::max(nd.worst_forward, nd.worst_inverse));
    throw ConfigError(buf);
  }
  LinearSystem b = transform(sys, s);
  if (!settings.gamma_range) {
    GrowthFit ga = growth_fit(sys, rate, settings.window, settings.caps);
    GrowthFit gb = growth_fit(b, rate, settings.window, settings.caps);
    double r = std::max(ga.a_hat + ga.eps_hat, gb.a_hat + gb.eps_hat) + 1.0;
    settings.gamma_range = std::pair{-r, r};
  }

  InvarianceReport rep;
  rep.base = estimate_spectrum(sys, rate, cls, settings);
  rep.transformed = estimate_spectrum(b, rate, cls, settings);
  double tol = rep.base.refinement_tol;

  size_t na = rep.base.intervals.size(), nb = rep.transformed.intervals.size();
  rep.counts_match = na == nb;
  if (!rep.counts_match) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "interval counts differ (%zu vs %zu)", na, nb);
    rep.notes.push_back(buf);
  }
  for (size_t i = 0; i < std::min(na, nb); ++i) {
    const GammaInterval& ia = rep.base.intervals[i];
    const GammaInterval& ib = rep.transformed.intervals[i];
    EndpointShift sh;
    sh.lo_shift = ib.lo - ia.lo;
    sh.hi_shift = ib.hi - ia.hi;
    long long lo_steps = std::llround(sh.lo_shift / tol);
    long long hi_steps = std::llround(sh.hi_shift / tol);
    sh.lo_quantized = static_cast<double>(lo_steps) * tol;
    sh.hi_quantized = static_cast<double>(hi_steps) * tol;
    if (std::llabs(lo_steps) > 3 || std::llabs(hi_steps) > 3) rep.non_invariance = true;
    rep.shifts.push_back(sh);
  }
  rep.verdict =
      rep.non_invariance ? "non-invariance demonstrated" : "no displacement beyond tolerance";
  return rep;
}

}  // namespace dichospec
