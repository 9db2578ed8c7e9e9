#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dichospec/spectrum.hpp"

namespace dichospec {

// One point of an optimal-ratio curve. st is the minimized alpha + theta of
// the stable side, un the maximized beta - nu of the unstable side; a side is
// absent when the accepted split gives it no coordinates.
struct RatioSample {
  double gamma = 0.0;
  std::optional<double> st, un;
  bool feasible = false;
  int projector_rank = -1;
};

struct RatioCurve {
  GammaInterval gap;
  std::vector<RatioSample> samples;  // ascending in gamma
  Window window{};
  FitCaps caps{};
  std::vector<std::string> flags;
};

namespace detail {

inline RatioSample ratio_sample(const FitContext& ctx, double gamma, const FitCaps& caps) {
  RatioSample s;
  s.gamma = gamma;
  const int d = ctx.system().dim;
  for (const auto& split : coordinate_subsets(d)) {
    SplitVerdict v = test_split(ctx, split, gamma, DichotomyClass::nonuniform, caps);
    if (!v.feasible) continue;
    s.feasible = true;
    s.projector_rank = static_cast<int>(split.size());
    if (v.stable) s.st = v.stable->objective;
    if (v.unstable) s.un = v.unstable->objective;
    break;
  }
  return s;
}

}  // namespace detail

// Samples the optimal ratio maps across one resolvent gap of the nonuniform
// spectrum. Bounded gaps are sampled uniformly, endpoints included; a gap
// unbounded on one side is sampled geometrically, offsets from the finite
// edge doubling out to the horizon (default horizon magnitude: a_hat +
// eps_hat + 10 from a growth fit). Windowed ratios are upper bounds of the
// true optima, so the curve records its window; a sample where no split is
// feasible stays empty and flags the curve.
inline RatioCurve sweep_ratios(const LinearSystem& sys, const GrowthRate& rate, GammaInterval gap,
                               int n_samples, Window window, const FitCaps& caps = {},
                               std::optional<double> horizon = {}) {
  if (n_samples < 2) throw ConfigError("n_samples must be at least 2");
  const bool lo_inf = std::isinf(gap.lo), hi_inf = std::isinf(gap.hi);
  if (lo_inf && hi_inf) throw ConfigError("gap must have at least one finite edge");
  if (!(gap.lo < gap.hi)) throw ConfigError("gap must have positive length");

  RatioCurve curve;
  curve.gap = gap;
  curve.window = window;
  curve.caps = caps;

  std::vector<double> gammas;
  gammas.reserve(static_cast<std::size_t>(n_samples));
  if (!lo_inf && !hi_inf) {
    for (int i = 0; i < n_samples; ++i)
      gammas.push_back(gap.lo + (gap.hi - gap.lo) * i / (n_samples - 1));
  } else {
    double h;
    if (horizon) {
      h = *horizon;
    } else {
      GrowthFit g = growth_fit(sys, rate, window, caps);
      h = g.a_hat + g.eps_hat + 10.0;
      if (lo_inf) h = -h;
    }
    if (!lo_inf) {
      if (!(h > gap.lo)) throw ConfigError("horizon must lie beyond the gap's finite edge");
      for (int i = 0; i < n_samples; ++i)
        gammas.push_back(gap.lo + (h - gap.lo) * std::ldexp(1.0, i + 1 - n_samples));
    } else {
      if (!(h < gap.hi)) throw ConfigError("horizon must lie beyond the gap's finite edge");
      for (int i = 0; i < n_samples; ++i)
        gammas.push_back(gap.hi - (gap.hi - h) * std::ldexp(1.0, -i));
    }
  }

  FitContext ctx(sys, rate, window, caps.sigma_min);
  ctx.prebuild(coordinate_subsets(sys.dim));
  bool any_infeasible = false;
  for (double g : gammas) {
    curve.samples.push_back(detail::ratio_sample(ctx, g, caps));
    any_infeasible = any_infeasible || !curve.samples.back().feasible;
  }
  if (any_infeasible) curve.flags.push_back("infeasible sample inside gap");
  return curve;
}

// Localizes a spectral boundary as the gamma where the one-sided windowed
// ratio crosses its class floor: the full-stable ratio crossing -alpha_min
// (stable side) or the full-unstable ratio crossing beta_min (unstable side).
// Both ratios are non-increasing in gamma, so the crossing is a bisection;
// the bracket must straddle it.
inline double boundary_locator(const LinearSystem& sys, const GrowthRate& rate, Side side,
                               GammaInterval bracket, double tol, Window window,
                               const FitCaps& caps = {}) {
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (!(bracket.lo < bracket.hi)) throw ConfigError("bracket must have positive length");
  FitContext ctx(sys, rate, window, caps.sigma_min);
  std::vector<int> coords;
  if (side == Side::stable)
    for (int i = 1; i <= sys.dim; ++i) coords.push_back(i);
  auto feasible = [&](double g) {
    return test_split(ctx, coords, g, DichotomyClass::nonuniform, caps).feasible;
  };
  // Stable ratios fall below the floor to the right of the boundary,
  // unstable ratios to the left.
  bool flo = feasible(bracket.lo), fhi = feasible(bracket.hi);
  if (flo == fhi) throw ConfigError("bracket does not straddle a feasibility crossing");
  double a = bracket.lo, b = bracket.hi;
  while (b - a > tol) {
    double mid = 0.5 * (a + b);
    if (mid == a || mid == b) break;
    if (feasible(mid) == flo)
      a = mid;
    else
      b = mid;
  }
  return 0.5 * (a + b);
}

struct DivergenceRow {
  double gamma = 0.0;
  Side side = Side::stable;
  double value = std::numeric_limits<double>::quiet_NaN();  // -st or un
  bool feasible = false;
};

struct DivergenceTable {
  std::vector<DivergenceRow> rows;
  bool stable_increasing = false;
  bool unstable_increasing = false;
  std::string note;
};

// Probes the divergence of the optimal ratios far from the spectrum: -st of
// the full-stable split at +h and un of the full-unstable split at -h, for
// each magnitude h in the list, reporting whether both sequences strictly
// increase. The growth fit runs first as a sanity gate on the system.
inline DivergenceTable divergence_check(const LinearSystem& sys, const GrowthRate& rate,
                                        const std::vector<double>& horizon_list,
                                        Window window = {-400, 400}, const FitCaps& caps = {}) {
  if (horizon_list.empty()) throw ConfigError("horizon_list must not be empty");
  if (!std::is_sorted(horizon_list.begin(), horizon_list.end()))
    throw ConfigError("horizon_list must be ascending");
  growth_fit(sys, rate, window, caps);

  FitContext ctx(sys, rate, window, caps.sigma_min);
  std::vector<int> all;
  for (int i = 1; i <= sys.dim; ++i) all.push_back(i);

  DivergenceTable table;
  table.stable_increasing = true;
  table.unstable_increasing = true;
  // A probe inside the spectrum can exceed the multiplier cap; such rows
  // carry no value and stay out of the monotone chains.
  std::size_t skipped = 0;
  double prev_st = -std::numeric_limits<double>::infinity();
  double prev_un = -std::numeric_limits<double>::infinity();
  for (double h : horizon_list) {
    FitReport st = fit_stable(ctx, all, h, caps, DichotomyClass::nonuniform);
    DivergenceRow rs{h, Side::stable, -st.objective, st.feasible};
    if (rs.feasible) {
      table.stable_increasing = table.stable_increasing && rs.value > prev_st;
      prev_st = rs.value;
    } else {
      ++skipped;
    }
    table.rows.push_back(rs);

    FitReport un = fit_unstable(ctx, {}, -h, caps, DichotomyClass::nonuniform);
    DivergenceRow ru{-h, Side::unstable, un.objective, un.feasible};
    if (ru.feasible) {
      table.unstable_increasing = table.unstable_increasing && ru.value > prev_un;
      prev_un = ru.value;
    } else {
      ++skipped;
    }
    table.rows.push_back(ru);
  }
  if (!table.stable_increasing || !table.unstable_increasing)
    table.note = "ratio divergence not monotone along horizon_list";
  else if (skipped > 0)
    table.note = "some probes exceeded the multiplier cap and were skipped";
  return table;
}

}  // namespace dichospec
