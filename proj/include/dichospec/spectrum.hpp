#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dichospec/fit.hpp"

namespace dichospec {

// Verdict of one membership probe: does the gamma-weighted system admit a
// dichotomy of the requested class on this window?
struct ResolventVerdict {
  double gamma = 0.0;
  DichotomyClass cls = DichotomyClass::nonuniform;
  bool upp = false;
  bool member = false;
  std::optional<int> projector_rank;  // stable rank of the accepted split
  double margin = 0.0;
  std::optional<FitReport> stable_fit, unstable_fit;
};

// Probes every coordinate rank split in (rank, lexicographic) order and
// accepts the first one meeting the class's feasibility; the UPP variant
// scans them all and demands exactly one. member implies margin > 0.
inline ResolventVerdict resolvent_test(const FitContext& ctx, double gamma, DichotomyClass cls,
                                       const FitCaps& caps = {}, bool upp = false) {
  ResolventVerdict v;
  v.gamma = gamma;
  v.cls = cls;
  v.upp = upp;
  int accepted = 0;
  for (const auto& split : coordinate_subsets(ctx.system().dim)) {
    SplitVerdict s = test_split(ctx, split, gamma, cls, caps);
    if (!s.feasible) continue;
    ++accepted;
    if (accepted == 1) {
      v.projector_rank = static_cast<int>(split.size());
      v.margin = s.margin;
      v.stable_fit = s.stable;
      v.unstable_fit = s.unstable;
    }
    if (!upp) break;
  }
  v.member = upp ? accepted == 1 : accepted > 0;
  if (!v.member) {
    v.projector_rank.reset();
    v.margin = 0.0;
    v.stable_fit.reset();
    v.unstable_fit.reset();
  }
  return v;
}

inline ResolventVerdict resolvent_test(const LinearSystem& sys, const GrowthRate& rate,
                                       double gamma, DichotomyClass cls, Window win,
                                       const FitCaps& caps = {}, bool upp = false) {
  FitContext ctx(sys, rate, win);
  return resolvent_test(ctx, gamma, cls, caps, upp);
}

struct GammaInterval {
  double lo = 0.0, hi = 0.0;
  bool open_lo = false, open_hi = false;  // reported only by upp_spectrum
};

// Sweep controls. gamma_range defaults to +-(a_hat + eps_hat + 1) from a
// growth fit; refinement_tol defaults to grid_step / 8.
struct SweepSettings {
  std::optional<std::pair<double, double>> gamma_range;
  double grid_step = 0.05;
  Window window{-400, 400};
  FitCaps caps{};
  std::optional<double> refinement_tol;
  int jobs = 1;
};

struct SpectrumEstimate {
  DichotomyClass cls = DichotomyClass::nonuniform;
  bool upp = false;
  std::vector<GammaInterval> intervals;  // disjoint, ascending
  std::vector<int> gap_ranks;            // one per resolvent gap, left to right
  bool starts_with_interval = false;     // alternation anchor for dimension_map
  double gamma_lo = 0.0, gamma_hi = 0.0;
  double grid_step = 0.0;
  double refinement_tol = 0.0;
  Window window{};
  std::vector<std::string> flags;
  std::vector<ResolventVerdict> grid;  // sweep verdicts in gamma order
};

namespace detail {

inline const ResolventVerdict& memo_verdict(const FitContext& ctx,
                                            std::map<double, ResolventVerdict>& memo,
                                            double gamma, DichotomyClass cls,
                                            const FitCaps& caps, bool upp) {
  auto it = memo.find(gamma);
  if (it == memo.end())
    it = memo.emplace(gamma, resolvent_test(ctx, gamma, cls, caps, upp)).first;
  return it->second;
}

}  // namespace detail

// Grid sweep plus endpoint bisection. Spectral intervals are the maximal
// non-member runs, localized to refinement_tol by bisecting each
// member/non-member flank; a projector-rank jump between adjacent member
// points marks a spectral interval thinner than the grid and is localized
// the same way, reported as a degenerate [m, m]. Flags:
//   "spectrum may exceed range"   no member found anywhere;
//   "gamma_range too small"       spectrum clipped by the range, or the
//                                 outermost gap ranks are not 0 and d;
//   "suspect spurious interval"   equal ranks flank an estimated interval.
// The UPP variant reports per-endpoint openness: after bisecting an edge,
// the bracket point just inside the interval is re-tested without the
// uniqueness requirement. Slow membership surviving there means only
// uniqueness failed across the edge, so the spectral endpoint is open;
// slow membership gone means the dichotomy itself died, a closed endpoint.
inline SpectrumEstimate estimate_spectrum(const LinearSystem& sys, const GrowthRate& rate,
                                          DichotomyClass cls, const SweepSettings& settings = {},
                                          bool upp = false) {
  if (settings.grid_step <= 0.0) throw ConfigError("grid_step must be positive");
  SpectrumEstimate est;
  est.cls = cls;
  est.upp = upp;
  est.grid_step = settings.grid_step;
  est.window = settings.window;
  est.refinement_tol = settings.refinement_tol.value_or(settings.grid_step / 8.0);
  if (est.refinement_tol <= 0.0) throw ConfigError("refinement_tol must be positive");

  if (settings.gamma_range) {
    est.gamma_lo = settings.gamma_range->first;
    est.gamma_hi = settings.gamma_range->second;
  } else {
    GrowthFit g = growth_fit(sys, rate, settings.window, settings.caps);
    double bound = g.a_hat + g.eps_hat + 1.0;
    est.gamma_lo = -bound;
    est.gamma_hi = bound;
  }
  if (!(est.gamma_lo < est.gamma_hi)) throw ConfigError("gamma range must have positive length");

  FitContext ctx(sys, rate, settings.window);
  const int d = sys.dim;
  ctx.prebuild(coordinate_subsets(d));

  std::vector<double> gammas;
  const auto n_steps =
      static_cast<long>(std::floor((est.gamma_hi - est.gamma_lo) / settings.grid_step + 1e-9));
  gammas.reserve(static_cast<std::size_t>(n_steps) + 2);
  for (long i = 0; i <= n_steps; ++i) gammas.push_back(est.gamma_lo + settings.grid_step * i);
  if (gammas.back() < est.gamma_hi - 1e-9 * (1.0 + std::abs(est.gamma_hi)))
    gammas.push_back(est.gamma_hi);

  est.grid.resize(gammas.size());
  const int jobs = std::max(1, settings.jobs);
  if (jobs == 1 || gammas.size() < 2) {
    for (std::size_t i = 0; i < gammas.size(); ++i)
      est.grid[i] = resolvent_test(ctx, gammas[i], cls, settings.caps, upp);
  } else {
    // Points are independent and the context is read-only after prebuild;
    // each worker fills its own stride, so the result is identical for any
    // job count.
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int t = 0; t < jobs; ++t)
      workers.emplace_back([&, t] {
        for (std::size_t i = static_cast<std::size_t>(t); i < gammas.size();
             i += static_cast<std::size_t>(jobs))
          est.grid[i] = resolvent_test(ctx, gammas[i], cls, settings.caps, upp);
      });
    for (auto& w : workers) w.join();
  }

  std::map<double, ResolventVerdict> memo;
  for (std::size_t i = 0; i < gammas.size(); ++i) memo.emplace(gammas[i], est.grid[i]);
  auto verdict = [&](double g) -> const ResolventVerdict& {
    return detail::memo_verdict(ctx, memo, g, cls, settings.caps, upp);
  };

  struct Run {
    bool member;
    std::size_t i0, i1;  // inclusive grid index range
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < est.grid.size(); ++i) {
    if (runs.empty() || runs.back().member != est.grid[i].member)
      runs.push_back({est.grid[i].member, i, i});
    else
      runs.back().i1 = i;
  }

  bool any_member = false;
  for (const Run& r : runs) any_member = any_member || r.member;
  if (!any_member) {
    est.intervals.push_back({est.gamma_lo, est.gamma_hi});
    est.starts_with_interval = true;
    est.flags.push_back("spectrum may exceed range");
    return est;
  }

  struct Edge {
    double mid;     // reported endpoint
    double inside;  // last bracket point inside the interval
  };
  // Shrinks a [member, non-member] bracket; either argument order.
  auto bisect_edge = [&](double g_member, double g_non) {
    double a = g_member, b = g_non;
    while (std::abs(b - a) > est.refinement_tol) {
      double mid = 0.5 * (a + b);
      if (mid == a || mid == b) break;
      if (verdict(mid).member)
        a = mid;
      else
        b = mid;
    }
    return Edge{0.5 * (a + b), b};
  };
  // Localizes where the accepted rank stops being rank_left between two
  // member grid points; a spectral interval thinner than the grid sits there.
  auto bisect_rank_jump = [&](double g_left, double g_right, int rank_left) {
    double a = g_left, b = g_right;
    while (b - a > est.refinement_tol) {
      double mid = 0.5 * (a + b);
      if (mid == a || mid == b) break;
      const ResolventVerdict& v = verdict(mid);
      if (v.member && v.projector_rank && *v.projector_rank == rank_left)
        a = mid;
      else
        b = mid;
    }
    return Edge{0.5 * (a + b), b};
  };

  // Openness probes: one per interval endpoint, in interval order.
  std::vector<std::pair<std::optional<double>, std::optional<double>>> probes;

  bool clipped = false;
  est.starts_with_interval = !runs.front().member;
  for (const Run& r : runs) {
    if (r.member) {
      std::size_t seg = r.i0;
      for (std::size_t i = r.i0 + 1; i <= r.i1; ++i) {
        int prev = est.grid[i - 1].projector_rank.value_or(-1);
        int cur = est.grid[i].projector_rank.value_or(-1);
        if (cur != prev) {
          Edge e = bisect_rank_jump(gammas[i - 1], gammas[i], prev);
          est.gap_ranks.push_back(est.grid[seg].projector_rank.value_or(-1));
          est.intervals.push_back({e.mid, e.mid});
          probes.push_back({e.inside, e.inside});
          seg = i;
        }
      }
      est.gap_ranks.push_back(est.grid[seg].projector_rank.value_or(-1));
    } else {
      GammaInterval iv;
      std::optional<double> plo, phi;
      if (r.i0 == 0) {
        iv.lo = est.gamma_lo;
        clipped = true;
      } else {
        Edge e = bisect_edge(gammas[r.i0 - 1], gammas[r.i0]);
        iv.lo = e.mid;
        plo = e.inside;
      }
      if (r.i1 + 1 == est.grid.size()) {
        iv.hi = est.gamma_hi;
        clipped = true;
      } else {
        Edge e = bisect_edge(gammas[r.i1 + 1], gammas[r.i1]);
        iv.hi = e.mid;
        phi = e.inside;
      }
      est.intervals.push_back(iv);
      probes.push_back({plo, phi});
    }
  }

  bool range_small = clipped;
  if (runs.front().member && est.gap_ranks.front() != 0) range_small = true;
  if (runs.back().member && est.gap_ranks.back() != d) range_small = true;
  if (range_small) est.flags.push_back("gamma_range too small");

  // Equal ranks across a true spectral interval are impossible; report the
  // interval as suspect instead of merging the gaps.
  for (std::size_t j = 0; j < est.intervals.size(); ++j) {
    const long left = est.starts_with_interval ? static_cast<long>(j) - 1 : static_cast<long>(j);
    const auto right = static_cast<std::size_t>(left + 1);
    if (left < 0 || right >= est.gap_ranks.size()) continue;
    if (est.gap_ranks[static_cast<std::size_t>(left)] == est.gap_ranks[right]) {
      est.flags.push_back("suspect spurious interval");
      break;
    }
  }

  if (upp) {
    std::map<double, ResolventVerdict> plain;
    auto slow_member = [&](double g) {
      return detail::memo_verdict(ctx, plain, g, cls, settings.caps, false).member;
    };
    for (std::size_t j = 0; j < est.intervals.size(); ++j) {
      if (probes[j].first) est.intervals[j].open_lo = slow_member(*probes[j].first);
      if (probes[j].second) est.intervals[j].open_hi = slow_member(*probes[j].second);
    }
  }
  return est;
}

// Slow-class estimation under the unique-projector requirement; interval
// endpoints carry per-endpoint open/closed flags.
inline SpectrumEstimate upp_spectrum(const LinearSystem& sys, const GrowthRate& rate,
                                     const SweepSettings& settings = {}) {
  return estimate_spectrum(sys, rate, DichotomyClass::slow, settings, true);
}

// Stable rank of the resolvent gap containing gamma.
inline int dimension_map(const SpectrumEstimate& est, double gamma) {
  char buf[160];
  if (gamma < est.gamma_lo || gamma > est.gamma_hi) {
    std::snprintf(buf, sizeof buf, "gamma = %g is outside the estimated range [%g, %g]", gamma,
                  est.gamma_lo, est.gamma_hi);
    throw ConfigError(buf);
  }
  for (const GammaInterval& iv : est.intervals) {
    const bool inside = (gamma > iv.lo || (gamma == iv.lo && !iv.open_lo)) &&
                        (gamma < iv.hi || (gamma == iv.hi && !iv.open_hi));
    if (inside) {
      std::snprintf(buf, sizeof buf,
                    "not in resolvent: gamma = %g lies in an estimated spectral interval", gamma);
      throw ConfigError(buf);
    }
  }
  std::size_t left = 0;
  for (const GammaInterval& iv : est.intervals)
    if (iv.hi < gamma || (iv.hi == gamma && iv.open_hi)) ++left;
  if (est.starts_with_interval) {
    if (left == 0) throw ConfigError("gamma precedes every estimated gap");
    --left;
  }
  if (left >= est.gap_ranks.size()) throw ConfigError("gamma follows every estimated gap");
  return est.gap_ranks[left];
}

}  // namespace dichospec
