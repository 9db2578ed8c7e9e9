#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dichospec/errors.hpp"
#include "dichospec/linalg.hpp"

namespace dichospec {

// Two-variable linear program shared by every dichotomy fit:
//
//   minimize   u + w*v
//   subject to u*x_i + v*y_i >= c_i          (x_i, y_i >= 0)
//              u_lo <= u <= u_hi,  0 <= v <= v_cap
//
// The stable fit is (u, v) = (alpha, theta); the unstable fit maps to it by
// u = -beta, v = nu with x = |log-ratio|; the growth fit is (a, eps) with
// u_lo = 0. All constraint families therefore have nonnegative coefficient
// columns, which makes v >= (c_i - u x_i)/y_i a family of lines in u with
// nonpositive slopes: their upper envelope E(u) is convex and nonincreasing,
// and the objective u + w*max(0, E(u)) is convex piecewise linear. The solver
// walks the envelope once; no general LP machinery is needed.
//
// Degenerate rows double as box constraints: y_i = 0 forces u >= c_i/x_i
// (when x_i > 0) or outright infeasibility (x_i = 0 < c_i).

struct LpBox {
  double u_lo = kNegInf;
  double u_hi = kPosInf;
  double v_cap = kPosInf;
  double v_weight = 1.0;  // objective weight w on v
};

struct LpResult {
  bool feasible = false;
  bool unbounded = false;
  double u = std::numeric_limits<double>::quiet_NaN();
  double v = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
};

// Minimal uniform lift t >= 0 such that relaxing every constraint to
// u*x + v*y >= c - t admits a point in the box. Because all coefficients are
// nonnegative, the most accommodating box point is the upper corner
// (u_hi, v_cap); the lift needed is the worst violation there. Infinite box
// edges absorb any constraint with a positive matching coefficient.
template <class ConstraintFn>
double feasibility_lift(std::size_t count, ConstraintFn&& row, const LpBox& box) {
  double lift = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    auto [x, y, c] = row(i);
    double reach = 0.0;
    if (x > 0.0) {
      if (box.u_hi == kPosInf) continue;
      reach += box.u_hi * x;
    }
    if (y > 0.0) {
      if (box.v_cap == kPosInf) continue;
      reach += box.v_cap * y;
    }
    lift = std::max(lift, c - reach);
  }
  return lift;
}

namespace detail {

struct EnvelopeLine {
  double slope;      // -x/y <= 0
  double intercept;  // c/y
};

// Upper envelope of lines, built left to right over increasing slope.
// Returns segments as (line, segment start u). The envelope is convex:
// slopes increase along the walk.
inline void build_envelope(std::vector<EnvelopeLine>& lines,
                           std::vector<std::pair<EnvelopeLine, double>>& out) {
  std::sort(lines.begin(), lines.end(), [](const EnvelopeLine& a, const EnvelopeLine& b) {
    return a.slope < b.slope;
  });
  out.clear();
  for (const auto& l : lines) {
    bool placed = false;
    while (!out.empty()) {
      auto& [top, start] = out.back();
      if (l.slope == top.slope) {
        if (l.intercept <= top.intercept) { placed = true; break; }  // dominated, drop l
        out.pop_back();
        continue;
      }
      // Intersection with the current top segment (top.slope < l.slope).
      double cross = (top.intercept - l.intercept) / (l.slope - top.slope);
      if (cross <= start) {
        out.pop_back();
        continue;
      }
      out.emplace_back(l, cross);
      placed = true;
      break;
    }
    if (!placed) out.emplace_back(l, kNegInf);
  }
}

inline double envelope_at(const std::vector<std::pair<EnvelopeLine, double>>& env, double u) {
  if (env.empty()) return kNegInf;
  // Last segment whose start is <= u.
  std::size_t lo = 0, hi = env.size();
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    if (env[mid].second <= u) lo = mid;
    else hi = mid;
  }
  const auto& l = env[lo].first;
  return l.slope * u + l.intercept;
}

}  // namespace detail

// Solves the boxed 2D program over rows pre-partitioned by the caller:
// `env_order` indexes the rows with y > 0, sorted ascending by -x/y (the
// envelope slope; the order is invariant under the gamma shifts and v
// rescalings the fit layer applies, so it is computed once per data set),
// and `flat_order` indexes the rows with y = 0. Writes nothing on
// infeasibility beyond the flag; `unbounded` marks an objective diverging
// to -inf inside the feasible set.
template <class ConstraintFn, class IndexRange1, class IndexRange2>
LpResult minimize_prepared(ConstraintFn&& row, const IndexRange1& env_order,
                           const IndexRange2& flat_order, const LpBox& box) {
  LpResult res;
  if (box.v_cap < 0 || box.u_lo > box.u_hi) return res;

  // The v objective weight is folded in by rescaling v' = w*v, i.e. y' = y/w.
  double w = box.v_weight;
  double u_lo = box.u_lo;
  for (auto i : flat_order) {
    auto [x, y, c] = row(i);
    (void)y;
    if (x > 0.0) {
      u_lo = std::max(u_lo, c / x);
    } else if (c > 0.0) {
      return res;  // 0 >= c > 0: infeasible outright
    }
  }
  double v_cap = box.v_cap == kPosInf ? kPosInf : w * box.v_cap;

  // Upper envelope over lines v' >= (c - u x)/(y/w), consumed in slope order.
  std::vector<std::pair<detail::EnvelopeLine, double>> env;
  env.reserve(16);
  {
    std::vector<detail::EnvelopeLine> one(1);
    for (auto i : env_order) {
      auto [x, y, c] = row(i);
      double ys = y / w;
      one[0] = {-x / ys, c / ys};
      bool placed = false;
      while (!env.empty()) {
        auto& [top, start] = env.back();
        const auto& l = one[0];
        if (l.slope == top.slope) {
          if (l.intercept <= top.intercept) { placed = true; break; }
          env.pop_back();
          continue;
        }
        double cross = (top.intercept - l.intercept) / (l.slope - top.slope);
        if (cross <= start) {
          env.pop_back();
          continue;
        }
        env.emplace_back(l, cross);
        placed = true;
        break;
      }
      if (!placed) env.emplace_back(one[0], kNegInf);
    }
  }

  // Feasible u domain: [max(u_lo, first u with E(u) <= v_cap), u_hi]. The
  // comparisons against the box edges carry a tight relative slack: callers
  // that derive the constraint offsets from a box-corner maximum (the fit
  // layer's two-phase flow) produce domains whose edge coincides with u_hi
  // or v_cap exactly, and rounding must not flip that into infeasibility.
  const double ueps =
      1e-12 * (1.0 + (box.u_hi == kPosInf ? 0.0 : std::abs(box.u_hi)));
  const double veps = 1e-12 * (1.0 + (v_cap == kPosInf ? 0.0 : v_cap));
  double u_min = u_lo;
  if (!env.empty() && v_cap != kPosInf) {
    // E is nonincreasing until its slope reaches 0; find the first u with E <= v_cap.
    double at_lo = u_min == kNegInf ? kPosInf : detail::envelope_at(env, u_min);
    if (at_lo > v_cap) {
      double found = kPosInf;
      for (std::size_t s = 0; s < env.size(); ++s) {
        const auto& [l, start] = env[s];
        double seg_end = s + 1 < env.size() ? env[s + 1].second : kPosInf;
        if (l.slope == 0.0) {
          if (l.intercept <= v_cap + veps) { found = start; break; }
          continue;
        }
        double cross = (v_cap - l.intercept) / l.slope;
        if (cross < start) { found = start; break; }  // already below at segment start
        if (cross <= seg_end) { found = cross; break; }
      }
      if (found == kPosInf) return res;  // envelope never dips under the cap
      u_min = std::max(u_min, found);
    }
  }
  if (u_min > box.u_hi) {
    if (u_min > box.u_hi + ueps) return res;
    u_min = box.u_hi;
  }

  // Objective f(u) = u + max(0, E(u)) (in the rescaled v' metric, where the
  // weight is already 1). Convex; evaluate at domain ends, envelope
  // breakpoints, and the E = 0 crossing.
  auto f = [&](double u) {
    double e = env.empty() ? kNegInf : detail::envelope_at(env, u);
    return u + std::max(0.0, e);
  };

  std::vector<double> candidates;
  if (u_min != kNegInf) candidates.push_back(u_min);
  if (box.u_hi != kPosInf) candidates.push_back(box.u_hi);
  for (const auto& [l, start] : env)
    if (start > u_min && start < box.u_hi) candidates.push_back(start);
  // E = 0 crossing: on the segment where E changes sign.
  for (std::size_t s = 0; s < env.size(); ++s) {
    const auto& [l, start] = env[s];
    if (l.slope == 0.0) continue;
    double cross = -l.intercept / l.slope;
    double seg_end = s + 1 < env.size() ? env[s + 1].second : kPosInf;
    if (cross >= start && cross <= seg_end && cross > u_min && cross < box.u_hi)
      candidates.push_back(cross);
  }

  // Unboundedness to the left: with the domain open at -inf, f behaves like
  // (1 + m1) u there (m1 the steepest envelope slope, or no envelope at all).
  // It diverges downward unless the envelope climbs at least as fast as the
  // u term falls, i.e. unless m1 <= -1.
  if (u_min == kNegInf && (env.empty() || env.front().first.slope > -1.0)) {
    res.unbounded = true;
    return res;
  }
  if (candidates.empty()) {
    // Both ends infinite and nothing interior: linear on an unbounded ray.
    res.unbounded = true;
    return res;
  }

  // Ascending scan with a small tie band keeps the leftmost u among
  // objective ties: the reported optimum is the lexicographically smallest
  // (u, v is then forced) on the optimal face.
  std::sort(candidates.begin(), candidates.end());
  double best_f = kPosInf, best_u = 0.0;
  for (double u : candidates) {
    double fu = f(u);
    if (best_f == kPosInf || fu < best_f - 1e-10 * (1.0 + std::abs(best_f))) {
      best_f = fu;
      best_u = u;
    }
  }

  double e = env.empty() ? kNegInf : detail::envelope_at(env, best_u);
  double v_scaled = std::max(0.0, e);
  res.feasible = true;
  res.u = best_u;
  res.v = v_scaled / w;
  res.objective = best_u + v_scaled;  // == u + w * v in original coordinates
  return res;
}

// Convenience entry point: partitions and sorts the rows itself. `row(i)`
// yields (x_i, y_i, c_i).
template <class ConstraintFn>
LpResult minimize_weighted_sum(std::size_t count, ConstraintFn&& row, const LpBox& box) {
  std::vector<std::size_t> env_order, flat_order;
  for (std::size_t i = 0; i < count; ++i) {
    auto [x, y, c] = row(i);
    (void)c;
    if (y > 0.0) env_order.push_back(i);
    else flat_order.push_back(i);
  }
  std::sort(env_order.begin(), env_order.end(), [&](std::size_t a, std::size_t b) {
    auto [xa, ya, ca] = row(a);
    auto [xb, yb, cb] = row(b);
    (void)ca; (void)cb;
    return -xa / ya < -xb / yb;
  });
  return minimize_prepared(row, env_order, flat_order, box);
}

}  // namespace dichospec
