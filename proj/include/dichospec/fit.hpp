#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dichospec/errors.hpp"
#include "dichospec/growth.hpp"
#include "dichospec/linalg.hpp"
#include "dichospec/lp.hpp"
#include "dichospec/system.hpp"

// Dichotomy constant fitting over windowed transition data.
//
// Everything runs in log space. A stable-side datum is a pair (k, n) with
// k >= n and value log ||Phi(k,n) P(n)||; the fitted bound
//
//   log ||Phi(k,n) P(n)|| <= log K + alpha (L(k) - L(n)) + theta lambda(n)
//
// is affine in (log K, alpha, theta), so optimal constants come from a small
// linear program. The unstable side mirrors it over k <= n with (beta, nu),
// and the growth envelope fits (a, eps) against unrestricted norms in both
// directions. Weighting by gamma shifts each datum by -gamma (L(k) - L(n))
// exactly, so one table serves every gamma.
//
// The multiplier K is not traded against the rates: the fit first lifts
// log K to the smallest value that admits any parameters inside the rate box
// (zero whenever the data already fit), then optimizes the rates at that
// multiplier. Letting the optimizer spend K freely would make every window
// report rates at the box edge and hide the data's actual separation.

namespace dichospec {

enum class Side { stable, unstable };

enum class DichotomyClass { uniform, nonuniform, slow };

inline const char* class_name(DichotomyClass c) {
  switch (c) {
    case DichotomyClass::uniform: return "uniform";
    case DichotomyClass::nonuniform: return "nonuniform";
    default: return "slow";
  }
}

inline DichotomyClass class_by_name(const std::string& s) {
  if (s == "uniform") return DichotomyClass::uniform;
  if (s == "nonuniform") return DichotomyClass::nonuniform;
  if (s == "slow") return DichotomyClass::slow;
  throw ConfigError("unknown dichotomy class '" + s + "' (expected uniform, nonuniform or slow)");
}

// Numerical guard rails shared by every fit. The rate floors keep "decay"
// and "growth" bounded away from zero so feasibility is a robust verdict;
// the caps make the finite-window problem well posed.
struct FitCaps {
  double log_k_cap = 50.0;
  double theta_cap = 100.0;
  double alpha_min = 1e-3;
  double beta_min = 1e-3;
  double sigma_min = 1e-12;
  // The nonuniform class demands alpha + m*theta < 0 and beta - m*nu > 0;
  // m = 1 is the defining inequality, m = 2 is the stricter variant that
  // also survives parameter transport.
  int nonuniform_sum_multiplier = 1;
};

struct DichotomyParams {
  DichotomyClass cls = DichotomyClass::slow;
  std::optional<double> alpha;  // absent when the projector is 0
  std::optional<double> beta;   // absent when the projector is Id
  double theta = 0.0;
  double nu = 0.0;
  double log_k = 0.0;
};

struct FitReport {
  bool feasible = false;
  Side side = Side::stable;
  DichotomyClass cls = DichotomyClass::slow;
  double gamma = 0.0;
  std::optional<double> alpha, theta, beta, nu;
  double objective = std::numeric_limits<double>::quiet_NaN();        // alpha+theta or beta-nu
  double class_objective = std::numeric_limits<double>::quiet_NaN();  // with the nonuniform multiplier
  double log_k = 0.0;
  double worst_slack = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_constraints = 0;
  std::string note;
};

struct GrowthFit {
  double a_hat = std::numeric_limits<double>::quiet_NaN();
  double eps_hat = std::numeric_limits<double>::quiet_NaN();
  double log_k_hat = 0.0;
  double worst_slack = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_constraints = 0;
};

namespace detail {

// One windowed datum. dx = L(k) - L(n) keeps its sign so gamma-weighting is
// a plain shift; the LP always works with |dx|.
struct PairEntry {
  std::int32_t k, n;
  double dx;
  double lam;   // lambda(n) >= 0
  double logv;  // log norm of the (restricted) transition
};

struct PairTable {
  std::vector<PairEntry> entries;
  std::vector<std::uint32_t> env_order;   // lam > 0, ascending by -|dx|/lam
  std::vector<std::uint32_t> flat_order;  // lam == 0
  std::size_t raw_count = 0;

  void finalize() {
    env_order.clear();
    flat_order.clear();
    for (std::uint32_t i = 0; i < entries.size(); ++i) {
      if (entries[i].lam > 0.0) env_order.push_back(i);
      else flat_order.push_back(i);
    }
    std::sort(env_order.begin(), env_order.end(), [&](std::uint32_t a, std::uint32_t b) {
      const PairEntry& ea = entries[a];
      const PairEntry& eb = entries[b];
      return -std::abs(ea.dx) / ea.lam < -std::abs(eb.dx) / eb.lam;
    });
  }
};

// Thins one bucket (fixed n, fixed direction, so lam is constant and |dx| is
// nondecreasing) to its upper convex hull over (|dx|, logv). Every quantity
// the solver extracts from a bucket -- envelope lines, flat-row bounds, the
// multiplier lift, slack maxima -- is maximized at a hull vertex, so
// dropping interior points is exact, not an approximation.
inline void flush_bucket(std::vector<PairEntry>& pts, std::vector<PairEntry>& out) {
  if (pts.empty()) return;
  std::size_t m = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (std::abs(pts[i].dx) == std::abs(pts[m].dx)) {
      if (pts[i].logv > pts[m].logv) pts[m] = pts[i];
    } else {
      pts[++m] = pts[i];
    }
  }
  pts.resize(m + 1);
  std::size_t h = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    PairEntry p = pts[i];
    double px = std::abs(p.dx);
    while (h >= 2) {
      const PairEntry& a = pts[h - 2];
      const PairEntry& b = pts[h - 1];
      double ax = std::abs(a.dx), bx = std::abs(b.dx);
      double cr = (bx - ax) * (p.logv - a.logv) - (b.logv - a.logv) * (px - ax);
      if (cr >= 0.0) --h;
      else break;
    }
    pts[h++] = p;
  }
  pts.resize(h);
  out.insert(out.end(), pts.begin(), pts.end());
}

// Diagonal systems: per-coordinate cumulative log sums, exact up to fp
// addition. Restriction to a coordinate set is the max over its rows, which
// the LP sees as one constraint per row -- the feasible set is identical.
inline PairTable diag_side_table(const LinearSystem& sys, const std::vector<double>& L,
                                 const std::vector<double>& lam, Window w,
                                 const std::vector<int>& active, Side side) {
  PairTable t;
  std::vector<PairEntry> bucket;
  auto pos = [&](Index n) { return static_cast<std::size_t>(n - w.lo); };
  for (int c : active) {
    int i = c - 1;
    for (Index n = w.lo; n <= w.hi; ++n) {
      bucket.clear();
      double lam_n = lam[pos(n)];
      bucket.push_back({static_cast<std::int32_t>(n), static_cast<std::int32_t>(n), 0.0, lam_n, 0.0});
      long double acc = 0.0L;
      if (side == Side::stable) {
        for (Index k = n + 1; k <= w.hi; ++k) {
          double step = sys.diag_log(k - 1, i);
          if (step == kNegInf) break;  // coordinate dies; later data is vacuous
          acc += step;
          bucket.push_back({static_cast<std::int32_t>(k), static_cast<std::int32_t>(n),
                            L[pos(k)] - L[pos(n)], lam_n, static_cast<double>(acc)});
        }
      } else {
        for (Index k = n - 1; k >= w.lo; --k) {
          double step = sys.diag_log(k, i);
          if (step == kNegInf) {
            char buf[128];
            std::snprintf(buf, sizeof buf,
                          "coefficient vanishes at n = %lld on coordinate %d; backward data undefined",
                          static_cast<long long>(k), c);
            throw NumericError(buf);
          }
          acc -= step;
          bucket.push_back({static_cast<std::int32_t>(k), static_cast<std::int32_t>(n),
                            L[pos(k)] - L[pos(n)], lam_n, static_cast<double>(acc)});
        }
      }
      t.raw_count += bucket.size();
      flush_bucket(bucket, t.entries);
    }
  }
  t.finalize();
  return t;
}

// General systems: scale-safe incremental products seeded at the (already
// restricted) projector, so normalization never mixes directions the
// restriction removed. The non-invertible unstable side goes through the
// kernel-restricted operator pair by pair; windows there are expected small.
inline PairTable dense_side_table(const LinearSystem& sys, const std::vector<double>& L,
                                  const std::vector<double>& lam, Window w,
                                  const ProjectorFamily& family, Side side, double sigma_min) {
  PairTable t;
  std::vector<PairEntry> bucket;
  auto pos = [&](Index n) { return static_cast<std::size_t>(n - w.lo); };
  std::unique_ptr<EvolutionOperator> op;
  if (side == Side::unstable && !sys.invertible)
    op = std::make_unique<EvolutionOperator>(sys, family, sigma_min);
  for (Index n = w.lo; n <= w.hi; ++n) {
    bucket.clear();
    double lam_n = lam[pos(n)];
    Matrix r = side == Side::stable ? family.proj(n) : family.complement_at(n);
    ScaledMatrix m = ScaledMatrix::from_dense(r);
    auto push = [&](Index k, const ScaledMatrix& v) {
      bucket.push_back({static_cast<std::int32_t>(k), static_cast<std::int32_t>(n),
                        L[pos(k)] - L[pos(n)], lam_n, v.log_norm()});
    };
    if (!m.is_zero()) push(n, m);
    if (side == Side::stable) {
      for (Index k = n + 1; k <= w.hi; ++k) {
        m = sys.coeff(k - 1) * m;
        if (m.is_zero()) break;
        push(k, m);
      }
    } else if (sys.invertible) {
      for (Index k = n - 1; k >= w.lo; --k) {
        m = inverse(sys.coeff(k), sigma_min, "coefficient") * m;
        if (m.is_zero()) break;
        push(k, m);
      }
    } else {
      for (Index k = n - 1; k >= w.lo; --k) {
        ScaledMatrix v = op->transition(k, n);
        if (v.is_zero()) continue;
        push(k, v);
      }
    }
    t.raw_count += bucket.size();
    flush_bucket(bucket, t.entries);
  }
  t.finalize();
  return t;
}

inline PairTable diag_growth_table(const LinearSystem& sys, const std::vector<double>& L,
                                   const std::vector<double>& lam, Window w) {
  PairTable t;
  std::vector<PairEntry> bucket;
  auto pos = [&](Index n) { return static_cast<std::size_t>(n - w.lo); };
  for (int c = 1; c <= sys.dim; ++c) {
    int i = c - 1;
    for (Index n = w.lo; n <= w.hi; ++n) {
      double lam_n = lam[pos(n)];
      bucket.clear();
      bucket.push_back({static_cast<std::int32_t>(n), static_cast<std::int32_t>(n), 0.0, lam_n, 0.0});
      long double acc = 0.0L;
      for (Index k = n + 1; k <= w.hi; ++k) {
        double step = sys.diag_log(k - 1, i);
        if (step == kNegInf) break;
        acc += step;
        bucket.push_back({static_cast<std::int32_t>(k), static_cast<std::int32_t>(n),
                          L[pos(k)] - L[pos(n)], lam_n, static_cast<double>(acc)});
      }
      t.raw_count += bucket.size();
      flush_bucket(bucket, t.entries);
      bucket.clear();
      acc = 0.0L;
      for (Index k = n - 1; k >= w.lo; --k) {
        double step = sys.diag_log(k, i);
        if (step == kNegInf) {
          char buf[128];
          std::snprintf(buf, sizeof buf,
                        "coefficient vanishes at n = %lld on coordinate %d; growth data needs both directions",
                        static_cast<long long>(k), c);
          throw NumericError(buf);
        }
        acc -= step;
        bucket.push_back({static_cast<std::int32_t>(k), static_cast<std::int32_t>(n),
                          L[pos(k)] - L[pos(n)], lam_n, static_cast<double>(acc)});
      }
      t.raw_count += bucket.size();
      flush_bucket(bucket, t.entries);
    }
  }
  t.finalize();
  return t;
}

inline PairTable dense_growth_table(const LinearSystem& sys, const std::vector<double>& L,
                                    const std::vector<double>& lam, Window w, double sigma_min) {
  if (!sys.invertible)
    throw NumericError("growth data needs backward transitions; system is not invertible");
  PairTable t;
  std::vector<PairEntry> bucket;
  auto pos = [&](Index n) { return static_cast<std::size_t>(n - w.lo); };
  for (Index n = w.lo; n <= w.hi; ++n) {
    double lam_n = lam[pos(n)];
    auto push = [&](Index k, const ScaledMatrix& v) {
      bucket.push_back({static_cast<std::int32_t>(k), static_cast<std::int32_t>(n),
                        L[pos(k)] - L[pos(n)], lam_n, v.log_norm()});
    };
    bucket.clear();
    ScaledMatrix m = ScaledMatrix::identity(sys.dim);
    push(n, m);
    for (Index k = n + 1; k <= w.hi; ++k) {
      m = sys.coeff(k - 1) * m;
      push(k, m);
    }
    t.raw_count += bucket.size();
    flush_bucket(bucket, t.entries);
    bucket.clear();
    m = ScaledMatrix::identity(sys.dim);
    for (Index k = n - 1; k >= w.lo; --k) {
      m = inverse(sys.coeff(k), sigma_min, "coefficient") * m;
      push(k, m);
    }
    t.raw_count += bucket.size();
    flush_bucket(bucket, t.entries);
  }
  t.finalize();
  return t;
}

inline std::vector<int> normalize_coords(std::vector<int> coords, int dim) {
  std::sort(coords.begin(), coords.end());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (coords[i] < 1 || coords[i] > dim)
      throw ConfigError("coordinate " + std::to_string(coords[i]) + " outside 1.." +
                        std::to_string(dim));
    if (i > 0 && coords[i] == coords[i - 1])
      throw ConfigError("duplicate coordinate " + std::to_string(coords[i]));
  }
  return coords;
}

}  // namespace detail

// Caches the per-split constraint tables for one (system, rate, window)
// triple. Lookups build lazily and are not thread-safe on a miss; call
// prebuild() before sharing across sweep workers.
class FitContext {
 public:
  FitContext(LinearSystem sys, GrowthRate rate, Window win, double sigma_min = 1e-12)
      : sys_(std::move(sys)), rate_(std::move(rate)), win_(win), sigma_min_(sigma_min) {
    if (win_.lo < INT32_MIN || win_.hi > INT32_MAX)
      throw ConfigError("window exceeds the supported index range");
    L_.resize(static_cast<std::size_t>(win_.n_points()));
    lam_.resize(L_.size());
    for (Index n = win_.lo; n <= win_.hi; ++n) {
      L_[static_cast<std::size_t>(n - win_.lo)] = rate_.mu_log(n);
      lam_[static_cast<std::size_t>(n - win_.lo)] = nonuniform_weight(rate_, n);
    }
  }

  const LinearSystem& system() const { return sys_; }
  const GrowthRate& rate() const { return rate_; }
  Window window() const { return win_; }
  double sigma_min() const { return sigma_min_; }

  // Both tables are keyed by the stable coordinate set; the unstable table
  // covers its complement.
  const detail::PairTable& stable_table(const std::vector<int>& stable_coords) const {
    return side_table(stable_coords, Side::stable);
  }
  const detail::PairTable& unstable_table(const std::vector<int>& stable_coords) const {
    return side_table(stable_coords, Side::unstable);
  }

  const detail::PairTable& growth_table() const {
    if (!growth_) {
      growth_ = sys_.diagonal ? detail::diag_growth_table(sys_, L_, lam_, win_)
                              : detail::dense_growth_table(sys_, L_, lam_, win_, sigma_min_);
    }
    return *growth_;
  }

  // One-shot table for a projector family that is not a coordinate split.
  detail::PairTable family_table(const ProjectorFamily& family, Side side) const {
    return detail::dense_side_table(sys_, L_, lam_, win_, family, side, sigma_min_);
  }

  void prebuild(const std::vector<std::vector<int>>& splits) {
    for (const auto& s : splits) {
      if (!s.empty()) stable_table(s);
      if (static_cast<int>(s.size()) < sys_.dim) unstable_table(s);
    }
  }

 private:
  const detail::PairTable& side_table(const std::vector<int>& coords, Side side) const {
    auto key = detail::normalize_coords(coords, sys_.dim);
    auto& cache = side == Side::stable ? stable_ : unstable_;
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    detail::PairTable t;
    if (sys_.diagonal) {
      std::vector<int> active;
      if (side == Side::stable) {
        active = key;
      } else {
        for (int c = 1; c <= sys_.dim; ++c)
          if (!std::binary_search(key.begin(), key.end(), c)) active.push_back(c);
      }
      t = detail::diag_side_table(sys_, L_, lam_, win_, active, side);
    } else {
      t = detail::dense_side_table(sys_, L_, lam_, win_, coordinate_projector(sys_.dim, key),
                                   side, sigma_min_);
    }
    return cache.emplace(std::move(key), std::move(t)).first->second;
  }

  LinearSystem sys_;
  GrowthRate rate_;
  Window win_;
  double sigma_min_;
  std::vector<double> L_, lam_;
  mutable std::map<std::vector<int>, detail::PairTable> stable_, unstable_;
  mutable std::optional<detail::PairTable> growth_;
};

namespace detail {

inline FitReport run_side_fit(const PairTable& t, Side side, DichotomyClass cls, double gamma,
                              const FitCaps& caps) {
  FitReport r;
  r.side = side;
  r.cls = cls;
  r.gamma = gamma;
  r.n_constraints = t.raw_count;
  if (t.entries.empty()) throw NumericError("fit window holds no transition data");

  const double u_hi = side == Side::stable ? -caps.alpha_min : -caps.beta_min;
  const double v_cap = cls == DichotomyClass::uniform ? 0.0 : caps.theta_cap;
  const double w = cls == DichotomyClass::nonuniform
                       ? static_cast<double>(caps.nonuniform_sum_multiplier)
                       : 1.0;

  // Phase 1: smallest multiplier admitting any rates inside the box,
  // evaluated at the box corner (u_hi, v_cap).
  double lift = 0.0;
  std::size_t arg = t.entries.size();
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    const PairEntry& p = t.entries[i];
    double need = (p.logv - gamma * p.dx) - (u_hi * std::abs(p.dx) + v_cap * p.lam);
    if (need > lift) {
      lift = need;
      arg = i;
    }
  }
  if (lift > caps.log_k_cap) {
    const PairEntry& p = t.entries[arg];
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "needs log K = %.6g, above cap %.6g; binding pair (k = %d, n = %d)", lift,
                  caps.log_k_cap, p.k, p.n);
    r.note = buf;
    r.log_k = lift;
    return r;
  }

  // Phase 2: best rates at that multiplier.
  auto row = [&](std::uint32_t i) {
    const PairEntry& p = t.entries[i];
    return std::tuple<double, double, double>(std::abs(p.dx), p.lam,
                                              p.logv - gamma * p.dx - lift);
  };
  LpBox box{kNegInf, u_hi, v_cap, w};
  LpResult res = minimize_prepared(row, t.env_order, t.flat_order, box);
  if (res.unbounded) throw NumericError("fit unbounded: window provides no growth separation");
  if (!res.feasible) {
    r.note = "empty parameter box";
    return r;
  }

  // Exact residual pass: fold any remaining violation into the multiplier so
  // the reported constants certify every window pair with slack <= 0.
  double worst = kNegInf;
  for (const PairEntry& p : t.entries) {
    double s = (p.logv - gamma * p.dx) - (lift + res.u * std::abs(p.dx) + res.v * p.lam);
    worst = std::max(worst, s);
  }
  double fill = std::max(0.0, worst);
  r.feasible = true;
  r.log_k = lift + fill;
  r.worst_slack = worst - fill;
  if (side == Side::stable) {
    r.alpha = res.u;
    r.theta = res.v;
    r.objective = res.u + res.v;
    r.class_objective = res.u + w * res.v;
  } else {
    r.beta = -res.u;
    r.nu = res.v;
    r.objective = -res.u - res.v;
    r.class_objective = -(res.u + w * res.v);
  }
  return r;
}

}  // namespace detail

inline FitReport fit_stable(const FitContext& ctx, const std::vector<int>& stable_coords,
                            double gamma = 0.0, const FitCaps& caps = {},
                            DichotomyClass cls = DichotomyClass::slow) {
  if (stable_coords.empty())
    throw ConfigError("fit_stable needs a projector of rank at least one");
  return detail::run_side_fit(ctx.stable_table(stable_coords), Side::stable, cls, gamma, caps);
}

inline FitReport fit_unstable(const FitContext& ctx, const std::vector<int>& stable_coords,
                              double gamma = 0.0, const FitCaps& caps = {},
                              DichotomyClass cls = DichotomyClass::slow) {
  if (static_cast<int>(stable_coords.size()) >= ctx.system().dim)
    throw ConfigError("fit_unstable needs a projector kernel of rank at least one");
  return detail::run_side_fit(ctx.unstable_table(stable_coords), Side::unstable, cls, gamma,
                              caps);
}

// Projector-family entry points. Coordinate families go through the cached
// split tables; anything else through the dense family path.
inline FitReport fit_stable(const LinearSystem& sys, const GrowthRate& rate,
                            const ProjectorFamily& family, Window win, double gamma = 0.0,
                            const FitCaps& caps = {}, DichotomyClass cls = DichotomyClass::slow) {
  if (family.rank < 1) throw ConfigError("fit_stable needs a projector of rank at least one");
  FitContext ctx(sys, rate, win, caps.sigma_min);
  if (!family.coords.empty())
    return detail::run_side_fit(ctx.stable_table(family.coords), Side::stable, cls, gamma, caps);
  return detail::run_side_fit(ctx.family_table(family, Side::stable), Side::stable, cls, gamma,
                              caps);
}

inline FitReport fit_unstable(const LinearSystem& sys, const GrowthRate& rate,
                              const ProjectorFamily& family, Window win, double gamma = 0.0,
                              const FitCaps& caps = {},
                              DichotomyClass cls = DichotomyClass::slow) {
  if (family.rank >= sys.dim)
    throw ConfigError("fit_unstable needs a projector kernel of rank at least one");
  FitContext ctx(sys, rate, win, caps.sigma_min);
  if (!family.coords.empty() || family.rank == 0)
    return detail::run_side_fit(ctx.unstable_table(family.coords), Side::unstable, cls, gamma,
                                caps);
  return detail::run_side_fit(ctx.family_table(family, Side::unstable), Side::unstable, cls,
                              gamma, caps);
}

inline void validate_params(const DichotomyParams& p, int rank, int dim) {
  if (p.log_k < 0.0) throw ConfigError("multiplier log K must be nonnegative");
  if (p.theta < 0.0 || p.nu < 0.0) throw ConfigError("nonuniform weights must be nonnegative");
  if (rank >= 1 && !p.alpha)
    throw ConfigError("a projector of positive rank needs stable-side parameters");
  if (rank == 0 && p.alpha) throw ConfigError("a rank-0 projector admits no stable side");
  if (rank < dim && !p.beta)
    throw ConfigError("a projector kernel of positive rank needs unstable-side parameters");
  if (rank == dim && p.beta) throw ConfigError("a full-rank projector admits no unstable side");
  if (p.alpha && *p.alpha >= 0.0) throw ConfigError("stable rate must be negative");
  if (p.beta && *p.beta <= 0.0) throw ConfigError("unstable rate must be positive");
  switch (p.cls) {
    case DichotomyClass::uniform:
      if (p.theta != 0.0 || p.nu != 0.0)
        throw ConfigError("uniform class requires theta = nu = 0");
      break;
    case DichotomyClass::nonuniform:
      if (p.alpha && *p.alpha + p.theta >= 0.0)
        throw ConfigError("nonuniform class requires alpha + theta < 0");
      if (p.beta && *p.beta - p.nu <= 0.0)
        throw ConfigError("nonuniform class requires beta - nu > 0");
      break;
    case DichotomyClass::slow:
      break;
  }
}

// Checks given constants against every window pair; worst_slack is the
// largest violation (<= 0 means the bound certifies the whole window).
inline FitReport verify(const LinearSystem& sys, const GrowthRate& rate,
                        const ProjectorFamily& family, const DichotomyParams& params, Window win,
                        double sigma_min = 1e-12) {
  validate_params(params, family.rank, sys.dim);
  FitContext ctx(sys, rate, win, sigma_min);
  bool coord = !family.coords.empty() || family.rank == 0 || family.rank == sys.dim;
  double worst = kNegInf;
  std::size_t rows = 0;
  auto scan = [&](const detail::PairTable& t, double u, double v) {
    for (const detail::PairEntry& p : t.entries)
      worst = std::max(worst, p.logv - (params.log_k + u * p.dx + v * p.lam));
    rows += t.raw_count;
  };
  std::vector<int> coords = family.coords;
  if (family.rank == sys.dim && coords.empty())
    for (int c = 1; c <= sys.dim; ++c) coords.push_back(c);
  if (params.alpha) {
    if (coord) scan(ctx.stable_table(coords), *params.alpha, params.theta);
    else scan(ctx.family_table(family, Side::stable), *params.alpha, params.theta);
  }
  if (params.beta) {
    if (coord) scan(ctx.unstable_table(coords), *params.beta, params.nu);
    else scan(ctx.family_table(family, Side::unstable), *params.beta, params.nu);
  }
  FitReport r;
  r.cls = params.cls;
  r.alpha = params.alpha;
  r.beta = params.beta;
  r.theta = params.theta;
  r.nu = params.nu;
  r.log_k = params.log_k;
  r.worst_slack = worst == kNegInf ? 0.0 : worst;
  r.n_constraints = rows;
  r.feasible = r.worst_slack <= 0.0;
  r.note = "verify";
  return r;
}

inline GrowthFit growth_fit(const FitContext& ctx, const FitCaps& caps = {}) {
  const detail::PairTable& t = ctx.growth_table();
  if (t.entries.empty()) throw NumericError("growth window holds no transition data");

  // With both rate edges unbounded, only pairs carrying neither a ratio nor
  // a weight feature constrain the multiplier.
  double lift = 0.0;
  std::size_t arg = t.entries.size();
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    const detail::PairEntry& p = t.entries[i];
    if (p.dx == 0.0 && p.lam == 0.0 && p.logv > lift) {
      lift = p.logv;
      arg = i;
    }
  }
  if (lift > caps.log_k_cap) {
    const detail::PairEntry& p = t.entries[arg];
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "growth envelope needs log K = %.6g at pair (k = %d, n = %d); raise log_k_cap",
                  lift, p.k, p.n);
    throw NumericError(buf);
  }

  auto row = [&](std::uint32_t i) {
    const detail::PairEntry& p = t.entries[i];
    return std::tuple<double, double, double>(std::abs(p.dx), p.lam, p.logv - lift);
  };
  LpBox box{0.0, kPosInf, kPosInf, 1.0};
  LpResult res = minimize_prepared(row, t.env_order, t.flat_order, box);
  if (!res.feasible || res.unbounded)
    throw NumericError("growth fit failed; raise log_k_cap or shrink the window");

  double worst = kNegInf;
  for (const detail::PairEntry& p : t.entries)
    worst = std::max(worst, p.logv - (lift + res.u * std::abs(p.dx) + res.v * p.lam));
  double fill = std::max(0.0, worst);
  GrowthFit g;
  g.a_hat = res.u;
  g.eps_hat = res.v;
  g.log_k_hat = lift + fill;
  g.worst_slack = worst - fill;
  g.n_constraints = t.raw_count;
  return g;
}

inline GrowthFit growth_fit(const LinearSystem& sys, const GrowthRate& rate, Window win,
                            const FitCaps& caps = {}) {
  FitContext ctx(sys, rate, win, caps.sigma_min);
  return growth_fit(ctx, caps);
}

// Verdict for one coordinate split at one gamma: both present sides must fit
// (the nonuniform class additionally demands strict rate-weight separation),
// and margin measures how far the verdict sits from the class floor. Shifting
// gamma by less than the margin provably keeps the same split feasible.
struct SplitVerdict {
  bool feasible = false;
  double margin = 0.0;
  std::optional<FitReport> stable, unstable;
};

inline SplitVerdict test_split(const FitContext& ctx, const std::vector<int>& stable_coords,
                               double gamma, DichotomyClass cls, const FitCaps& caps = {}) {
  SplitVerdict v;
  int d = ctx.system().dim;
  int rank = static_cast<int>(stable_coords.size());
  double st_gap = kPosInf, un_gap = kPosInf;
  if (rank >= 1) {
    FitReport st = fit_stable(ctx, stable_coords, gamma, caps, cls);
    bool ok = st.feasible;
    if (ok && cls == DichotomyClass::nonuniform) ok = st.class_objective <= -caps.alpha_min;
    if (ok) st_gap = cls == DichotomyClass::nonuniform ? -st.class_objective : -*st.alpha;
    v.stable = std::move(st);
    if (!ok) return v;
  }
  if (rank <= d - 1) {
    FitReport un = fit_unstable(ctx, stable_coords, gamma, caps, cls);
    bool ok = un.feasible;
    if (ok && cls == DichotomyClass::nonuniform) ok = un.class_objective >= caps.beta_min;
    if (ok) un_gap = cls == DichotomyClass::nonuniform ? un.class_objective : *un.beta;
    v.unstable = std::move(un);
    if (!ok) return v;
  }
  v.feasible = true;
  v.margin = std::min(st_gap, un_gap);
  return v;
}

inline DichotomyParams verdict_params(const SplitVerdict& v, DichotomyClass cls) {
  DichotomyParams p;
  p.cls = cls;
  if (v.stable && v.stable->feasible) {
    p.alpha = v.stable->alpha;
    p.theta = v.stable->theta.value_or(0.0);
    p.log_k = std::max(p.log_k, v.stable->log_k);
  }
  if (v.unstable && v.unstable->feasible) {
    p.beta = v.unstable->beta;
    p.nu = v.unstable->nu.value_or(0.0);
    p.log_k = std::max(p.log_k, v.unstable->log_k);
  }
  return p;
}

// All coordinate splits of {1..dim}, ordered by (rank, lexicographic).
inline std::vector<std::vector<int>> coordinate_subsets(int dim) {
  if (dim < 1 || dim > 16)
    throw ConfigError("coordinate split enumeration supports dimensions 1..16");
  std::vector<std::vector<int>> out;
  out.reserve(1u << dim);
  for (unsigned m = 0; m < (1u << dim); ++m) {
    std::vector<int> s;
    for (int i = 0; i < dim; ++i)
      if (m & (1u << i)) s.push_back(i + 1);
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  return out;
}

// Unique-projector diagnostic: lists every coordinate split the requested
// class accepts at this gamma. Two or more feasible splits violate
// uniqueness; exactly one upholds it.
struct UppReport {
  DichotomyClass cls = DichotomyClass::slow;
  double gamma = 0.0;
  std::vector<std::vector<int>> feasible_splits;
  bool unique() const { return feasible_splits.size() == 1; }
};

inline UppReport upp_check(const FitContext& ctx, double gamma, DichotomyClass cls,
                           const FitCaps& caps = {}) {
  UppReport r;
  r.cls = cls;
  r.gamma = gamma;
  for (const auto& s : coordinate_subsets(ctx.system().dim))
    if (test_split(ctx, s, gamma, cls, caps).feasible) r.feasible_splits.push_back(s);
  return r;
}

inline UppReport upp_check(const LinearSystem& sys, const GrowthRate& rate, Window win,
                           DichotomyClass cls, const FitCaps& caps = {}) {
  FitContext ctx(sys, rate, win, caps.sigma_min);
  return upp_check(ctx, 0.0, cls, caps);
}

// Bounded-solution diagnostic: flags coordinates whose full-line solution
// through e_i at n = 0 stays within bound_factor of its starting norm over
// the window. A flagged coordinate defeats the unbounded-solutions property.
struct UspReport {
  std::vector<int> flagged;
  std::vector<double> sup_log_norm;  // per coordinate, relative to the value at 0
  double bound_log = 0.0;
  bool violated() const { return !flagged.empty(); }
};

inline UspReport usp_check(const LinearSystem& sys, Window win, double bound_factor = 10.0) {
  if (!sys.diagonal || !sys.diag_log)
    throw ConfigError("bounded-solution diagnostic requires diagonal structure");
  if (bound_factor < 1.0) throw ConfigError("bound factor must be at least 1");
  if (!win.contains(0)) throw ConfigError("diagnostic window must contain 0");
  UspReport r;
  r.bound_log = std::log(bound_factor);
  for (int i = 0; i < sys.dim; ++i) {
    double sup = 0.0;
    long double acc = 0.0L;
    for (Index n = 0; n < win.hi; ++n) {
      double step = sys.diag_log(n, i);
      if (step == kNegInf) break;  // solution reaches zero and stays there
      acc += step;
      sup = std::max(sup, static_cast<double>(acc));
    }
    bool full_line = true;
    acc = 0.0L;
    for (Index n = -1; n >= win.lo; --n) {
      double step = sys.diag_log(n, i);
      if (step == kNegInf) {
        full_line = false;  // no backward continuation through a dead coefficient
        break;
      }
      acc -= step;
      sup = std::max(sup, static_cast<double>(acc));
    }
    r.sup_log_norm.push_back(full_line ? sup : kPosInf);
    if (full_line && sup <= r.bound_log) r.flagged.push_back(i + 1);
  }
  return r;
}

}  // namespace dichospec
