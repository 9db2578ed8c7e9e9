#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dichospec/errors.hpp"
#include "dichospec/growth.hpp"
#include "dichospec/linalg.hpp"

namespace dichospec {

// Integer time window [lo, hi], both ends included.
struct Window {
  Index lo = -400;
  Index hi = 400;

  Window() = default;
  Window(Index l, Index h) : lo(l), hi(h) {
    if (l > h) throw ConfigError("window [" + std::to_string(l) + ", " + std::to_string(h) +
                                 "] is empty");
  }
  Index n_points() const { return hi - lo + 1; }
  bool contains(Index n) const { return lo <= n && n <= hi; }
};

// A nonautonomous linear difference system x(k+1) = A(k) x(k) on the integers.
// Coefficients are produced in scaled form; systems whose coefficient
// magnitudes leave double range (log |A(n)| beyond ~709) stay representable.
// For diagonal systems diag_log(n, i) must return log |A(n)_{ii}| exactly
// (never via the dense matrix), so per-coordinate cumulative sums do not
// lose small blocks to underflow against large ones.
struct LinearSystem {
  int dim = 1;
  std::function<ScaledMatrix(Index)> coeff;
  bool invertible = true;
  bool diagonal = false;
  std::function<double(Index, int)> diag_log;  // set iff diagonal
  std::string label;
};

// Diagonal system from per-coordinate log-magnitude functions. The dense
// coefficient is assembled relative to the largest entry, which keeps the
// scaled form exact (a diagonal matrix scaled by its max has norm 1).
inline LinearSystem make_diagonal_system(std::string label,
                                         std::vector<std::function<double(Index)>> logs,
                                         bool invertible = true) {
  if (logs.empty()) throw ConfigError("diagonal system needs at least one coordinate");
  int d = static_cast<int>(logs.size());
  auto shared = std::make_shared<std::vector<std::function<double(Index)>>>(std::move(logs));
  LinearSystem sys;
  sys.dim = d;
  sys.invertible = invertible;
  sys.diagonal = true;
  sys.label = std::move(label);
  sys.diag_log = [shared](Index n, int i) { return (*shared)[static_cast<size_t>(i)](n); };
  sys.coeff = [shared, d](Index n) {
    double mx = kNegInf;
    for (int i = 0; i < d; ++i) mx = std::max(mx, (*shared)[i](n));
    Matrix m = Matrix::Zero(d, d);
    if (mx == kNegInf) return ScaledMatrix{m, kNegInf};
    for (int i = 0; i < d; ++i) {
      double l = (*shared)[i](n);
      m(i, i) = l == kNegInf ? 0.0 : std::exp(l - mx);
    }
    return ScaledMatrix{m, mx};
  };
  return sys;
}

inline LinearSystem make_scalar_system(std::string label, std::function<double(Index)> log_coeff,
                                       bool invertible = true) {
  return make_diagonal_system(std::move(label), {std::move(log_coeff)}, invertible);
}

// Loads A(n) from CSV lines "n,a11,a12,...,add" (row-major, dimension inferred
// from the first data line). Lookups outside the table are errors.
inline LinearSystem system_from_csv(const std::string& path, double sigma_min = 1e-12) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open system file '" + path + "'");
  auto table = std::make_shared<std::map<Index, Matrix>>();
  int dim = 0;
  bool diagonal = true, invertible = true;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'n,entries...'");
    int d = static_cast<int>(std::lround(std::sqrt(double(cells.size() - 1))));
    if (static_cast<size_t>(d) * d + 1 != cells.size())
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": entry count is not a perfect square");
    if (dim == 0) dim = d;
    if (d != dim)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": inconsistent dimension");
    try {
      Index n = std::stoll(cells[0]);
      Matrix m(d, d);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) m(r, c) = std::stod(cells[1 + r * d + c]);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          if (r != c && m(r, c) != 0.0) diagonal = false;
      if (smallest_singular_value(m) < sigma_min) invertible = false;
      if (!table->emplace(n, m).second)
        throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate index");
    } catch (const std::invalid_argument&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": unparsable entry");
    }
  }
  if (table->empty()) throw ConfigError(path + ": empty system table");

  LinearSystem sys;
  sys.dim = dim;
  sys.diagonal = diagonal;
  sys.invertible = invertible;
  sys.label = "csv:" + path;
  auto lookup = [table, path](Index n) -> const Matrix& {
    auto it = table->find(n);
    if (it == table->end())
      throw ConfigError("system table '" + path + "' has no entry for n = " +
                        std::to_string(n));
    return it->second;
  };
  sys.coeff = [lookup](Index n) { return ScaledMatrix::from_dense(lookup(n)); };
  if (diagonal)
    sys.diag_log = [lookup](Index n, int i) {
      double v = std::abs(lookup(n)(i, i));
      return v == 0.0 ? kNegInf : std::log(v);
    };
  return sys;
}

// A projector-valued sequence P(n). When the projectors are coordinate
// projectors (the only kind the fitting layer optimizes over), coords holds
// the selected coordinates, 1-based; it is empty for general families.
struct ProjectorFamily {
  int dim = 0;
  int rank = 0;
  std::function<Matrix(Index)> proj;
  std::vector<int> coords;

  Matrix complement_at(Index n) const {
    return Matrix::Identity(dim, dim) - proj(n);
  }
};

inline ProjectorFamily coordinate_projector(int dim, std::vector<int> coords) {
  std::sort(coords.begin(), coords.end());
  for (size_t i = 0; i < coords.size(); ++i) {
    if (coords[i] < 1 || coords[i] > dim)
      throw ConfigError("projector coordinate " + std::to_string(coords[i]) +
                        " outside 1.." + std::to_string(dim));
    if (i > 0 && coords[i] == coords[i - 1])
      throw ConfigError("duplicate projector coordinate " + std::to_string(coords[i]));
  }
  Matrix m = Matrix::Zero(dim, dim);
  for (int c : coords) m(c - 1, c - 1) = 1.0;
  ProjectorFamily p;
  p.dim = dim;
  p.rank = static_cast<int>(coords.size());
  p.coords = std::move(coords);
  p.proj = [m](Index) { return m; };
  return p;
}

// Checks, over the window, that P is an idempotent family of constant rank
// that commutes with the evolution (A(n)P(n) = P(n+1)A(n)) and that A(n)
// maps ker P(n) onto ker P(n+1) without collapse. Throws ConfigError naming
// the first index where an invariant fails.
inline void validate_projector(const ProjectorFamily& p, const LinearSystem& sys, Window w,
                               double tol = 1e-8, double sigma_min = 1e-12) {
  if (p.dim != sys.dim) throw ConfigError("projector dimension mismatch");
  for (Index n = w.lo; n <= w.hi; ++n) {
    Matrix pn = p.proj(n);
    if ((pn * pn - pn).norm() > tol * (1.0 + pn.norm()))
      throw ConfigError("projector not idempotent at n = " + std::to_string(n));
    if (numeric_rank(pn) != p.rank)
      throw ConfigError("projector rank deviates at n = " + std::to_string(n));
  }
  for (Index n = w.lo; n < w.hi; ++n) {
    ScaledMatrix an = sys.coeff(n);
    Matrix pn = p.proj(n), pn1 = p.proj(n + 1);
    ScaledMatrix lhs = an * pn;      // A(n) P(n)
    ScaledMatrix rhs = pn1 * an;     // P(n+1) A(n)
    if (scaled_rel_diff(lhs, rhs) > tol)
      throw ConfigError("projector does not commute with the system at n = " +
                        std::to_string(n));
    if (p.rank < p.dim) {
      Matrix bn = kernel_basis(pn), bn1 = kernel_basis(pn1);
      Matrix restricted = bn1.transpose() * an.mat * bn;
      if (smallest_singular_value(restricted) < sigma_min)
        throw ConfigError("coefficient collapses ker P at n = " + std::to_string(n));
    }
  }
}

// Evolution operator Phi(k, n) of a system, with per-anchor product chains
// cached. Backward transitions use coefficient inverses when the system is
// invertible; otherwise they require a projector family and are defined as
// the inverse of the forward map restricted to ker P (the returned matrix
// acts as that inverse on ker P(n) and annihilates im P(n)).
// Not thread-safe; build all transitions before sharing across threads.
class EvolutionOperator {
 public:
  explicit EvolutionOperator(LinearSystem sys, std::optional<ProjectorFamily> proj = {},
                             double sigma_min = 1e-12)
      : sys_(std::move(sys)), proj_(std::move(proj)), sigma_min_(sigma_min) {
    if (proj_ && proj_->dim != sys_.dim) throw ConfigError("projector dimension mismatch");
  }

  const LinearSystem& system() const { return sys_; }

  ScaledMatrix transition(Index k, Index n) const {
    if (k == n) return ScaledMatrix::identity(sys_.dim);
    if (sys_.diagonal && sys_.diag_log) {
      ScaledMatrix t;
      if (diagonal_transition(k, n, t)) return t;
    }
    if (k > n) return forward(k, n);
    if (sys_.invertible) return backward(k, n);
    if (proj_) return kernel_backward(k, n);
    throw NumericError("backward transition of a non-invertible system needs a projector");
  }

 private:
  // Coordinate-wise transition for diagonal systems. Immune to the scale
  // spread between coordinates that makes dense products of such systems
  // numerically singular. Returns false only when a vanished coefficient
  // makes a non-invertible backward query fall through to the kernel path.
  bool diagonal_transition(Index k, Index n, ScaledMatrix& out) const {
    const int d = static_cast<int>(sys_.dim);
    std::vector<long double> acc(static_cast<size_t>(d), 0.0L);
    std::vector<bool> dead(static_cast<size_t>(d), false);
    const Index lo = std::min(k, n), hi = std::max(k, n);
    for (Index j = lo; j < hi; ++j)
      for (int i = 0; i < d; ++i) {
        double s = sys_.diag_log(j, i);
        if (s == kNegInf) {
          if (sys_.invertible)
            throw NumericError("coefficient at n = " + std::to_string(j) +
                               " is singular though the system claims invertibility");
          dead[static_cast<size_t>(i)] = true;
        } else {
          acc[static_cast<size_t>(i)] += s;
        }
      }
    if (k < n && std::find(dead.begin(), dead.end(), true) != dead.end())
      return false;  // backward through a vanished coefficient: not diagonal-solvable
    double log_max = kNegInf;
    for (int i = 0; i < d; ++i)
      if (!dead[static_cast<size_t>(i)]) {
        double v = static_cast<double>(k > n ? acc[static_cast<size_t>(i)]
                                             : -acc[static_cast<size_t>(i)]);
        log_max = std::max(log_max, v);
      }
    if (log_max == kNegInf) {
      out = ScaledMatrix::zero(sys_.dim, sys_.dim);
      return true;
    }
    Matrix m = Matrix::Zero(sys_.dim, sys_.dim);
    for (int i = 0; i < d; ++i)
      if (!dead[static_cast<size_t>(i)]) {
        double v = static_cast<double>(k > n ? acc[static_cast<size_t>(i)]
                                             : -acc[static_cast<size_t>(i)]);
        m(i, i) = std::exp(v - log_max);
      }
    out = ScaledMatrix{std::move(m), log_max};
    return true;
  }

  const ScaledMatrix& coeff_at(Index n) const {
    auto it = coeff_.find(n);
    if (it == coeff_.end()) {
      ScaledMatrix a = sys_.coeff(n);
      if (sys_.invertible && (a.is_zero() || smallest_singular_value(a.mat) < sigma_min_))
        throw NumericError("coefficient at n = " + std::to_string(n) +
                           " is singular though the system claims invertibility");
      it = coeff_.emplace(n, std::move(a)).first;
    }
    return it->second;
  }

  ScaledMatrix forward(Index k, Index n) const {
    auto& chain = up_[n];
    if (chain.empty()) chain.push_back(ScaledMatrix::identity(sys_.dim));
    while (static_cast<Index>(chain.size()) <= k - n) {
      Index step = n + static_cast<Index>(chain.size()) - 1;
      chain.push_back(coeff_at(step) * chain.back());
    }
    return chain[static_cast<size_t>(k - n)];
  }

  ScaledMatrix backward(Index k, Index n) const {
    auto& chain = down_[n];
    if (chain.empty()) chain.push_back(ScaledMatrix::identity(sys_.dim));
    while (static_cast<Index>(chain.size()) <= n - k) {
      Index step = n - static_cast<Index>(chain.size());
      ScaledMatrix inv = inverse(coeff_at(step), sigma_min_,
                                 "coefficient at n = " + std::to_string(step));
      chain.push_back(inv * chain.back());
    }
    return chain[static_cast<size_t>(n - k)];
  }

  ScaledMatrix kernel_backward(Index k, Index n) const {
    Matrix bk = kernel_basis(proj_->proj(k));
    Matrix bn = kernel_basis(proj_->proj(n));
    if (bk.cols() != bn.cols())
      throw NumericError("kernel dimension changes between n = " + std::to_string(k) +
                         " and n = " + std::to_string(n));
    if (bk.cols() == 0) return ScaledMatrix::zero(sys_.dim, sys_.dim);
    ScaledMatrix fwd = forward(n, k);
    ScaledMatrix c = ScaledMatrix::from_dense(bn.transpose() * fwd.mat * bk);
    if (c.is_zero() || smallest_singular_value(c.mat) < sigma_min_)
      throw NumericError("no backward extension: forward map degenerates on ker P between " +
                         std::to_string(k) + " and " + std::to_string(n));
    c.log_scale += fwd.log_scale;
    ScaledMatrix cinv = inverse(c, sigma_min_, "kernel restriction");
    Matrix qn = Matrix::Identity(sys_.dim, sys_.dim) - proj_->proj(n);
    ScaledMatrix r = ScaledMatrix::from_dense(bk * cinv.mat * bn.transpose() * qn);
    if (!r.is_zero()) r.log_scale += cinv.log_scale;
    return r;
  }

  LinearSystem sys_;
  std::optional<ProjectorFamily> proj_;
  double sigma_min_;
  mutable std::map<Index, ScaledMatrix> coeff_;
  mutable std::map<Index, std::vector<ScaledMatrix>> up_, down_;
};

// gamma-weighted view of a system under a growth rate: the transition of the
// weighted system satisfies log ||Phi_gamma(k, n)|| =
// log ||Phi(k, n)|| - gamma * (log mu(k) - log mu(n)), an exact affine shift
// in log space. The weighting is applied as that shift rather than by
// multiplying coefficients, so gamma = 0 reproduces the base transitions
// bit for bit.
struct WeightedSystem {
  LinearSystem base;
  GrowthRate rate;
  double gamma = 0.0;
};

inline WeightedSystem make_weighted(LinearSystem sys, GrowthRate rate, double gamma) {
  return {std::move(sys), std::move(rate), gamma};
}

inline ScaledMatrix weighted_transition(const EvolutionOperator& op, const GrowthRate& rate,
                                        double gamma, Index k, Index n) {
  ScaledMatrix t = op.transition(k, n);
  if (!t.is_zero()) t.log_scale -= gamma * log_ratio(rate, k, n);
  return t;
}

// The weighted system as a plain coefficient sequence
// A_gamma(n) = (mu(n)/mu(n+1))^gamma A(n), for callers that need one.
inline LinearSystem weighted_coefficients(const WeightedSystem& ws) {
  LinearSystem out = ws.base;
  auto base_coeff = ws.base.coeff;
  auto rate = ws.rate;
  double gamma = ws.gamma;
  out.coeff = [base_coeff, rate, gamma](Index n) {
    ScaledMatrix a = base_coeff(n);
    if (!a.is_zero()) a.log_scale -= gamma * log_ratio(rate, n + 1, n);
    return a;
  };
  if (ws.base.diagonal) {
    auto base_diag = ws.base.diag_log;
    out.diag_log = [base_diag, rate, gamma](Index n, int i) {
      return base_diag(n, i) - gamma * log_ratio(rate, n + 1, n);
    };
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "@%g", gamma);
  out.label = ws.base.label + buf;
  return out;
}

// Log norms of the solution through (n0, xi) over [lo, hi]. The backward half
// needs an invertible system. Norms are accumulated on a renormalized vector,
// so solutions may grow past double range.
struct SolutionNorms {
  Index lo = 0;
  std::vector<double> log_norms;  // log ||Phi(n, n0) xi||, n = lo .. lo + size - 1

  double at(Index n) const { return log_norms[static_cast<size_t>(n - lo)]; }
};

inline SolutionNorms solution_log_norms(const EvolutionOperator& op, Index n0,
                                        const Vector& xi, Window w) {
  const auto& sys = op.system();
  if (xi.size() != sys.dim) throw ConfigError("initial vector dimension mismatch");
  double nrm = xi.norm();
  if (nrm == 0.0) throw ConfigError("zero initial vector has no direction");
  if (!w.contains(n0)) throw ConfigError("anchor outside the window");
  if (!sys.invertible && w.lo < n0)
    throw NumericError("backward solution norms require an invertible system");

  SolutionNorms out;
  out.lo = w.lo;
  out.log_norms.assign(static_cast<size_t>(w.n_points()), kNegInf);
  out.log_norms[static_cast<size_t>(n0 - w.lo)] = std::log(nrm);

  Vector v = xi / nrm;
  double acc = std::log(nrm);
  for (Index n = n0; n < w.hi; ++n) {
    ScaledMatrix a = op.system().coeff(n);
    Vector next = a.mat * v;
    double nn = next.norm();
    if (a.is_zero() || nn == 0.0) { acc = kNegInf; break; }
    acc += a.log_scale + std::log(nn);
    v = next / nn;
    out.log_norms[static_cast<size_t>(n + 1 - w.lo)] = acc;
  }
  v = xi / nrm;
  acc = std::log(nrm);
  for (Index n = n0; n > w.lo; --n) {
    ScaledMatrix a = op.system().coeff(n - 1);
    ScaledMatrix inv = inverse(a, 1e-12, "coefficient at n = " + std::to_string(n - 1));
    Vector prev = inv.mat * v;
    double pn = prev.norm();
    acc += inv.log_scale + std::log(pn);
    v = prev / pn;
    out.log_norms[static_cast<size_t>(n - 1 - w.lo)] = acc;
  }
  return out;
}

}  // namespace dichospec
