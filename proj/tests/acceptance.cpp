// Acceptance gate. Runs each shipped criterion exactly as stated, at the
// stated tolerance, and prints one [PASS]/[FAIL] line per criterion; the
// exit code is the number of failed criteria. Every check is computed fresh
// here (no golden files). A criterion the windowed method cannot honestly
// meet still runs as stated and reports FAIL with the measured values.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <dichospec/corpus.hpp>
#include <dichospec/fit.hpp>
#include <dichospec/growth.hpp>
#include <dichospec/kinematics.hpp>
#include <dichospec/linalg.hpp>
#include <dichospec/ratio.hpp>
#include <dichospec/spectrum.hpp>
#include <dichospec/system.hpp>

using namespace dichospec;

namespace {

int g_failed = 0;
std::string g_failed_ids;

std::string strf(const char* fmt, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) {
    ++g_failed;
    if (!g_failed_ids.empty()) g_failed_ids += ", ";
    g_failed_ids += id;
  }
}

bool near(double x, double ref, double tol) { return std::isfinite(x) && std::abs(x - ref) <= tol; }

SimilarityMap exp_decay_map(const GrowthRate& rate) {
  return make_scalar_similarity(
      "exp(-n)", [](Index n) { return -static_cast<double>(n); }, 0.0, 2.0, rate);
}

// ---------------------------------------------------------------------------
// 1. Non-invariance counterexample: the oscillating system at omega=2, a=1
//    has nonuniform spectrum [-5,1]; conjugating by S(n)=e^{-n} moves it to
//    [-4,2]. Window [-400,400], grid 0.05, refinement 0.01, each endpoint
//    within 0.1, the whole experiment under a minute.
void criterion1() {
  auto t0 = std::chrono::steady_clock::now();
  ExampleEntry e = get_example("ex731", {{"omega", 2.0}, {"a", 1.0}});
  SimilarityMap s = exp_decay_map(e.rate);
  SweepSettings st;
  st.gamma_range = std::pair{-7.5, 3.5};
  st.grid_step = 0.05;
  st.window = Window{-400, 400};
  st.refinement_tol = 0.01;
  InvarianceReport rep =
      invariance_experiment(e.system, s, e.rate, DichotomyClass::nonuniform, st);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  bool shape = rep.base.intervals.size() == 1 && rep.transformed.intervals.size() == 1;
  double blo = shape ? rep.base.intervals[0].lo : std::numeric_limits<double>::quiet_NaN();
  double bhi = shape ? rep.base.intervals[0].hi : blo;
  double tlo = shape ? rep.transformed.intervals[0].lo : blo;
  double thi = shape ? rep.transformed.intervals[0].hi : blo;
  bool ok = shape && near(blo, -5.0, 0.1) && near(bhi, 1.0, 0.1) && near(tlo, -4.0, 0.1) &&
            near(thi, 2.0, 0.1) && rep.non_invariance && secs < 60.0;
  report("C1 non-invariance counterexample", ok,
         strf("base [%.4f, %.4f] vs [-5, 1]; transformed [%.4f, %.4f] vs [-4, 2]; verdict '%s'; "
              "%.1f s",
              blo, bhi, tlo, thi, rep.verdict.c_str(), secs));
}

// ---------------------------------------------------------------------------
// 2. Quadratic-rate spectra chain for the scalar system with coefficient
//    e^{-2n-1}: nonuniform spectrum [-1,1] within 0.1; projector-uniqueness
//    sweep ~ (-1,1) with both endpoints open; the uniform-class resolvent
//    test required to fail at every grid point of [-3,3]; the slow class
//    (weight cap 100) required to accept every grid point.
void criterion2() {
  ExampleEntry e = get_example("ex707");
  Window win{-200, 200};
  SweepSettings st;
  st.gamma_range = std::pair{-3.0, 3.0};
  st.grid_step = 0.05;
  st.window = win;

  SpectrumEstimate nm = estimate_spectrum(e.system, e.rate, DichotomyClass::nonuniform, st);
  bool ok_n = nm.intervals.size() == 1 && near(nm.intervals[0].lo, -1.0, 0.1) &&
              near(nm.intervals[0].hi, 1.0, 0.1);

  SpectrumEstimate up = estimate_spectrum(e.system, e.rate, DichotomyClass::slow, st, true);
  bool ok_u = up.intervals.size() == 1 && near(up.intervals[0].lo, -1.0, 0.1) &&
              near(up.intervals[0].hi, 1.0, 0.1) && up.intervals[0].open_lo &&
              up.intervals[0].open_hi;

  FitContext ctx(e.system, e.rate, win);
  int n_grid = 0, uniform_rejections = 0, slow_accepts = 0;
  double mlo = std::numeric_limits<double>::infinity(), mhi = -mlo;
  for (int i = 0; i <= 120; ++i) {
    double g = -3.0 + 0.05 * i;
    ++n_grid;
    ResolventVerdict vu = resolvent_test(ctx, g, DichotomyClass::uniform);
    if (!vu.member) {
      ++uniform_rejections;
      mlo = std::min(mlo, g);
      mhi = std::max(mhi, g);
    }
    if (resolvent_test(ctx, g, DichotomyClass::slow).member) ++slow_accepts;
  }
  bool ok_c = uniform_rejections == n_grid;
  bool ok_d = slow_accepts == n_grid;

  bool ok = ok_n && ok_u && ok_c && ok_d;
  report("C2 quadratic-rate spectra chain", ok,
         strf("nonuniform [%.4f, %.4f] vs [-1, 1]%s; uniqueness sweep [%.4f, %.4f] open=(%d,%d)%s; "
              "uniform test fails at %d/%d grid points (failures only on [%.2f, %.2f])%s; "
              "slow resolvent accepts %d/%d%s",
              nm.intervals.empty() ? 0.0 : nm.intervals[0].lo,
              nm.intervals.empty() ? 0.0 : nm.intervals[0].hi, ok_n ? "" : " MISS",
              up.intervals.empty() ? 0.0 : up.intervals[0].lo,
              up.intervals.empty() ? 0.0 : up.intervals[0].hi,
              up.intervals.empty() ? 0 : int(up.intervals[0].open_lo),
              up.intervals.empty() ? 0 : int(up.intervals[0].open_hi), ok_u ? "" : " MISS",
              uniform_rejections, n_grid, mlo, mhi, ok_c ? "" : " VIOLATED", slow_accepts, n_grid,
              ok_d ? "" : " MISS"));
}

// ---------------------------------------------------------------------------
// 3. Ratio-map closed forms on the oscillating system: right gap stable
//    ratio -omega-gamma+3a, left gap unstable ratio -omega-gamma-3a, both
//    within 0.1 and monotone non-increasing; boundary bisection recovers the
//    spectral edges 1 and -5 within 0.1.
void criterion3() {
  ExampleEntry e = get_example("ex731", {{"omega", 2.0}, {"a", 1.0}});
  Window win{-400, 400};
  FitContext ctx(e.system, e.rate, win);

  const double right[] = {1.5, 2.0, 3.0, 5.0};
  bool ok_st = true, mono_st = true;
  double st_err = 0.0, prev = std::numeric_limits<double>::infinity();
  std::string st_vals;
  for (double g : right) {
    SplitVerdict v = test_split(ctx, {1}, g, DichotomyClass::nonuniform);
    double stv = v.feasible && v.stable ? v.stable->objective
                                        : std::numeric_limits<double>::quiet_NaN();
    ok_st = ok_st && near(stv, 1.0 - g, 0.1);
    st_err = std::max(st_err, std::abs(stv - (1.0 - g)));
    mono_st = mono_st && stv <= prev + 1e-12;
    prev = stv;
    st_vals += strf("%s%.3f", st_vals.empty() ? "" : " ", stv);
  }

  const double left[] = {-8.0, -6.0};
  bool ok_un = true, mono_un = true;
  double un_err = 0.0;
  prev = std::numeric_limits<double>::infinity();
  std::string un_vals;
  for (double g : left) {
    SplitVerdict v = test_split(ctx, {}, g, DichotomyClass::nonuniform);
    double unv = v.feasible && v.unstable ? v.unstable->objective
                                          : std::numeric_limits<double>::quiet_NaN();
    ok_un = ok_un && near(unv, -5.0 - g, 0.1);
    un_err = std::max(un_err, std::abs(unv - (-5.0 - g)));
    mono_un = mono_un && unv <= prev + 1e-12;
    prev = unv;
    un_vals += strf("%s%.3f", un_vals.empty() ? "" : " ", unv);
  }

  double edge_r = boundary_locator(e.system, e.rate, Side::stable, {0.5, 2.0}, 0.01, win);
  double edge_l = boundary_locator(e.system, e.rate, Side::unstable, {-6.0, -4.5}, 0.01, win);
  bool ok_edges = near(edge_r, 1.0, 0.1) && near(edge_l, -5.0, 0.1);

  bool ok = ok_st && ok_un && mono_st && mono_un && ok_edges;
  report("C3 ratio-map closed forms", ok,
         strf("st {%s} max err %.3f%s; un {%s} max err %.3f%s; monotone %s/%s; edges %.4f, %.4f "
              "vs 1, -5%s",
              st_vals.c_str(), st_err, ok_st ? "" : " MISS", un_vals.c_str(), un_err,
              ok_un ? "" : " MISS", mono_st ? "yes" : "NO", mono_un ? "yes" : "NO", edge_r, edge_l,
              ok_edges ? "" : " MISS"));
}

// ---------------------------------------------------------------------------
// 4. Growth-bound fit on the oscillating system over [-200,200]: feasible
//    with a_hat <= 3.05, eps_hat <= 2.05, log K_hat <= 2.05.
void criterion4() {
  ExampleEntry e = get_example("ex731", {{"omega", 2.0}, {"a", 1.0}});
  GrowthFit g = growth_fit(e.system, e.rate, Window{-200, 200});
  bool ok = g.worst_slack <= 1e-9 && g.a_hat <= 3.05 && g.eps_hat <= 2.05 && g.log_k_hat <= 2.05;
  report("C4 growth-bound fit", ok,
         strf("a_hat %.4f (<= 3.05), eps_hat %.4f (<= 2.05), log K %.4f (<= 2.05), worst slack "
              "%.2e",
              g.a_hat, g.eps_hat, g.log_k_hat, g.worst_slack));
}

// ---------------------------------------------------------------------------
// 5. Bounded-solution and projector-uniqueness diagnostics: the quadratic
//    example and the piecewise example violate both; the guarded oscillating
//    example at omega=2, a=0.8 passes both.
void criterion5() {
  Window win{-300, 300};
  auto probe = [&](const ExampleEntry& e, bool expect_violated) {
    UspReport usp = usp_check(e.system, win, 10.0);
    UppReport upp = upp_check(e.system, e.rate, win, DichotomyClass::slow);
    bool ok = (usp.violated() == expect_violated) && (upp.unique() != expect_violated);
    return std::pair{ok, strf("%s usp %s, upp %zu split(s)", e.name.c_str(),
                              usp.violated() ? "violated" : "holds", upp.feasible_splits.size())};
  };
  auto [ok1, d1] = probe(get_example("ex707"), true);
  auto [ok2, d2] = probe(get_example("ex718"), true);
  auto [ok3, d3] = probe(get_example("ex708", {{"omega", 2.0}, {"a", 0.8}}), false);
  report("C5 bounded-solution and uniqueness diagnostics", ok1 && ok2 && ok3,
         d1 + "; " + d2 + "; " + d3);
}

// ---------------------------------------------------------------------------
// 6. Property suite.

// Independent check of one side fit under the same two-phase rule: the
// multiplier lift is the box-corner closed form, then the best rate pair is
// found by exact 1-D convex minimization of u + v_min(u) (golden section on
// a convex piecewise-linear function), with v_min computed row by row.
struct BruteSide {
  bool feasible = false;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

BruteSide brute_side(const detail::PairTable& t, double gamma, Side side, bool uniform_cls,
                     const FitCaps& caps = {}) {
  const double u_hi = side == Side::stable ? -caps.alpha_min : -caps.beta_min;
  const double v_cap = uniform_cls ? 0.0 : caps.theta_cap;
  const double inf = std::numeric_limits<double>::infinity();

  double lift = 0.0;
  for (const detail::PairEntry& p : t.entries)
    lift = std::max(lift, (p.logv - gamma * p.dx) - (u_hi * std::abs(p.dx) + v_cap * p.lam));
  BruteSide out;
  if (lift > caps.log_k_cap) return out;

  auto objective = [&](double u) {
    double v = 0.0;
    for (const detail::PairEntry& p : t.entries) {
      double c = (p.logv - gamma * p.dx - lift) - u * std::abs(p.dx);
      if (p.lam > 0.0)
        v = std::max(v, c / p.lam);
      else if (c > 1e-9)
        return inf;
    }
    return v <= v_cap + 1e-12 ? u + v : inf;
  };

  // Feasibility is an up-set in u (v_min is non-increasing in u), so on a
  // tie, inf == inf included, the minimum lies in [m1, hi]; strict < keeps
  // the feasible side instead of discarding it.
  double lo = u_hi - 64.0, hi = u_hi;
  for (int it = 0; it < 220; ++it) {
    double m1 = lo + (hi - lo) * 0.381966, m2 = hi - (hi - lo) * 0.381966;
    if (objective(m1) < objective(m2))
      hi = m2;
    else
      lo = m1;
  }
  double best = std::min(objective(0.5 * (lo + hi)), objective(u_hi));
  if (best == inf) return out;
  out.feasible = true;
  out.objective = side == Side::stable ? best : -best;
  return out;
}

void criterion6() {
  std::mt19937 rng(7u);
  std::vector<ExampleEntry> corpus;
  for (const auto& name : example_names()) corpus.push_back(get_example(name));

  // cocycle identity on random triples
  double worst_cocycle = 0.0;
  for (const ExampleEntry& e : corpus) {
    EvolutionOperator op(e.system);
    std::uniform_int_distribution<int> pick(-40, 40);
    for (int t = 0; t < 200; ++t) {
      int a = pick(rng), b = pick(rng), c = pick(rng);
      if (a > b) std::swap(a, b);
      if (b > c) std::swap(b, c);
      if (a > b) std::swap(a, b);
      double d = scaled_rel_diff(op.transition(c, b) * op.transition(b, a), op.transition(c, a));
      worst_cocycle = std::max(worst_cocycle, d);
    }
  }
  bool ok_cocycle = worst_cocycle <= 1e-10;

  // the gamma-weighting is an exact affine shift of the log transition
  bool ok_weight = true;
  for (const ExampleEntry& e : corpus) {
    EvolutionOperator op(e.system);
    std::uniform_int_distribution<int> pick(-40, 40);
    for (double gamma : {0.7, -1.3}) {
      for (int t = 0; t < 50; ++t) {
        int n = pick(rng), k = pick(rng);
        ScaledMatrix base = op.transition(k, n);
        ScaledMatrix w = weighted_transition(op, e.rate, gamma, k, n);
        bool same_mat = w.mat.rows() == base.mat.rows() &&
                        (w.mat.array() == base.mat.array()).all();
        double expected = base.log_scale - gamma * log_ratio(e.rate, k, n);
        ok_weight = ok_weight && same_mat &&
                    (base.is_zero() ? w.is_zero() : w.log_scale == expected);
      }
    }
  }

  // conjugacy of every transform used here: Phi_A(k,n) S(n) = S(k) Phi_B(k,n)
  double worst_conj = 0.0;
  {
    ExampleEntry e = get_example("ex731", {{"omega", 2.0}, {"a", 1.0}});
    SimilarityMap s = exp_decay_map(e.rate);
    LinearSystem b = transform(e.system, s);
    EvolutionOperator opa(e.system), opb(b);
    std::uniform_int_distribution<int> pick(-100, 100);
    for (int t = 0; t < 100; ++t) {
      int n = pick(rng), k = pick(rng);
      worst_conj = std::max(worst_conj, scaled_rel_diff(opa.transition(k, n) * s.map(n),
                                                        s.map(k) * opb.transition(k, n)));
    }
  }
  {
    ExampleEntry e = diagonal_compose(
        {get_example("autonomous", {{"c", -4.0}}), get_example("autonomous", {{"c", 2.0}})});
    SimilarityMap s;
    s.dim = 2;
    s.rate = e.rate;
    s.label = "rotation";
    s.log_m = 0.01;
    s.theta_s = 0.0;
    s.map = [](Index n) {
      double ang = 0.1 * static_cast<double>(n);
      Matrix m(2, 2);
      m << std::cos(ang), -std::sin(ang), std::sin(ang), std::cos(ang);
      return ScaledMatrix::from_dense(m);
    };
    LinearSystem b = transform(e.system, s);
    EvolutionOperator opa(e.system), opb(b);
    std::uniform_int_distribution<int> pick(-20, 20);
    for (int t = 0; t < 100; ++t) {
      int n = pick(rng), k = pick(rng);
      worst_conj = std::max(worst_conj, scaled_rel_diff(opa.transition(k, n) * s.map(n),
                                                        s.map(k) * opb.transition(k, n)));
    }
  }
  bool ok_conj = worst_conj <= 1e-9;

  // LP against the independent brute oracle on small windows
  double worst_lp = 0.0;
  bool ok_lp = true;
  int n_lp = 0;
  {
    ExampleEntry e731 = get_example("ex731", {{"omega", 2.0}, {"a", 1.0}});
    ExampleEntry e707 = get_example("ex707");
    ExampleEntry two = diagonal_compose(
        {get_example("ex731", {{"omega", 2.0}, {"a", 1.0}}), get_example("autonomous", {{"c", -0.5}})});
    struct Inst {
      const ExampleEntry* e;
      Window win;
      std::vector<double> gammas;
    };
    std::vector<Inst> insts = {{&e731, {-12, 12}, {0.0, 1.2}},
                               {&e707, {-20, 19}, {-1.0, 2.0}},
                               {&two, {-12, 12}, {0.1}}};
    for (const Inst& inst : insts) {
      FitContext ctx(inst.e->system, inst.e->rate, inst.win);
      int d = inst.e->system.dim;
      for (double g : inst.gammas) {
        for (bool unif : {false, true}) {
          DichotomyClass cls = unif ? DichotomyClass::uniform : DichotomyClass::nonuniform;
          auto compare = [&](const std::optional<FitReport>& rep, const detail::PairTable& table,
                             Side side) {
            if (!rep) return;
            BruteSide b = brute_side(table, g, side, unif);
            ++n_lp;
            if (rep->feasible != b.feasible) {
              ok_lp = false;
              return;
            }
            if (rep->feasible) {
              double delta = std::abs(rep->objective - b.objective);
              worst_lp = std::max(worst_lp, delta);
              ok_lp = ok_lp && delta <= 2e-3;
            }
          };
          SplitVerdict v1 = test_split(ctx, {1}, g, cls);
          compare(v1.stable, ctx.stable_table({1}), Side::stable);
          if (d > 1) compare(v1.unstable, ctx.unstable_table({1}), Side::unstable);
          SplitVerdict v0 = test_split(ctx, {}, g, cls);
          compare(v0.unstable, ctx.unstable_table({}), Side::unstable);
        }
      }
    }
  }

  // class inclusion chain on a shared grid (gamma points chosen away from
  // the windowed boundary bands)
  bool ok_chain = true;
  {
    ExampleEntry e = get_example("ex731", {{"omega", 2.0}, {"a", 1.0}});
    FitContext ctx(e.system, e.rate, Window{-200, 200});
    for (double g : {-6.5, -6.0, -5.5, -4.5, -4.0, -3.0, -2.0, -1.0, 0.0, 0.5, 1.5, 2.0, 2.5}) {
      bool mu = resolvent_test(ctx, g, DichotomyClass::uniform).member;
      bool mn = resolvent_test(ctx, g, DichotomyClass::nonuniform).member;
      bool ms = resolvent_test(ctx, g, DichotomyClass::slow).member;
      ok_chain = ok_chain && (!mu || mn) && (!mn || ms);
    }
  }

  // resolvent openness: a verdict with margin m survives moving gamma by m/2
  bool ok_open = true;
  {
    ExampleEntry e = get_example("ex731", {{"omega", 2.0}, {"a", 1.0}});
    FitContext ctx(e.system, e.rate, Window{-200, 200});
    for (double g : {2.0, -6.5}) {
      ResolventVerdict v = resolvent_test(ctx, g, DichotomyClass::nonuniform);
      ok_open = ok_open && v.member && v.margin > 0.0;
      if (!ok_open) break;
      double h = 0.5 * v.margin;
      ok_open = ok_open && resolvent_test(ctx, g + h, DichotomyClass::nonuniform).member &&
                resolvent_test(ctx, g - h, DichotomyClass::nonuniform).member;
    }
  }

  // shift covariance: scaling the coefficients by e^c moves the spectrum by c
  bool ok_shift = true;
  {
    ExampleEntry e = get_example("ex731", {{"omega", 2.0}, {"a", 1.0}});
    auto base_log = e.system.diag_log;
    LinearSystem shifted =
        make_scalar_system("shifted", [base_log](Index n) { return base_log(n, 0) + 0.7; });
    SweepSettings st;
    st.grid_step = 0.1;
    st.window = Window{-200, 200};
    st.gamma_range = std::pair{-6.5, 2.5};
    SpectrumEstimate a = estimate_spectrum(e.system, e.rate, DichotomyClass::nonuniform, st);
    st.gamma_range = std::pair{-5.8, 3.2};
    SpectrumEstimate b = estimate_spectrum(shifted, e.rate, DichotomyClass::nonuniform, st);
    ok_shift = a.intervals.size() == 1 && b.intervals.size() == 1 &&
               near(b.intervals[0].lo - a.intervals[0].lo, 0.7, st.grid_step) &&
               near(b.intervals[0].hi - a.intervals[0].hi, 0.7, st.grid_step);
  }

  // block-diagonal composition: the spectrum is the union of the parts
  bool ok_add = true;
  {
    ExampleEntry pa = get_example("autonomous", {{"c", -4.0}});
    ExampleEntry pb = get_example("autonomous", {{"c", 2.0}});
    ExampleEntry comp = diagonal_compose({pa, pb});
    SweepSettings st;
    st.grid_step = 0.05;
    st.window = Window{-500, 500};
    st.caps.log_k_cap = 0.4;
    st.gamma_range = std::pair{-5.0, 3.0};
    SpectrumEstimate ca = estimate_spectrum(pa.system, pa.rate, DichotomyClass::nonuniform, st);
    SpectrumEstimate cb = estimate_spectrum(pb.system, pb.rate, DichotomyClass::nonuniform, st);
    SpectrumEstimate cc = estimate_spectrum(comp.system, comp.rate, DichotomyClass::nonuniform, st);
    double tol = cc.refinement_tol;
    ok_add = ca.intervals.size() == 1 && cb.intervals.size() == 1 && cc.intervals.size() == 2 &&
             near(cc.intervals[0].lo, ca.intervals[0].lo, tol) &&
             near(cc.intervals[0].hi, ca.intervals[0].hi, tol) &&
             near(cc.intervals[1].lo, cb.intervals[0].lo, tol) &&
             near(cc.intervals[1].hi, cb.intervals[0].hi, tol);
  }

  // autonomous spectrum {c} in every class, within the refinement tolerance
  bool ok_auto = true;
  {
    ExampleEntry e = get_example("autonomous", {{"c", 0.3}});
    SweepSettings st;
    st.grid_step = 0.05;
    st.window = Window{-500, 500};
    st.caps.log_k_cap = 0.4;
    st.gamma_range = std::pair{-0.7, 1.3};
    for (DichotomyClass cls :
         {DichotomyClass::uniform, DichotomyClass::nonuniform, DichotomyClass::slow}) {
      SpectrumEstimate est = estimate_spectrum(e.system, e.rate, cls, st);
      double tol = est.refinement_tol;
      ok_auto = ok_auto && est.intervals.size() == 1 && near(est.intervals[0].lo, 0.3, tol) &&
                near(est.intervals[0].hi, 0.3, tol);
    }
  }

  bool ok = ok_cocycle && ok_weight && ok_conj && ok_lp && ok_chain && ok_open && ok_shift &&
            ok_add && ok_auto;
  report("C6 property suite", ok,
         strf("cocycle %.1e%s; weighting exact %s; conjugacy %.1e%s; lp-vs-brute %d cases max "
              "delta %.1e%s; inclusion chain %s; openness %s; shift covariance %s; diagonal "
              "additivity %s; autonomous all classes %s",
              worst_cocycle, ok_cocycle ? "" : " MISS", ok_weight ? "yes" : "NO", worst_conj,
              ok_conj ? "" : " MISS", n_lp, worst_lp, ok_lp ? "" : " MISS",
              ok_chain ? "ok" : "BROKEN", ok_open ? "ok" : "BROKEN", ok_shift ? "ok" : "BROKEN",
              ok_add ? "ok" : "BROKEN", ok_auto ? "ok" : "BROKEN"));
}

// ---------------------------------------------------------------------------
// 7. Parameter transport across a weak similarity: the hand-computed cases,
//    plus the near-edge breakdown on the oscillating system with theta_S=1 at
//    gamma within 0.5 of both spectral edges (and solvable far from them).
void criterion7() {
  DichotomyParams p;
  p.cls = DichotomyClass::nonuniform;
  p.alpha = -5.0;
  p.beta = 5.0;
  p.theta = p.nu = 1.0;
  TransportReport t1 = transported_params(p, 1.0);
  bool ok_h1 = t1.feasible && t1.transported && *t1.transported->alpha == -4.0 &&
               *t1.transported->beta == 4.0 && t1.transported->theta == 3.0 &&
               t1.transported->nu == 3.0;

  p.alpha = -3.0;
  p.beta = 3.0;
  TransportReport t2 = transported_params(p, 1.0);
  bool ok_h2 = !t2.feasible && t2.margin <= 0.0;

  p.alpha = -5.0;
  p.beta = 5.0;
  p.theta = p.nu = 0.0;
  TransportReport t3 = transported_params(p, 0.0);
  bool ok_h3 = t3.feasible && t3.transported && *t3.transported->alpha == -5.0 &&
               *t3.transported->beta == 5.0 && t3.transported->theta == 0.0 &&
               t3.transported->nu == 0.0;

  ExampleEntry e = get_example("ex731", {{"omega", 2.0}, {"a", 1.0}});
  FitContext ctx(e.system, e.rate, Window{-400, 400});
  auto transport_at = [&](double g) {
    ResolventVerdict v = resolvent_test(ctx, g, DichotomyClass::nonuniform);
    if (!v.member) return TransportReport{};
    SplitVerdict sv;
    sv.feasible = true;
    sv.stable = v.stable_fit;
    sv.unstable = v.unstable_fit;
    DichotomyParams q = verdict_params(sv, DichotomyClass::nonuniform);
    q.theta = q.nu = std::max(q.theta, q.nu);  // one-sided fits leave the unused weight at zero
    return transported_params(q, 1.0);
  };
  bool fires = true;
  for (double g : {1.2, 1.45, -5.45, -5.2}) {
    TransportReport tr = transport_at(g);
    fires = fires && !tr.feasible;
  }
  bool solvable_far = transport_at(9.0).feasible && transport_at(-13.0).feasible;

  bool ok = ok_h1 && ok_h2 && ok_h3 && fires && solvable_far;
  report("C7 similarity transport of constants", ok,
         strf("hand cases %s/%s/%s; near-edge breakdown fires %s; far-from-edge transport "
              "solvable %s",
              ok_h1 ? "ok" : "MISS", ok_h2 ? "ok" : "MISS", ok_h3 ? "ok" : "MISS",
              fires ? "yes" : "NO", solvable_far ? "yes" : "NO"));
}

// ---------------------------------------------------------------------------
// Window-convergence caveat: re-run the endpoint quantities of criteria 1-3
// at windows 100/200/400 and require each endpoint error to tighten
// monotonically as the window grows.
void caveat() {
  const Window wins[] = {{-100, 100}, {-200, 200}, {-400, 400}};
  struct Series {
    std::string what;
    double err[3];
  };
  std::vector<Series> series;

  ExampleEntry e731 = get_example("ex731", {{"omega", 2.0}, {"a", 1.0}});
  SimilarityMap s = exp_decay_map(e731.rate);
  LinearSystem moved = transform(e731.system, s);
  ExampleEntry e707 = get_example("ex707");

  auto endpoint_errs = [&](const LinearSystem& sys, const GrowthRate& rate,
                           std::pair<double, double> range, double lo_ref, double hi_ref,
                           const char* tag) {
    Series s_lo{strf("%s lo", tag), {0, 0, 0}}, s_hi{strf("%s hi", tag), {0, 0, 0}};
    for (int i = 0; i < 3; ++i) {
      SweepSettings st;
      st.gamma_range = range;
      st.grid_step = 0.05;
      st.window = wins[i];
      st.refinement_tol = 0.01;
      SpectrumEstimate est = estimate_spectrum(sys, rate, DichotomyClass::nonuniform, st);
      if (est.intervals.size() != 1) {
        s_lo.err[i] = s_hi.err[i] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      s_lo.err[i] = std::abs(est.intervals[0].lo - lo_ref);
      s_hi.err[i] = std::abs(est.intervals[0].hi - hi_ref);
    }
    series.push_back(s_lo);
    series.push_back(s_hi);
  };

  endpoint_errs(e731.system, e731.rate, {-7.5, 3.5}, -5.0, 1.0, "base");
  endpoint_errs(moved, e731.rate, {-7.5, 3.5}, -4.0, 2.0, "transformed");
  endpoint_errs(e707.system, e707.rate, {-3.0, 3.0}, -1.0, 1.0, "quadratic");

  Series edge_r{"stable edge", {0, 0, 0}}, edge_l{"unstable edge", {0, 0, 0}};
  for (int i = 0; i < 3; ++i) {
    edge_r.err[i] = std::abs(
        boundary_locator(e731.system, e731.rate, Side::stable, {0.5, 2.0}, 0.01, wins[i]) - 1.0);
    edge_l.err[i] = std::abs(
        boundary_locator(e731.system, e731.rate, Side::unstable, {-6.0, -4.5}, 0.01, wins[i]) +
        5.0);
  }
  series.push_back(edge_r);
  series.push_back(edge_l);

  // Endpoints come out of bisection with bracket width refinement_tol, so
  // they are only determined to that resolution; tightening is judged with
  // that much slack. Anything coarser than the quantization still fails.
  const double slack = 0.01;
  bool ok = true;
  std::string detail;
  for (const Series& sr : series) {
    bool mono = std::isfinite(sr.err[0]) && std::isfinite(sr.err[1]) && std::isfinite(sr.err[2]) &&
                sr.err[0] >= sr.err[1] - slack && sr.err[1] >= sr.err[2] - slack;
    ok = ok && mono;
    if (!detail.empty()) detail += "; ";
    detail += strf("%s %.4f/%.4f/%.4f%s", sr.what.c_str(), sr.err[0], sr.err[1], sr.err[2],
                   mono ? "" : " NOT MONOTONE");
  }
  report("caveat window convergence (errors at W=100/200/400)", ok, detail);
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  caveat();
  int total = 8;
  std::printf("acceptance summary: %d of %d criteria passed; failed: %s\n", total - g_failed,
              total, g_failed == 0 ? "none" : g_failed_ids.c_str());
  return g_failed;
}
