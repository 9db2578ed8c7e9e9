#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "dichospec/corpus.hpp"
#include "dichospec/system.hpp"

using namespace dichospec;

namespace {

// Independent evaluator: multiplies the coefficient chain pair by pair
// through the cached operator, never touching the closed form.
double product_log_norm(const LinearSystem& sys, Index k, Index n) {
  EvolutionOperator op(sys);
  return op.transition(k, n).log_norm();
}

}  // namespace

TEST_CASE("closed forms match the step-by-step product on random pairs") {
  std::mt19937 rng(20260819);
  std::uniform_int_distribution<Index> pick(-200, 200);
  const std::vector<std::pair<std::string, std::map<std::string, double>>> cases = {
      {"ex707", {}},
      {"ex718", {}},
      {"ex708", {{"omega", 2.0}, {"a", 0.8}}},
      {"ex731", {{"omega", 2.0}, {"a", 1.0}}},
      {"ex735", {{"omega", 2.0}, {"a", 1.0}}},
      {"autonomous", {{"c", 0.7}}}};
  for (const auto& spec : cases) {
    ExampleEntry e = get_example(spec.first, spec.second);
    REQUIRE(e.log_phi);
    for (int trial = 0; trial < 100; ++trial) {
      Index k = pick(rng), n = pick(rng);
      double closed = e.log_phi(k, n);
      double product = product_log_norm(e.system, k, n);
      INFO(spec.first << " k=" << k << " n=" << n);
      CHECK(std::abs(closed - product) < 1e-9);
    }
  }
}

TEST_CASE("parameter guards quote the violated constraint") {
  CHECK_THROWS_WITH(get_example("ex708", {{"omega", 2.0}, {"a", 0.5}}),
                    Catch::Matchers::ContainsSubstring("3a > omega > 2a"));
  CHECK_THROWS_WITH(get_example("ex731", {{"omega", 4.0}, {"a", 1.0}}),
                    Catch::Matchers::ContainsSubstring("3a > omega > a"));
  CHECK_THROWS_WITH(get_example("ex731", {{"omega", 1.0}, {"a", 1.0}}),
                    Catch::Matchers::ContainsSubstring("3a > omega > a"));
  CHECK_THROWS_WITH(get_example("ex735", {{"omega", 3.5}, {"a", 1.0}}),
                    Catch::Matchers::ContainsSubstring("3a > omega > a"));
  CHECK_NOTHROW(get_example("ex731", {{"omega", 2.99}, {"a", 1.0}}));
  CHECK_NOTHROW(get_example("ex708", {{"omega", 2.0}, {"a", 0.9}}));
}

TEST_CASE("registry rejects unknown names and parameters") {
  CHECK_THROWS_AS(get_example("ex999"), ConfigError);
  CHECK_THROWS_WITH(get_example("ex999"), Catch::Matchers::ContainsSubstring("ex731"));
  CHECK_THROWS_WITH(get_example("ex707", {{"a", 1.0}}),
                    Catch::Matchers::ContainsSubstring("does not take parameter"));
  CHECK_THROWS_WITH(get_example("autonomous", {{"omega", 1.0}}),
                    Catch::Matchers::ContainsSubstring("does not take parameter"));
}

TEST_CASE("reference spectra carry the advertised shapes") {
  ExampleEntry e707 = get_example("ex707");
  CHECK(e707.references.at("uniform").whole_line);
  REQUIRE(e707.references.at("nonuniform").intervals.size() == 1);
  CHECK(e707.references.at("nonuniform").intervals[0].lo == -1.0);
  CHECK(e707.references.at("nonuniform").intervals[0].hi == 1.0);
  CHECK(e707.references.at("slow").empty_set());
  const RefInterval& upp = e707.references.at("upp").intervals.at(0);
  CHECK(upp.open_lo);
  CHECK(upp.open_hi);
  CHECK(e707.rate.label == "quadratic");

  ExampleEntry e731 = get_example("ex731", {{"omega", 2.0}, {"a", 1.0}});
  const RefInterval& ned = e731.references.at("nonuniform").intervals.at(0);
  CHECK(ned.lo == Catch::Approx(-5.0));
  CHECK(ned.hi == Catch::Approx(1.0));

  ExampleEntry e735 = get_example("ex735", {{"omega", 2.0}, {"a", 1.0}});
  const RefInterval& moved = e735.references.at("nonuniform").intervals.at(0);
  CHECK(moved.lo == Catch::Approx(-4.0));
  CHECK(moved.hi == Catch::Approx(2.0));

  ExampleEntry aut = get_example("autonomous", {{"c", 0.5}});
  for (const char* key : {"uniform", "nonuniform", "slow", "upp"}) {
    REQUIRE(aut.references.at(key).intervals.size() == 1);
    CHECK(aut.references.at(key).intervals[0].lo == 0.5);
    CHECK(aut.references.at(key).intervals[0].hi == 0.5);
  }
}

TEST_CASE("ex718 switches its coefficient at n = -1 as stated") {
  ExampleEntry e = get_example("ex718");
  CHECK(e.system.diag_log(-2, 0) == 1.0);
  CHECK(e.system.diag_log(-1, 0) == -1.0);
  CHECK(e.system.diag_log(0, 0) == -1.0);
  // The solution through n = 0 peaks at e^1 just left of the switch and
  // decays in both directions, so it is bounded on the whole line.
  double peak = kNegInf;
  for (Index n = -50; n <= 50; ++n) peak = std::max(peak, e.log_phi(n, 0));
  CHECK(peak == 1.0);
  CHECK(e.log_phi(-1, 0) == 1.0);
  CHECK(e.log_phi(-2, 0) == 0.0);
  CHECK(e.log_phi(5, 0) == -5.0);
}

TEST_CASE("diagonal composition unions references and stacks coordinates") {
  ExampleEntry two = diagonal_compose(
      {get_example("ex731", {{"omega", 2.0}, {"a", 1.0}}), get_example("autonomous", {{"c", 4.0}})});
  CHECK(two.system.dim == 2);
  CHECK(two.system.diagonal);
  const SpectrumReference& ned = two.references.at("nonuniform");
  REQUIRE(ned.intervals.size() == 2);
  CHECK(ned.intervals[0].lo == Catch::Approx(-5.0));
  CHECK(ned.intervals[0].hi == Catch::Approx(1.0));
  CHECK(ned.intervals[1].lo == Catch::Approx(4.0));
  CHECK(ned.intervals[1].hi == Catch::Approx(4.0));
  // ex731 carries only the nonuniform reference, so no other class survives.
  CHECK(two.references.count("uniform") == 0);

  ExampleEntry one = diagonal_compose({get_example("autonomous")});
  CHECK(one.system.dim == 1);
  CHECK(one.references.at("nonuniform").intervals.size() == 1);

  ExampleEntry dup =
      diagonal_compose({get_example("autonomous"), get_example("autonomous")});
  CHECK(dup.system.dim == 2);
  REQUIRE(dup.references.at("slow").intervals.size() == 1);
  CHECK(dup.references.at("slow").intervals[0].lo == 0.0);
  CHECK(dup.references.at("slow").intervals[0].hi == 0.0);

  CHECK_THROWS_WITH(diagonal_compose({get_example("ex707"), get_example("autonomous")}),
                    Catch::Matchers::ContainsSubstring("shared rate"));
  CHECK_THROWS_WITH(diagonal_compose({dup, get_example("autonomous")}),
                    Catch::Matchers::ContainsSubstring("scalar entries only"));
  CHECK_THROWS_AS(diagonal_compose({}), ConfigError);
}

TEST_CASE("composed coordinates reproduce their block closed forms") {
  ExampleEntry a = get_example("ex731", {{"omega", 2.0}, {"a", 1.0}});
  ExampleEntry b = get_example("autonomous", {{"c", -0.3}});
  ExampleEntry two = diagonal_compose({a, b});
  EvolutionOperator op(two.system);
  std::mt19937 rng(7);
  std::uniform_int_distribution<Index> pick(-60, 60);
  for (int trial = 0; trial < 40; ++trial) {
    Index k = pick(rng), n = pick(rng);
    ScaledMatrix t = op.transition(k, n);
    double la = a.log_phi(k, n), lb = b.log_phi(k, n);
    CHECK(std::abs(std::log(t.mat(0, 0)) + t.log_scale - la) < 1e-9);
    CHECK(std::abs(std::log(t.mat(1, 1)) + t.log_scale - lb) < 1e-9);
    CHECK(t.mat(0, 1) == 0.0);
    CHECK(t.mat(1, 0) == 0.0);
  }
}
