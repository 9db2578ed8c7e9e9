#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dichospec/growth.hpp"

using namespace dichospec;

TEST_CASE("built-in rates match their closed forms exactly") {
  auto e = make_rate(RateKind::exponential);
  auto p = make_rate(RateKind::polynomial);
  auto q = make_rate(RateKind::quadratic);
  auto c = make_rate(RateKind::cubic);

  for (Index n : {-1000LL, -37LL, -2LL, -1LL, 0LL, 1LL, 2LL, 37LL, 1000LL}) {
    CAPTURE(n);
    CHECK(e.mu_log(n) == static_cast<double>(n));
    CHECK(q.mu_log(n) == sign_of(n) * double(n) * double(n));
    CHECK(c.mu_log(n) == double(n) * double(n) * double(n));
    if (n == 0) {
      CHECK(p.mu_log(n) == 0.0);
    } else {
      CHECK(p.mu_log(n) == sign_of(n) * std::log(std::abs(double(n))));
    }
  }
  // mu(0) = 1 and the reciprocal structure of the polynomial rate.
  CHECK(p.mu_log(-5) == -p.mu_log(5));
  CHECK(std::exp(p.mu_log(3)) == Catch::Approx(3.0));
}

TEST_CASE("built-in rates satisfy the rate invariants on [-1000, 1000]") {
  for (auto kind : {RateKind::exponential, RateKind::polynomial, RateKind::quadratic,
                    RateKind::cubic}) {
    auto r = make_rate(kind);
    CAPTURE(r.label);
    CHECK_NOTHROW(validate_rate(r, -1000, 1000));
  }
}

TEST_CASE("custom rates are checked and rejected with the offending index") {
  // Dips below its left neighbour exactly at n = 4.
  auto bad = [](Index n) { return n == 4 ? 2.0 : static_cast<double>(n); };
  try {
    make_custom_rate("dip", bad, 10);
    FAIL("expected ConfigError");
  } catch (const ConfigError& err) {
    // First non-monotone step scanning upward is 3 -> 2 at n = 4.
    CHECK(std::string(err.what()).find("n = 4") != std::string::npos);
  }

  auto shifted = [](Index n) { return static_cast<double>(n) + 1.0; };
  CHECK_THROWS_AS(make_custom_rate("shifted", shifted, 5), ConfigError);

  auto ok = [](Index n) { return n >= 0 ? 2.0 * n : 0.5 * n; };
  CHECK_NOTHROW(make_custom_rate("kinked", ok, 100));
}

TEST_CASE("rate_by_name resolves aliases and rejects unknowns") {
  CHECK(rate_by_name("exp").label == "exponential");
  CHECK(rate_by_name("quadratic").label == "quadratic");
  CHECK_THROWS_AS(rate_by_name("geometric"), ConfigError);
}

TEST_CASE("log_ratio and nonuniform_weight agree with their definitions") {
  auto q = make_rate(RateKind::quadratic);
  CHECK(log_ratio(q, 7, 3) == 49.0 - 9.0);
  CHECK(log_ratio(q, -2, 5) == -4.0 - 25.0);
  CHECK(nonuniform_weight(q, -6) == 36.0);
  CHECK(nonuniform_weight(q, 6) == 36.0);
  CHECK(nonuniform_weight(q, 0) == 0.0);

  auto e = make_rate(RateKind::exponential);
  for (Index n : {-9LL, 0LL, 9LL}) CHECK(nonuniform_weight(e, n) == std::abs(double(n)));
}

TEST_CASE("csv rates do exact lookups and validate the table") {
  auto path = std::string("rate_tmp.csv");
  {
    std::ofstream out(path);
    out << "# test table\n";
    out << "-2,-1.5\n-1,-0.5\n0,0\n1,0.25\n2,1.5\n";
  }
  auto r = rate_from_csv(path);
  CHECK(r.mu_log(0) == 0.0);
  CHECK(r.mu_log(1) == 0.25);
  CHECK(r.mu_log(-2) == -1.5);
  CHECK_THROWS_AS(r.mu_log(3), ConfigError);   // outside the table, no interpolation
  CHECK_THROWS_AS(r.mu_log(-40), ConfigError);

  {
    std::ofstream out(path);
    out << "0,0\n1,-1\n";  // decreasing
  }
  CHECK_THROWS_AS(rate_from_csv(path), ConfigError);

  {
    std::ofstream out(path);
    out << "1,1\n2,2\n";  // no anchor at 0
  }
  CHECK_THROWS_AS(rate_from_csv(path), ConfigError);

  {
    std::ofstream out(path);
    out << "0,0\nx,1\n";  // unparsable
  }
  CHECK_THROWS_AS(rate_from_csv(path), ConfigError);

  std::remove(path.c_str());
}
