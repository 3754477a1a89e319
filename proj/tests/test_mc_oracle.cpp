#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "dualdiv/errors.hpp"
#include "dualdiv/mc_oracle.hpp"
#include "dualdiv/optimal_policy.hpp"
#include "dualdiv/rng.hpp"
#include "dualdiv/scale_fn.hpp"
#include "dualdiv/threshold_value.hpp"
#include "fixtures.hpp"

using namespace dualdiv;

namespace {

constexpr double kQ = fixtures::kQ;
constexpr double kAlpha = fixtures::kAlpha;

SimConfig paths(std::uint64_t n) {
  SimConfig cfg;
  cfg.n_paths = n;
  return cfg;
}

double z_score(const Estimate& e, double target) { return (e.mean - target) / e.std_error; }

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using B = std::array<std::uint32_t, 4>;
  CHECK(PhiloxStream::block({0, 0, 0, 0}, {0, 0}) ==
        B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(PhiloxStream::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                            {0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(PhiloxStream::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                            {0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("Philox streams are reproducible and distinct") {
  PhiloxStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  std::set<std::uint32_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto va = a();
    CHECK(va == b());
    seen.insert(va);
    seen.insert(c());
    seen.insert(d());
  }
  CHECK(seen.size() > 2990);
  PhiloxStream u(1, 0);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double x = u.uniform();
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
    sum += x;
  }
  CHECK(std::abs(sum / 100000 - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / 100000));
}

TEST_CASE("no-jump deterministic paths match the closed forms") {
  const double c0 = 0.5;
  const auto m = ModelSpec::from_c0(c0, 0.0, NoJumps{});
  PhiloxStream rng(1, 0);
  SUBCASE("start below the threshold") {
    const auto r = simulate_path(m, PolicyParams{kQ, kAlpha, 2.0}, 1.5, rng);
    CHECK(r.discounted_dividends == 0.0);
    CHECK(r.ruined);
    CHECK(r.ruin_time == doctest::Approx(1.5 / c0).epsilon(1e-15));
  }
  SUBCASE("start above the threshold") {
    const double x = 3.0, b = 1.0;
    const auto r = simulate_path(m, PolicyParams{kQ, kAlpha, b}, x, rng);
    const double t1 = (x - b) / (c0 + kAlpha);
    CHECK(r.discounted_dividends ==
          doctest::Approx(kAlpha * -std::expm1(-kQ * t1) / kQ).epsilon(1e-14));
    CHECK(r.ruin_time == doctest::Approx(t1 + b / c0).epsilon(1e-14));
    CHECK(r.ruined);
  }
}

TEST_CASE("degenerate policies and starting points") {
  const auto m = fixtures::m1();
  SUBCASE("b = infinity pays nothing") {
    const auto e = estimate_value(
        m, PolicyParams{kQ, kAlpha, std::numeric_limits<double>::infinity()}, 2.0, paths(2000));
    CHECK(e.mean == 0.0);
    CHECK(e.std_error == 0.0);
  }
  SUBCASE("x = 0 is immediate ruin") {
    for (const auto& mm : {fixtures::m1(), fixtures::m2()}) {
      const auto e = estimate_value(mm, PolicyParams{kQ, kAlpha, 1.0}, 0.0, paths(500));
      CHECK(e.mean == 0.0);
      CHECK(e.std_error == 0.0);
      CHECK(e.censored_paths == 0);
    }
  }
}

TEST_CASE("estimates are independent of the thread schedule") {
  for (const auto& m : {fixtures::m1(), fixtures::m2()}) {
    auto cfg = paths(9000);
    const auto par = estimate_value(m, PolicyParams{kQ, kAlpha, 1.0}, 1.5, cfg);
    const auto ser = estimate_value_serial(m, PolicyParams{kQ, kAlpha, 1.0}, 1.5, cfg);
    CHECK(par.mean == ser.mean);
    CHECK(par.std_error == ser.std_error);
    CHECK(par.censored_paths == ser.censored_paths);
    const auto again = estimate_value(m, PolicyParams{kQ, kAlpha, 1.0}, 1.5, cfg);
    CHECK(again.mean == par.mean);
  }
}

TEST_CASE("estimate bookkeeping") {
  auto cfg = paths(20000);
  cfg.seed = 99;
  const auto e = estimate_value(fixtures::m1(), PolicyParams{kQ, kAlpha, 1.0}, 2.0, cfg);
  CHECK(e.n_paths == 20000);
  CHECK(e.seed == 99);
  CHECK(e.ci_high - e.mean == doctest::Approx(2.576 * e.std_error).epsilon(1e-12));
  CHECK(e.mean - e.ci_low == doctest::Approx(2.576 * e.std_error).epsilon(1e-12));
  CHECK(e.mean <= kAlpha / kQ);
  CHECK(e.censoring_bound == doctest::Approx(1e-6 * kAlpha / kQ).epsilon(1e-9));
}

TEST_CASE("doubling the path count shrinks the standard error by 1/sqrt(2)") {
  const auto m = fixtures::m1();
  const auto e1 = estimate_value(m, PolicyParams{kQ, kAlpha, 1.0}, 2.0, paths(100000));
  const auto e2 = estimate_value(m, PolicyParams{kQ, kAlpha, 1.0}, 2.0, paths(200000));
  CHECK(e2.std_error / e1.std_error == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.05));
}

TEST_CASE("threshold value agrees with simulation") {
  for (const auto& m : {fixtures::m1(), fixtures::m2()}) {
    const auto ev = build_evaluator(m, kQ);
    const std::uint64_t n = m.sigma() == 0.0 ? 100000 : 20000;
    for (auto [x, b] : {std::pair{2.0, 1.0}, {0.5, 2.0}}) {
      const auto e = estimate_value(m, PolicyParams{kQ, kAlpha, b}, x, paths(n));
      CAPTURE(m.sigma());
      CAPTURE(x);
      CAPTURE(b);
      CHECK(std::abs(z_score(e, value(ev, kAlpha, b, x))) < 3.5);
    }
  }
}

TEST_CASE("first passage below a threshold") {
  for (const auto& m : {fixtures::m1(), fixtures::m2()}) {
    const double f1 = phi1(m, kQ, kAlpha);
    for (double d : {0.5, 2.0}) {
      const auto e = estimate_first_passage(m, kQ, kAlpha, 1.0, 1.0 + d, paths(20000));
      CAPTURE(m.sigma());
      CAPTURE(d);
      CHECK(std::abs(z_score(e, std::exp(-f1 * d))) < 3.5);
    }
  }
  CHECK_THROWS_AS(estimate_first_passage(fixtures::m1(), kQ, kAlpha, 1.0, 1.0, paths(10)),
                  DomainError);
}

TEST_CASE("jump samplers reproduce the Laplace exponent") {
  // With no dividends, E_x[e^{-qT}] for the passage from x down to 0 is
  // e^{-Φ(q)x}, and Φ(q) is computed from Ψ alone.
  const std::vector<ModelSpec> models = {
      ModelSpec::from_c0(0.8, 0.0, HyperExponentialJumps{1.5, {0.3, 0.7}, {0.5, 3.0}}),
      ModelSpec::from_c0(0.8, 0.0, GammaJumps{1.0, 2.5, 0.3}),
      ModelSpec::from_c0(0.8, 0.0, TabulatedJumps{1.2, {0.0, 0.5, 1.0, 2.0}, {0.2, 1.0, 0.6, 0.0}}),
      ModelSpec::from_c0(0.8, 0.3, GammaJumps{1.0, 0.5, 1.0}),
      truncate_measure(fixtures::tempered(), 16),
  };
  for (const auto& m : models) {
    const double f = phi(m, kQ);
    for (double x : {0.4, 1.5}) {
      const auto e = estimate_first_passage(m, kQ, 0.0, 0.0, x, paths(20000));
      CAPTURE(m.describe());
      CAPTURE(x);
      CHECK(std::abs(z_score(e, std::exp(-f * x))) < 3.5);
    }
  }
}

TEST_CASE("infinite activity needs truncation") {
  const auto m = fixtures::tempered();
  CHECK_THROWS_AS(estimate_value(m, PolicyParams{kQ, kAlpha, 1.0}, 1.0, paths(10)),
                  UnsupportedModelError);
  auto cfg = paths(2000);
  cfg.truncation = 16;
  const auto via_cfg = estimate_value(m, PolicyParams{kQ, kAlpha, 1.0}, 1.0, cfg);
  const auto direct =
      estimate_value(truncate_measure(m, 16), PolicyParams{kQ, kAlpha, 1.0}, 1.0, paths(2000));
  CHECK(via_cfg.mean == direct.mean);
}

TEST_CASE("threshold scan uses common random numbers") {
  const auto m = fixtures::m1();
  const std::vector<double> grid = {0.0, 0.5, 1.0, 2.0};
  const auto s = mc_threshold_scan(m, kQ, kAlpha, 1.0, grid, paths(5000));
  REQUIRE(s.estimates.size() == grid.size());
  const auto at0 = estimate_value(m, PolicyParams{kQ, kAlpha, 0.0}, 1.0, paths(5000));
  CHECK(s.estimates[0].mean == at0.mean);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(s.estimates[i].mean <= kAlpha / kQ + 3.0 * s.estimates[i].std_error);
    CHECK(s.estimates[s.argmax].mean >= s.estimates[i].mean);
  }
  CHECK_THROWS_AS(mc_threshold_scan(m, kQ, kAlpha, 1.0, {}, paths(10)), DomainError);
}

TEST_CASE("halving dt stays within the noise") {
  const auto m = fixtures::m2();
  auto cfg = paths(20000);
  const auto coarse = estimate_value(m, PolicyParams{kQ, kAlpha, 1.0}, 1.0, cfg);
  cfg.dt *= 0.5;
  const auto fine = estimate_value(m, PolicyParams{kQ, kAlpha, 1.0}, 1.0, cfg);
  CHECK(std::abs(coarse.mean - fine.mean) < 2.0 * coarse.std_error);
}

TEST_CASE("pure diffusion first passage") {
  const auto m = ModelSpec::from_c0(0.3, 0.5, NoJumps{});
  const double f = phi1(m, kQ, kAlpha);
  const auto e = estimate_first_passage(m, kQ, kAlpha, 0.5, 1.5, paths(20000));
  CHECK(std::abs(z_score(e, std::exp(-f))) < 3.5);
}

TEST_CASE("a graded dividend strategy does not beat the optimum") {
  const auto m = fixtures::m1();
  const auto ev = build_evaluator(m, kQ);
  const double b = optimal_threshold(ev, kAlpha).b_star;
  const RateBands graded{{b + 0.5, b + 1.5}, {0.0, 0.5 * kAlpha, kAlpha}};
  for (double x : {0.5, 2.0, 4.0}) {
    const auto e = estimate_band_value(m, kQ, graded, x, paths(40000));
    CAPTURE(x);
    CHECK(e.mean <= optimal_value(ev, kAlpha, x) + 3.0 * e.std_error);
  }
}

TEST_CASE("simulator input validation") {
  const auto m = fixtures::m2();
  SimConfig cfg;
  cfg.dt = 0.0;
  CHECK_THROWS_AS(estimate_value(m, PolicyParams{kQ, kAlpha, 1.0}, 1.0, cfg), DomainError);
  cfg = paths(0);
  CHECK_THROWS_AS(estimate_value(m, PolicyParams{kQ, kAlpha, 1.0}, 1.0, cfg), DomainError);
  CHECK_THROWS_AS(estimate_value(m, PolicyParams{kQ, kAlpha, 1.0}, -1.0, paths(10)),
                  DomainError);
  CHECK_THROWS_AS(estimate_value(m, PolicyParams{kQ, kAlpha, std::nullopt}, 1.0, paths(10)),
                  DomainError);
  CHECK_THROWS_AS(estimate_band_value(m, kQ, RateBands{{2.0, 1.0}, {0.0, 0.1, 0.2}}, 1.0,
                                      paths(10)),
                  DomainError);
  CHECK_THROWS_AS(estimate_band_value(m, kQ, RateBands{{1.0}, {0.0}}, 1.0, paths(10)),
                  DomainError);
  cfg = paths(10);
  cfg.tail_tolerance = 10.0;
  CHECK_THROWS_AS(estimate_value(m, PolicyParams{kQ, kAlpha, 1.0}, 1.0, cfg), DomainError);
}
