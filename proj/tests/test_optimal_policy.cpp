#include <doctest.h>

#include <cmath>
#include <vector>

#include "dualdiv/errors.hpp"
#include "dualdiv/optimal_policy.hpp"
#include "dualdiv/threshold_value.hpp"
#include "fixtures.hpp"

using namespace dualdiv;

namespace {

constexpr double kQ = fixtures::kQ;
constexpr double kAlpha = fixtures::kAlpha;

std::vector<double> hjb_grid(double b_star, int n) {
  std::vector<double> xs;
  const double top = b_star + 5.0;
  for (int i = 1; i <= n; ++i) {
    const double x = top * (i - 0.5) / n;
    xs.push_back(std::abs(x - b_star) < 1e-9 ? x + 1e-3 : x);
  }
  return xs;
}

}  // namespace

TEST_CASE("optimal threshold for M1") {
  const auto e = build_evaluator(fixtures::m1(), kQ);
  const auto p = optimal_threshold(e, kAlpha);
  const double f = (3.0 + std::sqrt(41.0)) / 16.0;
  REQUIRE_FALSE(p.degenerate);
  CHECK(p.phi1_q == doctest::Approx(f).epsilon(1e-12));
  CHECK(p.b_star > 0.0);
  CHECK(std::abs(p.value_at_bstar - (kAlpha / kQ - 1.0 / f)) <= 1e-8);
  CHECK(p.value_at_bstar == doctest::Approx(1.298437).epsilon(1e-6));
  CHECK(p.g_lo < 0.0);
  CHECK(p.g_hi > 0.0);
  CHECK(p.prescan_sign_changes == 1);
  CHECK(p.warnings.empty());

  // Left derivative of V(·, b*) at b* through the general threshold formulas.
  const ThresholdValue tv(e, kAlpha, p.b_star);
  CHECK(tv.derivative(p.b_star) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(tv.derivative_left_of_b() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("analytic argmax over thresholds matches b*") {
  for (const auto& m : {fixtures::m1(), fixtures::m2()}) {
    const auto e = build_evaluator(m, kQ);
    const auto p = optimal_threshold(e, kAlpha);
    const double step = 0.05;
    for (double x : {0.5, 1.0, 2.0}) {
      double best_b = 0.0, best_v = -1.0;
      for (double b = 0.0; b <= 5.0 + 1e-12; b += step) {
        const double v = value(e, kAlpha, b, x);
        if (v > best_v) {
          best_v = v;
          best_b = b;
        }
      }
      CAPTURE(x);
      CHECK(std::abs(best_b - p.b_star) <= step);
      CHECK(optimal_value(e, kAlpha, x) >= best_v - 1e-12);
    }
  }
}

TEST_CASE("degenerate rule") {
  const auto e = build_evaluator(fixtures::m1(), kQ);
  // Φ₁ for M1 is the positive root of (c₀+α)θ² + (c₀+α-q-1)θ - q.
  auto f1 = [](double a) { return fixtures::quad_root(0.5 + a, 0.5 + a - kQ - 1.0, -kQ); };
  for (int i = 0; i < 20; ++i) {
    const double a = 0.01 + 0.024 * i;
    const auto p = optimal_threshold(e, a);
    CAPTURE(a);
    CHECK(p.degenerate == (f1(a) * a / kQ <= 1.0));
    CHECK((p.b_star > 0.0) == (f1(a) * a / kQ > 1.0));
  }
  const auto low = optimal_threshold(e, 0.03);
  CHECK(low.degenerate);
  CHECK(low.b_star == 0.0);
  const OptimalValue v(e, 0.03, low);
  for (double x = 0.1; x < 10.0; x += 0.3) {
    CHECK(v.derivative(x) < 1.0);
    CHECK(v.value(x) == doctest::Approx(value(e, 0.03, 0.0, x)).epsilon(1e-12));
  }
  const auto r = hjb_verify(e, 0.03, low, {0.2, 1.0, 3.0, 7.0});
  CHECK(r.max_abs_residual <= 1e-5 * 0.03);
  CHECK(r.rate_matches_threshold);
}

TEST_CASE("optimal value agrees with the threshold value at b*") {
  for (const auto& m : {fixtures::m1(), fixtures::m2()}) {
    const auto e = build_evaluator(m, kQ);
    const OptimalValue v(e, kAlpha);
    const ThresholdValue tv(e, kAlpha, v.policy().b_star);
    const double b = v.policy().b_star;
    CHECK(v.value(b) == doctest::Approx(kAlpha / kQ - 1.0 / v.policy().phi1_q).epsilon(1e-12));
    CHECK(std::abs(v.value(b + 60.0) - kAlpha / kQ) <= 1e-9);
    for (double x = 0.02; x < b + 6.0; x += 0.07) {
      CAPTURE(x);
      CHECK(std::abs(v.value(x) - tv.value(x)) <= 1e-9);
      CHECK(std::abs(v.derivative(x) - tv.derivative(x)) <= 1e-8);
    }
  }
}

TEST_CASE("optimal value derivative") {
  for (const auto& m : {fixtures::m1(), fixtures::m2()}) {
    const auto e = build_evaluator(m, kQ);
    const OptimalValue v(e, kAlpha);
    const double b = v.policy().b_star;
    const double f = v.policy().phi1_q;
    CHECK(v.derivative(b) == 1.0);
    CHECK(v.derivative(b + std::log(2.0) / f) == doctest::Approx(0.5).epsilon(1e-14));
    const double h = 1e-6;
    const double x = 0.5 * b;
    CHECK(std::abs(v.derivative(x) - (v.value(x + h) - v.value(x - h)) / (2 * h)) <= 1e-5);
    for (int i = 1; i <= 50; ++i) {
      CHECK(v.derivative(b * i / 51.0) > 1.0);
      CHECK(v.derivative(b + 0.1 * i) < 1.0);
    }
    const double eps = 1e-7;
    CHECK(std::abs(v.derivative(b - eps) - v.derivative(b + eps)) < 1e-5);
  }
}

TEST_CASE("concavity and the second-derivative jump") {
  {
    const auto e = build_evaluator(fixtures::m1(), kQ);
    const auto r = concavity_report(e, kAlpha);
    CHECK(r.concave);
    CHECK(r.x.size() == 50);
    const double f = (3.0 + std::sqrt(41.0)) / 16.0;
    CHECK(r.gap == doctest::Approx(kAlpha * f / 0.5).epsilon(1e-6));
    CHECK(r.gap == doctest::Approx(r.gap_expected).epsilon(1e-12));
    const ThresholdValue tv(e, kAlpha, r.b_star);
    CHECK(tv.second_derivative_left_of_b() == doctest::Approx(r.v2_left).epsilon(1e-7));
  }
  {
    const auto e = build_evaluator(fixtures::m2(), kQ);
    const auto r = concavity_report(e, kAlpha);
    CHECK(r.concave);
    CHECK(std::abs(r.gap) <= 1e-10);
    const OptimalValue v(e, kAlpha);
    const double h = 1e-4;
    for (double x : r.x) {
      const double fd = (v.value(x + h) - 2 * v.value(x) + v.value(x - h)) / (h * h);
      CHECK(std::abs(v.second_derivative(x) - fd) <= 1e-4);
    }
  }
}

TEST_CASE("HJB residual for the optimal policy") {
  for (const auto& m : {fixtures::m1(), fixtures::m2(), truncate_measure(fixtures::tempered(), 64)}) {
    const auto e = build_evaluator(m, kQ);
    const auto p = optimal_threshold(e, kAlpha);
    REQUIRE_FALSE(p.degenerate);
    const auto r = hjb_verify(e, kAlpha, p, hjb_grid(p.b_star, 100));
    CHECK(r.max_abs_residual <= 1e-5 * kAlpha);
    CHECK(r.rate_matches_threshold);
  }
}

TEST_CASE("HJB verification rejects grid points at 0 and b*") {
  const auto e = build_evaluator(fixtures::m1(), kQ);
  const auto p = optimal_threshold(e, kAlpha);
  CHECK_THROWS_AS(hjb_verify(e, kAlpha, p, {0.0, 1.0}), DomainError);
  CHECK_THROWS_AS(hjb_verify(e, kAlpha, p, {p.b_star}), DomainError);
}
