#include <doctest.h>

#include <cmath>
#include <functional>

#include "dualdiv/errors.hpp"
#include "dualdiv/quadrature.hpp"
#include "dualdiv/renewal.hpp"
#include "dualdiv/scale_fn.hpp"
#include "fixtures.hpp"

using namespace dualdiv;

namespace {

double bisect(const std::function<double(double)>& f, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((f(lo) < 0) == (f(mid) < 0) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// W of M1 from the quadratic poles of 2(1+θ)/(θ² - 1.2θ - 0.2).
double m1_w(double x) {
  const double r = std::sqrt(1.44 + 0.8);
  const double p = 0.5 * (1.2 + r);
  const double m = 0.5 * (1.2 - r);
  return 2.0 * (1.0 + p) / (p - m) * std::exp(p * x) + 2.0 * (1.0 + m) / (m - p) * std::exp(m * x);
}

}  // namespace

TEST_CASE("phi and phi1 against quadratic roots") {
  const auto m1 = fixtures::m1();
  CHECK(phi(m1, 0.0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(phi(m1, 0.1) == doctest::Approx(fixtures::quad_root(0.5, -0.6, -0.1)).epsilon(1e-13));
  CHECK(phi1(m1, 0.1, 0.3) == doctest::Approx((3.0 + std::sqrt(41.0)) / 16.0).epsilon(1e-13));
  CHECK(phi1(m1, 0.1, 0.0) == phi(m1, 0.1));

  const double c = 0.7;
  const double s = 0.3;
  const auto bm = ModelSpec::from_c0(c, s, NoJumps{});
  CHECK(phi(bm, 0.2) == doctest::Approx((-c + std::sqrt(c * c + 2 * s * s * 0.2)) / (s * s)).epsilon(1e-12));

  // Shift identity: phi1 is phi of the model with c replaced by c + α.
  const auto shifted = ModelSpec::from_c(fixtures::m2().c() + 0.3, 0.4, ExponentialJumps{1.0, 1.0});
  CHECK(phi1(fixtures::m2(), 0.1, 0.3) == doctest::Approx(phi(shifted, 0.1)).epsilon(1e-13));

  const double big = 1e4;
  CHECK(std::abs(big * phi1(m1, 0.1, big) - 0.1) <= 0.01 * 0.1);

  const auto ts = fixtures::tempered();
  const double root = bisect([](double t) { return fixtures::tempered_psi(t) - 0.1; }, 0.3, 10.0);
  CHECK(phi(ts, 0.1) == doctest::Approx(root).epsilon(1e-9));
  // Ψ'(0+) < 0 here, so the search starts from the minimiser of Ψ + αθ.
  const double root1 =
      bisect([](double t) { return fixtures::tempered_psi(t) + 0.3 * t - 0.1; }, 0.1, 10.0);
  CHECK(phi1(ts, 0.1, 0.3) == doctest::Approx(root1).epsilon(1e-9));
}

TEST_CASE("partial fractions for M1") {
  const auto e = build_evaluator(fixtures::m1(), 0.1);
  REQUIRE(e.method() == ScaleMethod::PartialFractions);
  REQUIRE(e.terms().size() == 2);
  const double r = std::sqrt(2.24);
  const double p = 0.5 * (1.2 + r);
  const double m = 0.5 * (1.2 - r);
  CHECK(e.terms()[0].rate.real() == doctest::Approx(p).epsilon(1e-14));
  CHECK(e.terms()[1].rate.real() == doctest::Approx(m).epsilon(1e-13));
  CHECK(e.terms()[0].amplitude.real() == doctest::Approx(2 * (1 + p) / (p - m)).epsilon(1e-13));
  CHECK(e.terms()[0].amplitude.real() == doctest::Approx(3.13809).epsilon(1e-5));
  CHECK(e.w_zero() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(e.phi_q() == doctest::Approx(p).epsilon(1e-14));
  for (double x : {0.0, 0.5, 1.0, 3.0, 10.0}) CHECK(e.w(x) == doctest::Approx(m1_w(x)).epsilon(1e-13));
  CHECK(e.w(1.0) == doctest::Approx(11.10).epsilon(1e-3));

  CHECK(e.w(-1.0) == 0.0);
  CHECK(e.z(-1.0) == 1.0);
  CHECK(e.zbar(-1.0) == -1.0);
  CHECK(e.certificate() < 1e-12);
}

TEST_CASE("partial fractions for M2") {
  const auto e = build_evaluator(fixtures::m2(), 0.1);
  REQUIRE(e.terms().size() == 3);
  auto cubic = [](double t) { return ((0.08 * t + 0.58) * t - 0.6) * t - 0.1; };
  auto dcubic = [](double t) { return (0.24 * t + 1.16) * t - 0.6; };
  const double poles[3] = {bisect(cubic, 1.0, 1.1), bisect(cubic, -0.2, -0.1), bisect(cubic, -9.0, -7.5)};
  for (int i = 0; i < 3; ++i) {
    CHECK(e.terms()[i].rate.real() == doctest::Approx(poles[i]).epsilon(1e-12));
    CHECK(e.terms()[i].amplitude.real() ==
          doctest::Approx((1.0 + poles[i]) / dcubic(poles[i])).epsilon(1e-11));
  }
  CHECK(poles[0] == doctest::Approx(1.047661).epsilon(1e-6));
  CHECK(poles[2] == doctest::Approx(-8.151287).epsilon(1e-6));
  CHECK(std::abs(e.w_zero()) < 1e-12);
  CHECK(e.w_prime(0.0) == doctest::Approx(12.5).epsilon(1e-12));
}

TEST_CASE("Z and Z-bar against quadrature") {
  for (const auto& m : {fixtures::m1(), fixtures::m2()}) {
    const auto e = build_evaluator(m, 0.1);
    for (double x : {0.01, 0.7, 2.0, 6.0}) {
      const double iw = quad::integrate([&](double y) { return e.w(y); }, 0.0, x);
      CHECK(std::abs(e.z(x) - 1.0 - 0.1 * iw) <= 1e-10 * e.z(x));
      const double iz = quad::integrate([&](double y) { return e.z(y); }, 0.0, x);
      CHECK(e.zbar(x) == doctest::Approx(iz).epsilon(1e-11));
      const auto t = e.triple(x);
      CHECK(t.w == e.w(x));
    }
  }
}

TEST_CASE("monotone and asymptotic behaviour") {
  for (const auto& m : {fixtures::m1(), fixtures::m2()}) {
    const auto e = build_evaluator(m, 0.1);
    double pw = -1.0;
    double pz = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const double x = 10.0 * i / 1000.0;
      CHECK(e.w(x) >= pw);
      CHECK(e.z(x) >= pz);
      pw = e.w(x);
      pz = e.z(x);
    }
    const double f = e.phi_q();
    const double x = 30.0 / f;
    const double ratio = e.w(x) * laplace_exponent_derivative(m, f) * std::exp(-f * x);
    CHECK(std::abs(ratio - 1.0) < 1e-3);
  }
}

TEST_CASE("q = 0: W minus its growing mode tends to 1/Psi'(0+)") {
  // Under this sign convention W^(0) grows like e^{Φ(0)x}; for M1 W^(0) = 4eˣ - 2.
  const auto m = fixtures::m1();
  const auto e = build_evaluator(m, 0.0);
  CHECK(e.phi_q() == doctest::Approx(1.0));
  CHECK(e.w(1.5) == doctest::Approx(4.0 * std::exp(1.5) - 2.0).epsilon(1e-13));
  const double x = 30.0;
  const double rest = e.w(x) - std::exp(x) / laplace_exponent_derivative(m, 1.0);
  CHECK(rest == doctest::Approx(1.0 / laplace_exponent_derivative(m, 0.0)).epsilon(1e-6));
  CHECK(e.z(3.0) == 1.0);
  CHECK(e.zbar(3.0) == 3.0);
}

TEST_CASE("exp-weighted integrals") {
  const auto e = build_evaluator(fixtures::m1(), 0.1);
  const double f1 = phi1(fixtures::m1(), 0.1, 0.3);
  auto [w0, z0] = e.exp_weighted_integrals(f1, 0.0);
  CHECK(w0 == 0.0);
  CHECK(z0 == 0.0);
  double expect = 0.0;
  for (const auto& t : e.terms()) {
    const double r = t.rate.real() - f1;
    expect += t.amplitude.real() * std::expm1(r) / r;
  }
  auto [iw, iz] = e.exp_weighted_integrals(f1, 1.0);
  CHECK(iw == doctest::Approx(expect).epsilon(1e-13));
  const double qz = quad::integrate([&](double y) { return e.z(y) * std::exp(-f1 * y); }, 0.0, 1.0);
  CHECK(iz == doctest::Approx(qz).epsilon(1e-12));
  double pw = 0.0;
  double pz = 0.0;
  for (double u = 0.1; u < 8.0; u += 0.3) {
    auto [a, b] = e.exp_weighted_integrals(f1, u);
    CHECK(a > pw);
    CHECK(b > pz);
    pw = a;
    pz = b;
  }
}

TEST_CASE("renewal solver reproduces partial fractions") {
  ScaleOptions opts;
  opts.force_numerical = true;
  opts.x_max = 20.0;
  for (const auto& m : {fixtures::m1(), fixtures::m2()}) {
    const auto pf = build_evaluator(m, 0.1);
    const auto rn = build_evaluator(m, 0.1, opts);
    REQUIRE(rn.method() == ScaleMethod::RenewalEquation);
    CHECK(rn.certificate() < 1e-7);
    for (double x : {0.0, 0.013, 0.5, 1.0, 2.77, 9.0, 19.9}) {
      CHECK(std::abs(rn.w(x) - pf.w(x)) <= 1e-7 * std::max(1.0, pf.w(x)));
      CHECK(rn.z(x) == doctest::Approx(pf.z(x)).epsilon(1e-8));
      CHECK(rn.zbar(x) == doctest::Approx(pf.zbar(x)).epsilon(1e-8));
    }
    for (double x : {0.3, 2.0, 7.0}) {
      CHECK(rn.w_prime(x) == doctest::Approx(pf.w_prime(x)).epsilon(1e-6));
    }
    const double f1 = phi1(m, 0.1, 0.3);
    auto [a, b] = pf.exp_weighted_integrals(f1, 3.3);
    auto [c, d] = rn.exp_weighted_integrals(f1, 3.3);
    CHECK(c == doctest::Approx(a).epsilon(1e-8));
    CHECK(d == doctest::Approx(b).epsilon(1e-8));
    CHECK_THROWS_AS(rn.w(25.0), NumericalError);
  }
}

TEST_CASE("serial and parallel renewal kernels agree") {
  const std::size_t cells = 6000;
  std::vector<double> rise(cells);
  std::vector<double> fall(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    rise[i] = 0.005 * (0.1 + std::exp(-0.01 * (i + 0.6)));
    fall[i] = 0.005 * (0.1 + std::exp(-0.01 * (i + 0.4)));
  }
  for (double s : {0.0, 0.4}) {
    renewal::Problem p{0.5, s, 1.3, 0.01, rise, fall};
    const auto a = renewal::solve_serial(p);
    const auto b = renewal::solve(p);
    REQUIRE(a.size() == cells + 1);
    for (std::size_t i = 0; i < a.size(); i += 7) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
  }
}

TEST_CASE("truncated tempered-stable scale function") {
  const auto m = truncate_measure(fixtures::tempered(), 64);
  const auto e = build_evaluator(m, 0.1);
  CHECK(e.method() == ScaleMethod::RenewalEquation);
  CHECK(e.certificate() < 1e-6);
  CHECK(e.w_zero() == doctest::Approx(1.0 / m.c0()).epsilon(1e-12));
  CHECK_THROWS_AS(build_evaluator(fixtures::tempered(), 0.1), UnsupportedModelError);
}
