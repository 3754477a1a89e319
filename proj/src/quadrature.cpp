#include "dualdiv/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "dualdiv/errors.hpp"

namespace dualdiv::quad {

namespace {

struct Piece {
  double a, b, value, error;
  bool operator<(const Piece& o) const { return error < o.error; }
};

// One 21-point Kronrod application. Boost reports the error of the rule on
// the reference interval, so it is rescaled here.
Piece apply_rule(const std::function<double(double)>& f, double a, double b, double& l1) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 21>;
  double err = 0.0;
  double local_l1 = 0.0;
  const double v = GK::integrate(f, a, b, 0, 0.0, &err, &local_l1);
  l1 = local_l1;
  return {a, b, v, err * 0.5 * (b - a)};
}

double integrate_finite(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, double rel_tol) {
  std::priority_queue<Piece> heap;
  double l1 = 0.0;
  Piece first = apply_rule(f, a, b, l1);
  double value = first.value;
  double error = first.error;
  heap.push(first);
  for (int it = 0; it < 2000; ++it) {
    if (error <= std::max(abs_tol, rel_tol * std::abs(value)) || !std::isfinite(value)) break;
    const Piece worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;
    heap.pop();
    double l1a = 0.0;
    double l1b = 0.0;
    const Piece left = apply_rule(f, worst.a, mid, l1a);
    const Piece right = apply_rule(f, mid, worst.b, l1b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed the drift of incremental updates.
  value = 0.0;
  error = 0.0;
  l1 = 0.0;
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    l1 += std::abs(heap.top().value);
    heap.pop();
  }
  if (!std::isfinite(value) || error > std::max(abs_tol, 1e3 * rel_tol * l1)) {
    std::ostringstream msg;
    msg << "adaptive quadrature did not converge on [" << a << ", " << b
        << "]: estimate " << value << ", error " << error;
    throw NumericalError(msg.str());
  }
  return value;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol, double rel_tol) {
  if (!(b > a)) return 0.0;
  if (std::isfinite(b)) return integrate_finite(f, a, b, abs_tol, rel_tol);
  // x = a + t/(1-t) maps [0,1) onto [a,∞).
  auto g = [&](double t) {
    if (t >= 1.0) return 0.0;
    const double s = 1.0 - t;
    return f(a + t / s) / (s * s);
  };
  return integrate_finite(g, 0.0, 1.0, abs_tol, rel_tol);
}

double integrate_pieces(const std::function<double(double)>& f,
                        std::span<const double> points, double abs_tol,
                        double rel_tol) {
  double sum = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    sum += integrate(f, points[i - 1], points[i], abs_tol, rel_tol);
  }
  return sum;
}

double exp_moment(int n, double z) {
  if (z < 1.0 + n) {
    // Σ_k (-z)^k / (k! (n+k+1))
    double term = 1.0;
    double sum = 1.0 / (n + 1);
    for (int k = 1; k < 200; ++k) {
      term *= -z / k;
      const double add = term / (n + k + 1);
      sum += add;
      if (std::abs(add) < 1e-17 * std::abs(sum)) break;
    }
    return sum;
  }
  // Upward recurrence E_n = (n E_{n-1} - e^{-z}) / z is stable for z > n.
  const double ez = std::exp(-z);
  double e = -std::expm1(-z) / z;
  for (int k = 1; k <= n; ++k) e = (k * e - ez) / z;
  return e;
}

}  // namespace dualdiv::quad
