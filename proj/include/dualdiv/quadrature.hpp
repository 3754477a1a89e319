#pragma once

#include <array>
#include <functional>
#include <span>

namespace dualdiv::quad {

/// Adaptive 21-point Gauss-Kronrod on [a, b]; b may be +∞. Throws
/// NumericalError when the error estimate exceeds max(abs_tol, rel_tol·L1).
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-13, double rel_tol = 1e-11);

/// Sum of `integrate` over consecutive intervals [p0,p1], [p1,p2], ...
double integrate_pieces(const std::function<double(double)>& f,
                        std::span<const double> points, double abs_tol = 1e-13,
                        double rel_tol = 1e-11);

/// Four-point Gauss-Legendre rule on [a, b]; exact for quintics.
template <class F>
double gauss_legendre4(F&& f, double a, double b) {
  constexpr std::array<double, 2> nodes{0.3399810435848562648026658,
                                        0.8611363115940525752239465};
  constexpr std::array<double, 2> weights{0.6521451548625461426269361,
                                          0.3478548451374538573730639};
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (int k = 0; k < 2; ++k) {
    sum += weights[k] * (f(mid - half * nodes[k]) + f(mid + half * nodes[k]));
  }
  return half * sum;
}

/// E_n(z) = ∫₀¹ tⁿ e^{-zt} dt for z ≥ 0, stable for small z.
double exp_moment(int n, double z);

}  // namespace dualdiv::quad
