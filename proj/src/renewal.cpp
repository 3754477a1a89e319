#include "dualdiv/renewal.hpp"

#include <cmath>

#include "dualdiv/errors.hpp"

namespace dualdiv::renewal {

namespace {

// Σ_{k=1}^{i-1} u_{i-k} H_k with H_k = rise[k-1] + fall[k].
double conv_serial(const std::vector<double>& u, const std::vector<double>& hat,
                   std::size_t i) {
  double s = 0.0;
  for (std::size_t k = 1; k < i; ++k) s += u[i - k] * hat[k];
  return s;
}

double conv_parallel(const std::vector<double>& u, const std::vector<double>& hat,
                     std::size_t i) {
  double s = 0.0;
  const long n = static_cast<long>(i);
  const double* up = u.data();
  const double* hp = hat.data();
#pragma omp parallel for reduction(+ : s) schedule(static) if (n > 4096)
  for (long k = 1; k < n; ++k) s += up[n - k] * hp[k];
  return s;
}

template <class Conv>
std::vector<double> solve_impl(const Problem& p, Conv conv) {
  const std::size_t cells = p.rise.size();
  if (cells == 0 || p.fall.size() != cells || !(p.step > 0.0) ||
      !(p.c0 > 0.0 || p.sigma > 0.0)) {
    throw DomainError("renewal::solve: inconsistent moments, nonpositive step or degenerate drift");
  }
  const std::size_t n = cells + 1;
  const double d = p.step;
  std::vector<double> hat(n, 0.0);
  for (std::size_t k = 1; k < cells; ++k) hat[k] = p.rise[k - 1] + p.fall[k];
  const double r0 = p.fall[0];

  std::vector<double> u(n, 0.0);
  if (p.sigma == 0.0) {
    u[0] = 1.0 / p.c0;
    const double denom = p.c0 - r0;
    if (!(denom > 0.0)) throw NumericalError("renewal::solve: step too large for the kernel mass near 0");
    for (std::size_t i = 1; i < n; ++i) {
      const double e = std::exp(-p.tilt * d * static_cast<double>(i));
      u[i] = (e + u[0] * p.rise[i - 1] + conv(u, hat, i)) / denom;
    }
    return u;
  }
  const double a = 2.0 / (p.sigma * p.sigma);
  const double k = a * (r0 - p.c0) - p.tilt;
  const double denom = 1.0 - 0.5 * d * k;
  double f_prev = a;  // u'(0) = 2/σ²
  for (std::size_t i = 1; i < n; ++i) {
    const double e = std::exp(-p.tilt * d * static_cast<double>(i));
    const double r = a * (e + u[0] * p.rise[i - 1] + conv(u, hat, i));
    u[i] = (u[i - 1] + 0.5 * d * (f_prev + r)) / denom;
    f_prev = r + k * u[i];
  }
  return u;
}

}  // namespace

std::vector<double> solve_serial(const Problem& p) { return solve_impl(p, conv_serial); }

std::vector<double> solve(const Problem& p) { return solve_impl(p, conv_parallel); }

std::vector<double> solve_extrapolated(double c0, double sigma, double tilt, double step,
                                       std::size_t cells, const MomentFn& moments,
                                       bool parallel) {
  auto run = [&](int refine) {
    const double h = step / refine;
    const auto [rise, fall] = moments(h, cells * refine);
    Problem p{c0, sigma, tilt, h, rise, fall};
    return parallel ? solve(p) : solve_serial(p);
  };
  const auto u1 = run(1);
  const auto u2 = run(2);
  const auto u4 = run(4);

  std::vector<double> out(cells + 1);
  for (std::size_t i = 0; i <= cells; ++i) {
    const double r1 = (4.0 * u2[2 * i] - u1[i]) / 3.0;
    const double r2 = (4.0 * u4[4 * i] - u2[2 * i]) / 3.0;
    out[i] = (16.0 * r2 - r1) / 15.0;
  }
  return out;
}

}  // namespace dualdiv::renewal
