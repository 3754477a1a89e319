#include "dualdiv/optimal_policy.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "dualdiv/errors.hpp"
#include "dualdiv/threshold_value.hpp"

namespace dualdiv {

OptimalPolicy optimal_threshold(const ScaleEvaluator& e, double alpha,
                                const ThresholdSolverOptions& opts) {
  if (!(alpha > 0.0)) throw DomainError("optimal_threshold: alpha must be > 0");
  const double q = e.q();
  OptimalPolicy p;
  p.phi1_q = phi1(e.model(), q, alpha);
  const double target = alpha / q - 1.0 / p.phi1_q;
  if (p.phi1_q * alpha / q <= 1.0) {
    p.degenerate = true;
    return p;
  }

  auto g = [&](double b) { return ThresholdValue(e, alpha, b).coefficients().v_bb - target; };
  const double cap = std::min(opts.max_bracket, e.certified_range());

  double lo = 0.0;
  double hi = std::min(1.0, cap);
  double g_hi = g(hi);
  while (!(g_hi > 0.0)) {
    if (hi >= cap) {
      std::ostringstream msg;
      msg << "optimal_threshold: V(b,b) - alpha/q + 1/Phi1 has no sign change on [0, " << hi
          << "] (g(0) = " << g(0.0) << ", g(" << hi << ") = " << g_hi << ")";
      throw NumericalError(msg.str());
    }
    lo = hi;
    hi = std::min(2.0 * hi, cap);
    g_hi = g(hi);
  }

  double prev = g(0.0);
  for (int i = 1; i <= opts.prescan_points; ++i) {
    const double cur = g(hi * i / opts.prescan_points);
    if ((prev < 0.0) != (cur < 0.0)) ++p.prescan_sign_changes;
    prev = cur;
  }
  if (p.prescan_sign_changes > 1) {
    std::ostringstream msg;
    msg << "threshold equation changes sign " << p.prescan_sign_changes << " times on [0, " << hi
        << "]; returning the root in the doubling bracket";
    p.warnings.push_back(msg.str());
  }

  p.bracket_lo = lo;
  p.bracket_hi = hi;
  p.g_lo = g(lo);
  p.g_hi = g_hi;
  while (hi - lo > opts.tolerance * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (g(mid) > 0.0 ? hi : lo) = mid;
    ++p.bisection_steps;
  }
  p.b_star = 0.5 * (lo + hi);
  p.value_at_bstar = ThresholdValue(e, alpha, p.b_star).coefficients().v_bb;
  return p;
}

OptimalValue::OptimalValue(const ScaleEvaluator& e, double alpha, const OptimalPolicy& p)
    : e_(&e), alpha_(alpha), policy_(p), ints_(e, p.phi1_q) {
  if (p.degenerate) policy_.value_at_bstar = 0.0;
}

OptimalValue::OptimalValue(const ScaleEvaluator& e, double alpha)
    : OptimalValue(e, alpha, optimal_threshold(e, alpha)) {}

double OptimalValue::value(double x) const {
  if (x <= 0.0) return 0.0;
  const double q = e_->q();
  const double f = policy_.phi1_q;
  const double b = policy_.b_star;
  if (policy_.degenerate) return (alpha_ / q) * (1.0 - std::exp(-f * x));
  if (x >= b) return alpha_ / q - std::exp(-f * (x - b)) / f;
  const double z = b - x;
  const double ez = std::exp(f * z);
  return -alpha_ * ints_(z).first * ez + (alpha_ / q) * e_->z(z) - ez / f;
}

double OptimalValue::derivative(double x) const {
  const double f = policy_.phi1_q;
  const double b = policy_.b_star;
  if (policy_.degenerate) return (alpha_ / e_->q()) * f * std::exp(-f * x);
  if (x == b) return 1.0;
  if (x > b) return std::exp(-f * (x - b));
  const double z = b - std::max(x, 0.0);
  return std::exp(f * z) * (1.0 + alpha_ * f * ints_(z).first);
}

double OptimalValue::second_derivative(double x) const {
  const double f = policy_.phi1_q;
  const double b = policy_.b_star;
  if (policy_.degenerate) return -f * derivative(x);
  if (x > b) return -f * std::exp(-f * (x - b));
  const double z = b - std::max(x, 0.0);
  const double zt = std::exp(f * z) * (1.0 + alpha_ * f * ints_(z).first);
  return -f * zt - alpha_ * f * (z > 0.0 ? e_->w(z) : e_->w_zero());
}

double optimal_value(const ScaleEvaluator& e, double alpha, double x) {
  return OptimalValue(e, alpha).value(x);
}

double optimal_value_derivative(const ScaleEvaluator& e, double alpha, double x) {
  return OptimalValue(e, alpha).derivative(x);
}

ConcavityReport concavity_report(const ScaleEvaluator& e, double alpha, int points) {
  const OptimalValue v(e, alpha);
  const auto& p = v.policy();
  if (p.degenerate) throw DomainError("concavity_report: b* = 0, no interior region");
  ConcavityReport r;
  r.b_star = p.b_star;
  r.concave = true;
  for (int i = 1; i <= points; ++i) {
    const double x = p.b_star * i / (points + 1);
    const double d2 = v.second_derivative(x);
    r.x.push_back(x);
    r.second_derivative.push_back(d2);
    r.concave = r.concave && d2 < 0.0;
  }
  r.v2_left = v.second_derivative(p.b_star);
  r.v2_right = -p.phi1_q;
  r.gap = r.v2_right - r.v2_left;
  r.gap_expected = alpha * p.phi1_q * e.w_zero();
  return r;
}

HJBReport hjb_verify(const ScaleEvaluator& e, double alpha, const OptimalPolicy& p,
                     const std::vector<double>& xs) {
  const ModelSpec& m = e.model();
  if (!m.finite_activity()) {
    throw UnsupportedModelError("hjb_verify: infinite-activity measure; apply truncate_measure first");
  }
  const OptimalValue v(e, alpha, p);
  const double q = e.q();
  const double s2 = 0.5 * m.sigma() * m.sigma();
  HJBReport r;
  r.x = xs;
  r.residual.resize(xs.size());
  r.rate.resize(xs.size());
  const long n = static_cast<long>(xs.size());
  for (long i = 0; i < n; ++i) {
    if (!(xs[i] > 0.0) || xs[i] == p.b_star) {
      throw DomainError("hjb_verify: grid points must be > 0 and differ from b*");
    }
  }
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < n; ++i) {
    try {
      const double x = xs[i];
      const double d1 = v.derivative(x);
      double gen = -m.c0() * d1 +
                   jump_integral(m, [&](double y) { return v.value(y); }, x, p.b_star);
      if (s2 > 0.0) gen += s2 * v.second_derivative(x);
      const double gain = alpha * (1.0 - d1);
      r.rate[i] = gain > 0.0 ? alpha : 0.0;
      r.residual[i] = gen - q * v.value(x) + std::max(0.0, gain);
    } catch (...) {
#pragma omp critical(dualdiv_hjb_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  r.rate_matches_threshold = true;
  for (long i = 0; i < n; ++i) {
    r.max_abs_residual = std::max(r.max_abs_residual, std::abs(r.residual[i]));
    const double expected = xs[i] > p.b_star ? alpha : 0.0;
    r.rate_matches_threshold = r.rate_matches_threshold && r.rate[i] == expected;
  }
  return r;
}

}  // namespace dualdiv
