#include "dualdiv/threshold_value.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

#include "dualdiv/errors.hpp"

namespace dualdiv {

namespace {

void check_args(double alpha, double b) {
  if (!(alpha > 0.0)) throw DomainError("threshold value: alpha must be > 0");
  if (!(b >= 0.0)) throw DomainError("threshold value: b must be >= 0");
}

}  // namespace

std::pair<double, double> exp_weighted_integrals(const ScaleEvaluator& e, double phi1,
                                                 double u) {
  return e.exp_weighted_integrals(phi1, u);
}

ThresholdCoefficients coefficients(const ScaleEvaluator& e, double alpha, double b) {
  return ThresholdValue(e, alpha, b).coefficients();
}

ThresholdValue::ThresholdValue(const ScaleEvaluator& e, double alpha, double b)
    : e_(&e),
      alpha_(alpha),
      b_(b),
      phi1_((check_args(alpha, b), dualdiv::phi1(e.model(), e.q(), alpha))),
      ints_(e, phi1_) {
  if (!(e.q() > 0.0)) throw DomainError("threshold value: q must be > 0");
  const double q = e.q();
  const double f = phi1_;
  const auto [iw, iz] = ints_(b);
  // Work with e^{-Φ₁b}-scaled A, B, C so large b does not overflow.
  const double a_s = 1.0 + alpha * f * iw;
  const double b_s = -(alpha / q) * f * iz;
  const double c_s = (alpha / q) * (q - alpha * f) * iw;
  if (std::abs(a_s) < 1e-12) {
    std::ostringstream msg;
    msg << "threshold coefficients: A(b) is numerically zero at b = " << b;
    throw NumericalError(msg.str());
  }
  const double scale = std::exp(f * b);
  coef_.a = a_s * scale;
  coef_.b_coef = b_s * scale;
  coef_.c_coef = c_s * scale;
  coef_.v_bb = -(b_s + c_s) / a_s;
  ratio_ = 1.0 - q * coef_.v_bb / alpha;
}

double ThresholdValue::zeta(double z, double iw) const {
  return std::exp(phi1_ * z) * (1.0 + alpha_ * phi1_ * iw);
}

double ThresholdValue::value(double x, ValueForm form) const {
  if (x <= 0.0) return 0.0;
  const double q = e_->q();
  const double cap = alpha_ / q;
  double v;
  if (x >= b_) {
    v = cap + (coef_.v_bb - cap) * std::exp(-phi1_ * (x - b_));
  } else {
    const double z = b_ - x;
    const auto [iw, iz] = ints_(z);
    const double zt = zeta(z, iw);
    if (form == ValueForm::Coefficients) {
      v = coef_.v_bb * zt +
          cap * std::exp(phi1_ * z) * ((q - alpha_ * phi1_) * iw - phi1_ * iz);
    } else {
      v = cap * (e_->z(z) - ratio_ * zt);
    }
  }
  if (!(v >= -1e-8 && v <= cap + 1e-8)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "threshold value V(" << x << ", " << b_ << ") = " << v << " outside [0, alpha/q = "
        << cap << "]; the scale function is not accurate enough here";
    throw NumericalError(msg.str());
  }
  return v;
}

double ThresholdValue::derivative(double x) const {
  const double q = e_->q();
  const double cap = alpha_ / q;
  if (x >= b_) return phi1_ * (cap - coef_.v_bb) * std::exp(-phi1_ * (x - b_));
  const double z = b_ - std::max(x, 0.0);
  const double wz = e_->w(z);
  const double zt = zeta(z, ints_(z).first);
  return -cap * (q * wz - ratio_ * (phi1_ * zt + alpha_ * phi1_ * wz));
}

double ThresholdValue::second_derivative(double x) const {
  const double q = e_->q();
  if (x >= b_) return -phi1_ * derivative(x);
  const double z = b_ - std::max(x, 0.0);
  const double wz = e_->w(z);
  const double wpz = e_->w_prime(z);
  const double zt = zeta(z, ints_(z).first);
  const double f = phi1_;
  return (alpha_ / q) *
         (q * wpz - ratio_ * (f * f * zt + alpha_ * f * f * wz + alpha_ * f * wpz));
}

double ThresholdValue::derivative_left_of_b() const {
  const double q = e_->q();
  const double w0 = e_->w_zero();
  return -(alpha_ / q) * (q * w0 - ratio_ * (phi1_ + alpha_ * phi1_ * w0));
}

double ThresholdValue::second_derivative_left_of_b() const {
  const double q = e_->q();
  const double w0 = e_->w_zero();
  const double wp0 = e_->w_prime(0.0);
  const double f = phi1_;
  return (alpha_ / q) * (q * wp0 - ratio_ * (f * f + alpha_ * f * f * w0 + alpha_ * f * wp0));
}

double value(const ScaleEvaluator& e, double alpha, double b, double x, ValueForm form) {
  return ThresholdValue(e, alpha, b).value(x, form);
}

double barrier_value(const ScaleEvaluator& e, double b, double x) {
  if (!(x >= 0.0 && x <= b)) throw DomainError("barrier_value: need 0 <= x <= b");
  const double q = e.q();
  const double zb = e.z(b);
  const double zbar_b = e.zbar(b);
  const double zz = e.z(b - x);
  const double slope = laplace_exponent_derivative(e.model(), 0.0);
  return zbar_b / zb * zz - e.zbar(b - x) + (slope / q) * (zz / zb - 1.0);
}

BoundaryReport boundary_report(const ScaleEvaluator& e, double alpha, double b, double h) {
  if (!(b > 0.0)) throw DomainError("boundary_report: b must be > 0");
  const ThresholdValue v(e, alpha, b);
  BoundaryReport r;
  r.b = b;
  r.h = h;
  r.zero_volatility = e.model().sigma() == 0.0;
  r.v_b = v.value(b);
  r.continuity_residual = std::abs(v.value(b + h) - v.value(b - h));
  auto right = [&](double s) { return (v.value(b + s) - r.v_b) / s; };
  auto left = [&](double s) { return (r.v_b - v.value(b - s)) / s; };
  r.dv_right = 2.0 * right(0.5 * h) - right(h);
  r.dv_left = 2.0 * left(0.5 * h) - left(h);
  r.dv_right_analytic = v.derivative(b);
  r.dv_left_analytic = v.derivative_left_of_b();
  auto residual = [&](double dl, double dr) {
    if (r.zero_volatility) {
      const double c0 = e.model().c0();
      return std::abs((c0 + alpha) * dr - c0 * dl - alpha);
    }
    return std::abs(dr - dl);
  };
  r.derivative_residual = residual(r.dv_left, r.dv_right);
  r.derivative_residual_analytic = residual(r.dv_left_analytic, r.dv_right_analytic);
  return r;
}

double jump_integral(const ModelSpec& m, const std::function<double(double)>& f, double x,
                     double kink) {
  if (!m.finite_activity()) {
    throw UnsupportedModelError(
        "jump integral over an infinite-activity measure; apply truncate_measure first");
  }
  const double fx = f(x);
  auto g = [&](double y) { return f(x + y) - fx; };
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (kink > x) {
    return jumps::integrate(m.jumps(), g, 0.0, kink - x) +
           jumps::integrate(m.jumps(), g, kink - x, inf);
  }
  return jumps::integrate(m.jumps(), g, 0.0, inf);
}

double ide_residual(const ThresholdValue& v, double x) {
  const ModelSpec& m = v.evaluator().model();
  if (!(x > 0.0) || x == v.b()) throw DomainError("ide_residual: x must be > 0 and != b");
  const double q = v.evaluator().q();
  const double s2 = 0.5 * m.sigma() * m.sigma();
  const double d1 = v.derivative(x);
  double gen = -m.c0() * d1 +
               jump_integral(m, [&](double y) { return v.value(y); }, x, v.b());
  if (s2 > 0.0) gen += s2 * v.second_derivative(x);
  double res = gen - q * v.value(x);
  if (x > v.b()) res += v.alpha() * (1.0 - d1);
  return res;
}

double ide_residual(const ScaleEvaluator& e, double alpha, double b, double x) {
  return ide_residual(ThresholdValue(e, alpha, b), x);
}

ValuationGrid valuation_grid(const ScaleEvaluator& e, double alpha, double b,
                             const std::vector<double>& xs) {
  const ThresholdValue tv(e, alpha, b);
  ValuationGrid g;
  g.b = b;
  g.params = {e.q(), alpha, b};
  g.x = xs;
  g.v.resize(xs.size());
  g.v_prime.resize(xs.size());
  const long n = static_cast<long>(xs.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i) {
    try {
      g.v[i] = tv.value(xs[i]);
      g.v_prime[i] = xs[i] > 0.0 ? tv.derivative(xs[i]) : tv.derivative(0.0);
    } catch (...) {
#pragma omp critical(dualdiv_grid_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return g;
}

}  // namespace dualdiv
