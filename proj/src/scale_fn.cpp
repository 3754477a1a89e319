#include "dualdiv/scale_fn.hpp"

#include <unsupported/Eigen/Polynomials>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "dualdiv/errors.hpp"
#include "dualdiv/quadrature.hpp"
#include "dualdiv/renewal.hpp"

namespace dualdiv {

namespace {

using cplx = std::complex<double>;
using Poly = std::vector<double>;  // ascending coefficients

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  }
  return r;
}

Poly poly_add(Poly a, const Poly& b) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
  return a;
}

Poly poly_derivative(const Poly& a) {
  if (a.size() <= 1) return {0.0};
  Poly d(a.size() - 1);
  for (std::size_t i = 1; i < a.size(); ++i) d[i - 1] = static_cast<double>(i) * a[i];
  return d;
}

cplx poly_eval(const Poly& a, cplx x) {
  cplx r = 0.0;
  for (auto it = a.rbegin(); it != a.rend(); ++it) r = r * x + *it;
  return r;
}

// (e^{ρx} - 1)/ρ
cplx expm1_ratio(cplx rho, double x) {
  const cplx u = rho * x;
  if (std::abs(u) < 0.1) {
    cplx term = 1.0;
    cplx sum = 1.0;
    for (int k = 2; k <= 14; ++k) {
      term *= u / static_cast<double>(k);
      sum += term;
    }
    return x * sum;
  }
  return (std::exp(u) - 1.0) / rho;
}

// (e^{ρx} - 1 - ρx)/ρ²
cplx expm2_ratio(cplx rho, double x) {
  const cplx u = rho * x;
  if (std::abs(u) < 0.5) {
    cplx term = 0.5;
    cplx sum = 0.5;
    for (int k = 3; k <= 20; ++k) {
      term *= u / static_cast<double>(k);
      sum += term;
    }
    return x * x * sum;
  }
  return (std::exp(u) - 1.0 - u) / (rho * rho);
}

// ∫₀ᵘ (e^{ρy}-1)/ρ · e^{-φy} dy
cplx integrated_ratio(cplx rho, double phi, double u) {
  if (std::abs(rho) * u < 1e-6) {
    const double m1 = u * u * quad::exp_moment(1, phi * u);
    const double m2 = u * u * u * quad::exp_moment(2, phi * u);
    return m1 + 0.5 * rho * m2;
  }
  return (expm1_ratio(rho - phi, u) - expm1_ratio(-phi, u)) / rho;
}

// Largest root of f(θ) = Ψ(θ) + αθ - q on [0, ∞).
double largest_root(const ModelSpec& m, double q, double alpha) {
  auto f = [&](double t) { return laplace_exponent(m, t) + alpha * t - q; };
  auto fp = [&](double t) { return laplace_exponent_derivative(m, t) + alpha; };
  constexpr double kCap = 1e12;

  auto slope_at_zero = [&] {
    try {
      return fp(0.0);
    } catch (const DomainError&) {
      return fp(1e-12);
    }
  };

  double theta_min = 0.0;
  if (slope_at_zero() < 0.0) {
    double hi = 1.0;
    while (fp(hi) < 0.0) {
      hi *= 2.0;
      if (hi > kCap) throw NumericalError("largest_root: Psi' stays negative up to 1e12");
    }
    double lo = 0.0;
    while (hi - lo > 1e-14 * std::max(1.0, hi)) {
      const double mid = 0.5 * (lo + hi);
      (fp(mid) < 0.0 ? lo : hi) = mid;
    }
    theta_min = hi;
  }
  if (q == 0.0 && theta_min == 0.0) return 0.0;

  double lo = theta_min;
  double hi = std::max(1.0, 2.0 * theta_min);
  while (!(f(hi) > 0.0)) {
    lo = hi;
    hi *= 2.0;
    if (hi > kCap) {
      std::ostringstream msg;
      msg << "largest_root: no sign change of Psi(theta) + " << alpha << " theta - " << q
          << " up to theta = 1e12 (last value " << f(lo) << ")";
      throw NumericalError(msg.str());
    }
  }
  while (hi - lo > 1e-13 * hi) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 3; ++it) {
    const double d = fp(t);
    if (!(d > 0.0)) break;
    const double next = t - f(t) / d;
    if (!(next > lo - 1e-12 * hi && next < hi + 1e-12 * hi)) break;
    t = next;
  }
  return t;
}

struct RationalParts {
  std::vector<double> mus;
  std::vector<double> weights;
  double rate = 0.0;
};

std::optional<RationalParts> rational_parts(const JumpSpec& j) {
  RationalParts r;
  if (std::holds_alternative<NoJumps>(j)) return r;
  if (const auto* e = std::get_if<ExponentialJumps>(&j)) {
    r.rate = e->rate;
    r.mus = {e->mu};
    r.weights = {1.0};
    return r;
  }
  if (const auto* h = std::get_if<HyperExponentialJumps>(&j)) {
    std::map<double, double> merged;
    for (std::size_t i = 0; i < h->mus.size(); ++i) {
      if (h->weights[i] > 0.0) merged[h->mus[i]] += h->weights[i];
    }
    r.rate = h->rate;
    for (const auto& [mu, w] : merged) {
      r.mus.push_back(mu);
      r.weights.push_back(w);
    }
    return r;
  }
  return std::nullopt;
}

// Polishes roots of `d` with complex Newton steps.
cplx polish(const Poly& d, const Poly& dd, cplx z) {
  for (int it = 0; it < 8; ++it) {
    const cplx fv = poly_eval(d, z);
    const cplx dv = poly_eval(dd, z);
    if (std::abs(dv) == 0.0) break;
    const cplx step = fv / dv;
    z -= step;
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(z))) break;
  }
  return z;
}

}  // namespace

struct ScaleEvaluator::Table {
  double step = 0.0;
  double tilt = 0.0;
  std::vector<double> u;     // e^{-tilt x} W(x) at nodes
  std::vector<double> z;     // Z at nodes
  std::vector<double> zbar;  // Z̄ at nodes

  std::size_t stencil_start(double x) const {
    const auto n = static_cast<long>(u.size());
    long i0 = static_cast<long>(std::floor(x / step)) - 2;
    return static_cast<std::size_t>(std::clamp(i0, 0L, n - 6));
  }

  // Tilted value and derivative from a 6-point Lagrange interpolant.
  std::pair<double, double> tilted(double x) const {
    const std::size_t i0 = stencil_start(x);
    const double s = x / step - static_cast<double>(i0);
    double val = 0.0;
    double der = 0.0;
    for (int k = 0; k < 6; ++k) {
      double lk = 1.0;
      double dk = 0.0;
      for (int j = 0; j < 6; ++j) {
        if (j == k) continue;
        const double inv = 1.0 / (k - j);
        double prod = inv;
        for (int l = 0; l < 6; ++l) {
          if (l == k || l == j) continue;
          prod *= (s - l) / (k - l);
        }
        dk += prod;
        lk *= (s - j) * inv;
      }
      val += lk * u[i0 + k];
      der += dk * u[i0 + k];
    }
    return {val, der / step};
  }

  double w(double x) const { return std::exp(tilt * x) * tilted(x).first; }
};

std::string to_string(ScaleMethod m) {
  switch (m) {
    case ScaleMethod::PartialFractions:
      return "partial_fractions";
    case ScaleMethod::RenewalEquation:
      return "renewal_equation";
  }
  return "unknown";
}

double phi(const ModelSpec& m, double q) {
  if (!(q >= 0.0)) throw DomainError("phi: q must be >= 0");
  return largest_root(m, q, 0.0);
}

double phi1(const ModelSpec& m, double q, double alpha) {
  if (!(q >= 0.0) || !(alpha >= 0.0)) throw DomainError("phi1: q and alpha must be >= 0");
  return largest_root(m, q, alpha);
}

void ScaleEvaluator::check_range(double x) const {
  if (x > range_) {
    std::ostringstream msg;
    msg << "scale function requested at x = " << x << " beyond certified range " << range_
        << " (" << to_string(method_) << ")";
    throw NumericalError(msg.str());
  }
}

double ScaleEvaluator::table_w(double x) const { return table_->w(x); }

double ScaleEvaluator::table_w_prime(double x) const {
  const auto [v, d] = table_->tilted(x);
  return std::exp(table_->tilt * x) * (d + table_->tilt * v);
}

double ScaleEvaluator::w_zero() const {
  if (method_ == ScaleMethod::PartialFractions) {
    cplx s = 0.0;
    for (const auto& t : terms_) s += t.amplitude;
    return s.real();
  }
  return table_->u.front();
}

double ScaleEvaluator::w(double x) const {
  if (x < 0.0) return 0.0;
  check_range(x);
  if (method_ == ScaleMethod::RenewalEquation) return table_w(x);
  cplx s = 0.0;
  for (const auto& t : terms_) s += t.amplitude * std::exp(t.rate * x);
  return s.real();
}

double ScaleEvaluator::w_prime(double x) const {
  if (x < 0.0) return 0.0;
  check_range(x);
  if (method_ == ScaleMethod::RenewalEquation) return table_w_prime(x);
  cplx s = 0.0;
  for (const auto& t : terms_) s += t.amplitude * t.rate * std::exp(t.rate * x);
  return s.real();
}

double ScaleEvaluator::z(double x) const {
  if (x <= 0.0) return 1.0;
  check_range(x);
  if (method_ == ScaleMethod::PartialFractions) {
    if (q_ == 0.0) return 1.0;
    cplx s = 0.0;
    for (const auto& t : terms_) s += t.amplitude * expm1_ratio(t.rate, x);
    return 1.0 + q_ * s.real();
  }
  const auto& tb = *table_;
  const auto i = std::min(static_cast<std::size_t>(x / tb.step), tb.u.size() - 1);
  const double xi = tb.step * static_cast<double>(i);
  return tb.z[i] + q_ * quad::gauss_legendre4([&](double y) { return tb.w(y); }, xi, x);
}

double ScaleEvaluator::zbar(double x) const {
  if (x <= 0.0) return x;
  check_range(x);
  if (method_ == ScaleMethod::PartialFractions) {
    if (q_ == 0.0) return x;
    cplx s = 0.0;
    for (const auto& t : terms_) s += t.amplitude * expm2_ratio(t.rate, x);
    return x + q_ * s.real();
  }
  const auto& tb = *table_;
  const auto i = std::min(static_cast<std::size_t>(x / tb.step), tb.u.size() - 1);
  const double xi = tb.step * static_cast<double>(i);
  return tb.zbar[i] + (x - xi) * tb.z[i] +
         q_ * quad::gauss_legendre4([&](double y) { return (x - y) * tb.w(y); }, xi, x);
}

ScaleTriple ScaleEvaluator::triple(double x) const { return {w(x), z(x), zbar(x)}; }

std::pair<double, double> ScaleEvaluator::exp_weighted_integrals(double phi,
                                                                 double u) const {
  if (!(u >= 0.0)) throw DomainError("exp_weighted_integrals: u must be >= 0");
  if (!(phi >= 0.0)) throw DomainError("exp_weighted_integrals: phi must be >= 0");
  if (u == 0.0) return {0.0, 0.0};
  check_range(u);
  if (method_ == ScaleMethod::PartialFractions) {
    cplx iw = 0.0;
    cplx iz = 0.0;
    for (const auto& t : terms_) {
      iw += t.amplitude * expm1_ratio(t.rate - phi, u);
      if (q_ > 0.0) iz += t.amplitude * integrated_ratio(t.rate, phi, u);
    }
    const double base = expm1_ratio(-phi, u).real();
    return {iw.real(), base + q_ * iz.real()};
  }
  const auto& tb = *table_;
  auto f = [&](double y) { return tb.w(y) * std::exp(-phi * y); };
  double iw = 0.0;
  double a = 0.0;
  while (a < u) {
    const double b = std::min(u, a + tb.step);
    iw += quad::gauss_legendre4(f, a, b);
    a = b;
  }
  if (phi == 0.0) return {iw, zbar(u)};
  // Integration by parts: ∫Z e^{-φy} = (1 - Z(u)e^{-φu})/φ + (q/φ)∫W e^{-φy}.
  const double iz = (1.0 - z(u) * std::exp(-phi * u)) / phi + (q_ / phi) * iw;
  return {iw, iz};
}

double ScaleEvaluator::laplace_transform(double theta) const {
  if (!(theta > phi_q_)) throw DomainError("laplace_transform: theta must exceed Phi(q)");
  if (method_ == ScaleMethod::PartialFractions) {
    cplx s = 0.0;
    for (const auto& t : terms_) s += t.amplitude / (theta - t.rate);
    return s.real();
  }
  const auto& tb = *table_;
  const double xmax = tb.step * static_cast<double>(tb.u.size() - 1);
  auto f = [&](double y) { return tb.tilted(y).first * std::exp((tb.tilt - theta) * y); };
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < tb.u.size(); ++i) {
    s += quad::gauss_legendre4(f, tb.step * i, tb.step * (i + 1));
  }
  // Beyond the grid the tilted function is taken as flat.
  s += tb.u.back() * std::exp((tb.tilt - theta) * xmax) / (theta - tb.tilt);
  return s;
}

namespace {

double certify(const ScaleEvaluator& e) {
  const double base = std::max(e.phi_q(), 0.5);
  double worst = 0.0;
  for (double s : {0.5, 1.0, 2.0, 4.0}) {
    const double theta = e.phi_q() + s * base;
    const double exact = 1.0 / (laplace_exponent(e.model(), theta) - e.q());
    const double got = e.laplace_transform(theta);
    worst = std::max(worst, std::abs(got - exact) / std::abs(exact));
  }
  return worst;
}

// Hat-function moments of e^{-tilt·y}(q + Π((y,∞))) on cells of width h.
// Writing Π((y,∞)) = Π((b,∞)) + ∫_y^b π and exchanging the order of
// integration leaves a closed-form part plus ∫ π(s)K(s)ds over the cell.
renewal::MomentFn kernel_moments(const ModelSpec& m, double q, double tilt) {
  return [&m, q, tilt](double h, std::size_t cells) {
    const auto& j = m.jumps();
    std::vector<double> rise(cells);
    std::vector<double> fall(cells);
    auto k_rise = [=](double a, double s) {
      const double l = s - a;
      return std::exp(-tilt * a) * l * l * quad::exp_moment(1, tilt * l) / h;
    };
    auto k_fall = [=](double a, double s) {
      const double l = s - a;
      return std::exp(-tilt * a) *
             (h * l * quad::exp_moment(0, tilt * l) - l * l * quad::exp_moment(1, tilt * l)) / h;
    };
    const bool jumps_present = !std::holds_alternative<NoJumps>(j);
    double tail_b = jumps_present ? jumps::tail(j, h * static_cast<double>(cells)) : 0.0;
    for (std::size_t k = cells; k-- > 0;) {
      const double a = h * static_cast<double>(k);
      const double b = a + h;
      double jr = 0.0;
      double jf = 0.0;
      double mass = 0.0;
      if (jumps_present) {
        jr = jumps::integrate(j, [&](double s) { return k_rise(a, s); }, a, b);
        jf = jumps::integrate(j, [&](double s) { return k_fall(a, s); }, a, b);
        mass = jumps::integrate(j, [](double) { return 1.0; }, a, b);
      }
      rise[k] = (q + tail_b) * k_rise(a, b) + jr;
      fall[k] = (q + tail_b) * k_fall(a, b) + jf;
      tail_b += mass;
    }
    return std::make_pair(std::move(rise), std::move(fall));
  };
}

}  // namespace

ScaleEvaluator build_evaluator(const ModelSpec& m, double q, const ScaleOptions& opts) {
  if (!(q >= 0.0)) throw DomainError("build_evaluator: q must be >= 0");
  if (q == 0.0 && !(m.mean() > 0.0)) {
    throw DomainError("build_evaluator: q = 0 requires E(X1) > 0");
  }
  ScaleEvaluator e(m, q, phi(m, q));

  const auto parts = opts.force_numerical ? std::nullopt : rational_parts(m.jumps());
  if (parts) {
    Poly num{1.0};
    for (double mu : parts->mus) num = poly_mul(num, {mu, 1.0});
    const double s2 = 0.5 * m.sigma() * m.sigma();
    Poly den = poly_mul({-parts->rate - q, m.c0(), s2}, num);
    if (s2 == 0.0) den.pop_back();
    for (std::size_t i = 0; i < parts->mus.size(); ++i) {
      Poly prod{parts->rate * parts->weights[i] * parts->mus[i]};
      for (std::size_t k = 0; k < parts->mus.size(); ++k) {
        if (k != i) prod = poly_mul(prod, {parts->mus[k], 1.0});
      }
      den = poly_add(den, prod);
    }
    const Poly dden = poly_derivative(den);

    std::vector<cplx> roots;
    if (den.size() == 2) {
      roots.push_back(-den[0] / den[1]);
    } else {
      Eigen::VectorXd coeffs(den.size());
      for (std::size_t i = 0; i < den.size(); ++i) coeffs[static_cast<Eigen::Index>(i)] = den[i];
      Eigen::PolynomialSolver<double, Eigen::Dynamic> solver(coeffs);
      for (Eigen::Index i = 0; i < solver.roots().size(); ++i) {
        roots.push_back(polish(den, dden, solver.roots()[i]));
      }
    }

    bool repeated = false;
    for (std::size_t i = 0; i < roots.size(); ++i) {
      for (std::size_t k = i + 1; k < roots.size(); ++k) {
        const double scale = std::max({1.0, std::abs(roots[i]), std::abs(roots[k])});
        if (std::abs(roots[i] - roots[k]) < 1e-8 * scale) repeated = true;
      }
    }
    if (repeated) {
      e.warnings_.push_back("repeated pole in 1/(Psi - q); using the renewal-equation solver");
    } else {
      double max_re = 0.0;
      for (const auto& r : roots) {
        // Snap numerically real roots onto the real axis.
        cplx rr = std::abs(r.imag()) < 1e-12 * std::max(1.0, std::abs(r)) ? cplx(r.real(), 0.0) : r;
        e.terms_.push_back({poly_eval(num, rr) / poly_eval(dden, rr), rr});
        max_re = std::max(max_re, rr.real());
      }
      std::sort(e.terms_.begin(), e.terms_.end(),
                [](const ExpTerm& a, const ExpTerm& b) { return a.rate.real() > b.rate.real(); });
      e.method_ = ScaleMethod::PartialFractions;
      e.range_ = 700.0 / std::max(max_re, 1e-3);
      e.certificate_ = certify(e);
      if (!(e.certificate_ <= opts.max_certificate)) {
        std::ostringstream msg;
        msg << "partial-fraction expansion failed its Laplace round-trip check (relative error "
            << e.certificate_ << ")";
        throw NumericalError(msg.str());
      }
      return e;
    }
  }

  if (!m.finite_activity()) {
    throw UnsupportedModelError(
        "scale function of an infinite-activity model; apply truncate_measure first");
  }
  e.method_ = ScaleMethod::RenewalEquation;
  if (!(opts.grid_step > 0.0) || !(opts.x_max > 6.0 * opts.grid_step)) {
    throw DomainError("renewal solver needs grid_step > 0 and x_max > 6 grid_step");
  }
  double h = opts.grid_step;
  if (const auto* ia = std::get_if<InfiniteActivityJumps>(&m.jumps())) {
    // W'' has a jump at the truncation point; keep it on a node, 4 cells in.
    const double cells_below = std::ceil(ia->lower / std::min(h, ia->lower / 4.0));
    h = ia->lower / cells_below;
  }
  // Halve the step while the round-trip check fails and the finest level
  // stays within the cell budget.
  constexpr std::size_t kMaxFineCells = std::size_t{1} << 17;
  for (;;) {
    const auto n = static_cast<std::size_t>(std::ceil(opts.x_max / h - 1e-9));
    auto tb = std::make_shared<ScaleEvaluator::Table>();
    tb->step = h;
    tb->tilt = e.phi_q();
    tb->u = renewal::solve_extrapolated(m.c0(), m.sigma(), tb->tilt, h, n,
                                        kernel_moments(m, e.q(), tb->tilt));

    tb->z.assign(n + 1, 1.0);
    tb->zbar.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = h * i;
      const double b = h * (i + 1);
      const double iw = quad::gauss_legendre4([&](double y) { return tb->w(y); }, a, b);
      const double iwx =
          quad::gauss_legendre4([&](double y) { return (b - y) * tb->w(y); }, a, b);
      tb->z[i + 1] = tb->z[i] + q * iw;
      tb->zbar[i + 1] = tb->zbar[i] + h * tb->z[i] + q * iwx;
    }
    e.table_ = std::move(tb);
    e.range_ = h * static_cast<double>(n);
    e.certificate_ = certify(e);
    if (e.certificate_ <= opts.max_certificate) break;
    if (8 * n > kMaxFineCells) {
      std::ostringstream msg;
      msg << "renewal-equation scale function failed its Laplace round-trip check (relative "
             "error "
          << e.certificate_ << " > " << opts.max_certificate << " at step " << h
          << "); increase the truncation level or reduce x_max";
      throw NumericalError(msg.str());
    }
    std::ostringstream msg;
    msg << "round-trip error " << e.certificate_ << " at step " << h << "; step halved";
    e.warnings_.push_back(msg.str());
    h *= 0.5;
  }
  return e;
}


ExpWeightedIntegrals::ExpWeightedIntegrals(const ScaleEvaluator& e, double phi)
    : e_(&e), phi_(phi) {
  if (!(phi >= 0.0)) throw DomainError("ExpWeightedIntegrals: phi must be >= 0");
  if (e.method() != ScaleMethod::RenewalEquation) return;
  const auto& tb = *e.table_;
  step_ = tb.step;
  prefix_.assign(tb.u.size(), 0.0);
  auto f = [&](double y) { return tb.w(y) * std::exp(-phi * y); };
  for (std::size_t i = 1; i < prefix_.size(); ++i) {
    prefix_[i] = prefix_[i - 1] + quad::gauss_legendre4(f, step_ * (i - 1), step_ * i);
  }
}

std::pair<double, double> ExpWeightedIntegrals::operator()(double u) const {
  if (prefix_.empty() || !(u > 0.0)) return e_->exp_weighted_integrals(phi_, std::max(u, 0.0));
  e_->check_range(u);
  const auto& tb = *e_->table_;
  const auto i = std::min(static_cast<std::size_t>(u / step_), prefix_.size() - 1);
  const double iw = prefix_[i] + quad::gauss_legendre4(
                                     [&](double y) { return tb.w(y) * std::exp(-phi_ * y); },
                                     step_ * static_cast<double>(i), u);
  if (phi_ == 0.0) return {iw, e_->zbar(u)};
  const double q = e_->q();
  return {iw, (1.0 - e_->z(u) * std::exp(-phi_ * u)) / phi_ + (q / phi_) * iw};
}

}  // namespace dualdiv
