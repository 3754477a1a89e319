#include "dualdiv/levy_model.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dualdiv/errors.hpp"
#include "dualdiv/quadrature.hpp"

namespace dualdiv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Infinite-activity integrals are split into decades below 1; the mass on
// (0, kSmallCut] is handled analytically from a local power-law fit.
constexpr double kSmallCut = 1e-14;

// Local exponent p with ν(x) ≈ ν(ε)(x/ε)^{-p} near ε.
double local_power(const std::function<double(double)>& nu, double eps) {
  const double a = nu(eps);
  const double b = nu(eps / 10.0);
  if (!(a > 0.0) || !(b > 0.0)) return 0.0;
  return std::log(b / a) / std::log(10.0);
}

// ∫_0^ε coeff·x^k ν(x) dx under the power-law fit; +∞ if divergent.
double small_remainder(const std::function<double(double)>& nu, int k,
                       double coeff) {
  if (coeff == 0.0) return 0.0;
  const double p = local_power(nu, kSmallCut);
  const double expo = k + 1.0 - p;
  if (expo <= 1e-6) return coeff > 0 ? kInf : -kInf;
  return coeff * nu(kSmallCut) * std::pow(kSmallCut, k + 1.0) / expo;
}

std::vector<double> decade_points(double lo, double hi) {
  std::vector<double> pts;
  pts.push_back(lo);
  double x = std::pow(10.0, std::ceil(std::log10(lo)));
  if (x <= lo) x *= 10.0;
  while (x < hi && x <= 1.0) {
    pts.push_back(x);
    x *= 10.0;
  }
  if (hi > 1.0 && pts.back() < 1.0) pts.push_back(1.0);
  if (hi > 8.0 && pts.back() < 8.0) pts.push_back(8.0);
  pts.push_back(hi);
  return pts;
}

// ∫ f(x)ν(x)dx over the support of an infinite-activity spec, with the
// small-jump remainder added from the leading-order behaviour f ≈ coeff·x^k.
double ia_integrate(const InfiniteActivityJumps& j,
                    const std::function<double(double)>& f, double lo,
                    double hi, int k, double coeff) {
  lo = std::max(lo, j.lower);
  hi = std::min(hi, j.upper);
  if (!(hi > lo)) return 0.0;
  double rem = 0.0;
  double start = lo;
  if (lo == 0.0) {
    rem = small_remainder(j.density, k, coeff);
    if (!std::isfinite(rem)) return rem;
    start = kSmallCut;
  }
  auto pts = decade_points(start, hi);
  auto g = [&](double x) { return f(x) * j.density(x); };
  return rem + quad::integrate_pieces(g, pts, 1e-15, 1e-12);
}

// e^{-u} - 1 + u, accurate for small u.
double compensated_exp(double u) {
  if (std::abs(u) < 1e-3) {
    return u * u * (0.5 - u * (1.0 / 6.0 - u * (1.0 / 24.0 - u / 120.0)));
  }
  return std::expm1(-u) + u;
}

double tab_mass(const TabulatedJumps& t) {
  double s = 0.0;
  for (std::size_t i = 1; i < t.x.size(); ++i) {
    s += 0.5 * (t.density[i] + t.density[i - 1]) * (t.x[i] - t.x[i - 1]);
  }
  return s;
}

// ∫ e^{-θx} xⁿ f(x) dx over the piecewise-linear table for n ∈ {0, 1}.
double tab_exp_moment(const TabulatedJumps& t, double theta, int n) {
  double s = 0.0;
  for (std::size_t i = 1; i < t.x.size(); ++i) {
    const double x0 = t.x[i - 1];
    const double h = t.x[i] - x0;
    if (h <= 0.0) continue;
    const double a = t.density[i - 1];
    const double sl = (t.density[i] - a) / h;
    const double z = theta * h;
    const double e1 = quad::exp_moment(1, z);
    const double e0 = quad::exp_moment(0, z);
    // density on the cell: a + sl·h·τ, τ ∈ [0,1]
    double cell = a * h * e0 + sl * h * h * e1;
    if (n == 1) {
      const double e2 = quad::exp_moment(2, z);
      cell = x0 * cell + a * h * h * e1 + sl * h * h * h * e2;
    }
    s += std::exp(-theta * x0) * cell;
  }
  return s;
}

// ∫_{lo}^{hi} xⁿ f(x) dx for the table, n ∈ {0, 1}.
double tab_partial_moment(const TabulatedJumps& t, double lo, double hi, int n) {
  double s = 0.0;
  for (std::size_t i = 1; i < t.x.size(); ++i) {
    const double x0 = std::max(t.x[i - 1], lo);
    const double x1 = std::min(t.x[i], hi);
    if (x1 <= x0) continue;
    const double h = t.x[i] - t.x[i - 1];
    const double sl = (t.density[i] - t.density[i - 1]) / h;
    auto f = [&](double x) { return t.density[i - 1] + sl * (x - t.x[i - 1]); };
    // Simpson is exact for the quadratic x·f(x).
    const double xm = 0.5 * (x0 + x1);
    auto g = [&](double x) { return n == 0 ? f(x) : x * f(x); };
    s += (x1 - x0) / 6.0 * (g(x0) + 4.0 * g(xm) + g(x1));
  }
  return s;
}

double small_mean_of(const JumpSpec& j) {
  return std::visit(
      Overloaded{
          [](const NoJumps&) { return 0.0; },
          [](const ExponentialJumps& e) {
            return e.rate * -std::expm1(-e.mu) / e.mu - e.rate * std::exp(-e.mu);
          },
          [](const HyperExponentialJumps& h) {
            double s = 0.0;
            for (std::size_t i = 0; i < h.mus.size(); ++i) {
              const double mu = h.mus[i];
              s += h.weights[i] * (-std::expm1(-mu) / mu - std::exp(-mu));
            }
            return h.rate * s;
          },
          [](const GammaJumps& g) {
            return g.rate * g.shape * g.scale *
                   boost::math::gamma_p(g.shape + 1.0, 1.0 / g.scale);
          },
          [](const TabulatedJumps& t) {
            return t.rate * tab_partial_moment(t, 0.0, 1.0, 1);
          },
          [](const InfiniteActivityJumps& ia) {
            return ia_integrate(ia, [](double x) { return x; }, 0.0, 1.0, 1, 1.0);
          },
      },
      j);
}

double activity_of(const JumpSpec& j) {
  return std::visit(
      Overloaded{
          [](const NoJumps&) { return 0.0; },
          [](const ExponentialJumps& e) { return e.rate; },
          [](const HyperExponentialJumps& h) { return h.rate; },
          [](const GammaJumps& g) { return g.rate; },
          [](const TabulatedJumps& t) { return t.rate; },
          [](const InfiniteActivityJumps& ia) {
            if (ia.lower <= 0.0) return kInf;
            return ia_integrate(ia, [](double) { return 1.0; }, ia.lower, ia.upper,
                                0, 0.0);
          },
      },
      j);
}

// ∫₁^∞ y Π(dy)
double large_mean_of(const JumpSpec& j) {
  return std::visit(
      Overloaded{
          [](const NoJumps&) { return 0.0; },
          [](const ExponentialJumps& e) {
            return e.rate * std::exp(-e.mu) * (1.0 + 1.0 / e.mu);
          },
          [](const HyperExponentialJumps& h) {
            double s = 0.0;
            for (std::size_t i = 0; i < h.mus.size(); ++i) {
              s += h.weights[i] * std::exp(-h.mus[i]) * (1.0 + 1.0 / h.mus[i]);
            }
            return h.rate * s;
          },
          [](const GammaJumps& g) {
            return g.rate * g.shape * g.scale *
                   boost::math::gamma_q(g.shape + 1.0, 1.0 / g.scale);
          },
          [](const TabulatedJumps& t) {
            return t.rate * tab_partial_moment(t, 1.0, kInf, 1);
          },
          [](const InfiniteActivityJumps& ia) {
            if (ia.upper <= 1.0) return 0.0;
            return ia_integrate(ia, [](double x) { return x; }, 1.0, ia.upper, 1, 0.0);
          },
      },
      j);
}

void check_structure(double c, double sigma, JumpSpec& j) {
  std::ostringstream err;
  if (!std::isfinite(c)) err << "drift c must be finite; ";
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) err << "sigma must be >= 0; ";
  std::visit(
      Overloaded{
          [](NoJumps&) {},
          [&](ExponentialJumps& e) {
            if (!(e.rate > 0.0)) err << "jump rate must be > 0; ";
            if (!(e.mu > 0.0)) err << "exponential mu must be > 0; ";
          },
          [&](HyperExponentialJumps& h) {
            if (!(h.rate > 0.0)) err << "jump rate must be > 0; ";
            if (h.weights.empty() || h.weights.size() != h.mus.size()) {
              err << "hyperexponential weights and rates must have equal, nonzero length; ";
              return;
            }
            double s = 0.0;
            for (std::size_t i = 0; i < h.mus.size(); ++i) {
              if (!(h.mus[i] > 0.0)) err << "hyperexponential rates must be > 0; ";
              if (!(h.weights[i] >= 0.0)) err << "hyperexponential weights must be >= 0; ";
              s += h.weights[i];
            }
            if (std::abs(s - 1.0) > 1e-12) err << "hyperexponential weights sum to " << s << ", not 1; ";
          },
          [&](GammaJumps& g) {
            if (!(g.rate > 0.0)) err << "jump rate must be > 0; ";
            if (!(g.shape > 0.0) || !(g.scale > 0.0)) err << "gamma shape and scale must be > 0; ";
          },
          [&](TabulatedJumps& t) {
            if (!(t.rate > 0.0)) err << "jump rate must be > 0; ";
            if (t.x.size() < 2 || t.x.size() != t.density.size()) {
              err << "tabulated density needs >= 2 (x, density) pairs; ";
              return;
            }
            if (t.x.front() < 0.0) err << "tabulated support must lie in [0, inf); ";
            for (std::size_t i = 0; i < t.x.size(); ++i) {
              if (i > 0 && !(t.x[i] > t.x[i - 1])) {
                err << "tabulated x must be strictly increasing; ";
                break;
              }
              if (!(t.density[i] >= 0.0) || !std::isfinite(t.density[i])) {
                err << "tabulated density must be finite and >= 0; ";
                break;
              }
            }
            const double mass = tab_mass(t);
            if (!(mass > 0.0) || !std::isfinite(mass)) {
              err << "tabulated density must have positive finite mass; ";
              return;
            }
            for (double& d : t.density) d /= mass;
          },
          [&](InfiniteActivityJumps& ia) {
            if (!ia.density) {
              err << "infinite-activity density is missing; ";
              return;
            }
            if (!(ia.upper > ia.lower) || !std::isfinite(ia.upper)) err << "density support upper bound must be finite and above the lower cutoff; ";
            if (ia.lower < 0.0) err << "truncation point must be >= 0; ";
            if (ia.lower == 0.0) {
              // ∫₀¹ x² ν(x) dx < ∞
              const double p = local_power(ia.density, kSmallCut);
              if (p >= 3.0 - 1e-9) err << "measure violates integrability of (1 ∧ x²) near 0; ";
            }
          },
      },
      j);
  const std::string msg = err.str();
  if (!msg.empty()) throw ValidationError(msg.substr(0, msg.size() - 2));
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace

InfiniteActivityJumps tempered_stable(double kappa, double a, double beta,
                                      double upper) {
  if (!(kappa > 0.0) || !(a > 0.0 && a < 2.0) || !(beta >= 0.0)) {
    throw ValidationError("tempered-stable density needs kappa > 0, a in (0,2), beta >= 0");
  }
  if (upper <= 0.0) {
    if (beta <= 0.0) throw ValidationError("untempered stable density needs an explicit upper cutoff");
    upper = 42.0 / beta;  // e^{-42} ≈ 6e-19
  }
  InfiniteActivityJumps j;
  j.density = [kappa, a, beta](double x) {
    return x > 0.0 ? kappa * std::pow(x, -1.0 - a) * std::exp(-beta * x) : 0.0;
  };
  j.upper = upper;
  std::ostringstream label;
  label << "tempered_stable(kappa=" << kappa << ",a=" << a << ",beta=" << beta << ")";
  j.label = label.str();
  return j;
}

ModelSpec::ModelSpec(double c, double sigma, JumpSpec jumps)
    : c_(c), sigma_(sigma), jumps_(std::move(jumps)) {
  check_structure(c_, sigma_, jumps_);
  small_mean_ = small_mean_of(jumps_);
  activity_ = activity_of(jumps_);
  c0_ = c_ + small_mean_;
  mean_ = -c_ + large_mean_of(jumps_);
}

ModelSpec ModelSpec::from_c(double c, double sigma, JumpSpec jumps) {
  return ModelSpec(c, sigma, std::move(jumps));
}

ModelSpec ModelSpec::from_c0(double c0, double sigma, JumpSpec jumps) {
  check_structure(0.0, sigma, jumps);
  const double small = small_mean_of(jumps);
  if (!std::isfinite(small)) {
    throw ValidationError("c0 is undefined: the jump measure has infinite small-jump mean");
  }
  return ModelSpec(c0 - small, sigma, std::move(jumps));
}

bool ModelSpec::finite_activity() const { return std::isfinite(activity_); }

std::string ModelSpec::describe() const {
  std::ostringstream s;
  s.precision(10);
  s << "c=" << c_ << " c0=" << c0_ << " sigma=" << sigma_ << " jumps=";
  std::visit(Overloaded{
                 [&](const NoJumps&) { s << "none"; },
                 [&](const ExponentialJumps& e) {
                   s << "exponential(lambda=" << e.rate << ",mu=" << e.mu << ")";
                 },
                 [&](const HyperExponentialJumps& h) {
                   s << "hyperexponential(lambda=" << h.rate << ",n=" << h.mus.size() << ")";
                 },
                 [&](const GammaJumps& g) {
                   s << "gamma(lambda=" << g.rate << ",shape=" << g.shape
                     << ",scale=" << g.scale << ")";
                 },
                 [&](const TabulatedJumps& t) {
                   s << "tabulated(lambda=" << t.rate << ",points=" << t.x.size() << ")";
                 },
                 [&](const InfiniteActivityJumps& ia) {
                   s << ia.label << "[lower=" << ia.lower << "]";
                 },
             },
             jumps_);
  return s.str();
}

double laplace_exponent(const ModelSpec& m, double theta) {
  if (!(theta >= 0.0)) throw DomainError("laplace_exponent: theta must be >= 0, got " + fmt(theta));
  if (theta == 0.0) return 0.0;
  const double diff = 0.5 * m.sigma() * m.sigma() * theta * theta;
  if (const auto* ia = std::get_if<InfiniteActivityJumps>(&m.jumps())) {
    // Compensated form: the measure may have infinite small-jump mean.
    auto f = [theta](double x) {
      return x < 1.0 ? compensated_exp(theta * x) : std::expm1(-theta * x);
    };
    return m.c() * theta + diff +
           ia_integrate(*ia, f, 0.0, ia->upper, 2, 0.5 * theta * theta);
  }
  // Bounded-variation form with c₀ for finite-activity laws.
  const double jump = std::visit(
      Overloaded{
          [](const NoJumps&) { return 0.0; },
          [theta](const ExponentialJumps& e) { return -e.rate * theta / (e.mu + theta); },
          [theta](const HyperExponentialJumps& h) {
            double s = 0.0;
            for (std::size_t i = 0; i < h.mus.size(); ++i) {
              s += h.weights[i] * theta / (h.mus[i] + theta);
            }
            return -h.rate * s;
          },
          [theta](const GammaJumps& g) {
            return g.rate * std::expm1(-g.shape * std::log1p(g.scale * theta));
          },
          [theta](const TabulatedJumps& t) {
            return t.rate * (tab_exp_moment(t, theta, 0) - 1.0);
          },
          [](const InfiniteActivityJumps&) { return 0.0; },
      },
      m.jumps());
  return m.c0() * theta + diff + jump;
}

double laplace_exponent_derivative(const ModelSpec& m, double theta) {
  if (!(theta >= 0.0)) throw DomainError("laplace_exponent_derivative: theta must be >= 0");
  const double diff = m.sigma() * m.sigma() * theta;
  if (const auto* ia = std::get_if<InfiniteActivityJumps>(&m.jumps())) {
    auto f = [theta](double x) {
      const double e = std::exp(-theta * x);
      return x < 1.0 ? x * -std::expm1(-theta * x) : -x * e;
    };
    const double v = m.c() + diff + ia_integrate(*ia, f, 0.0, ia->upper, 2, theta);
    if (!std::isfinite(v)) throw DomainError("laplace_exponent_derivative: divergent jump integral");
    return v;
  }
  const double jump = std::visit(
      Overloaded{
          [](const NoJumps&) { return 0.0; },
          [theta](const ExponentialJumps& e) {
            const double d = e.mu + theta;
            return -e.rate * e.mu / (d * d);
          },
          [theta](const HyperExponentialJumps& h) {
            double s = 0.0;
            for (std::size_t i = 0; i < h.mus.size(); ++i) {
              const double d = h.mus[i] + theta;
              s += h.weights[i] * h.mus[i] / (d * d);
            }
            return -h.rate * s;
          },
          [theta](const GammaJumps& g) {
            return -g.rate * g.shape * g.scale *
                   std::exp(-(g.shape + 1.0) * std::log1p(g.scale * theta));
          },
          [theta](const TabulatedJumps& t) { return -t.rate * tab_exp_moment(t, theta, 1); },
          [](const InfiniteActivityJumps&) { return 0.0; },
      },
      m.jumps());
  return m.c0() + diff + jump;
}

bool is_bounded_variation(const ModelSpec& m) {
  return m.sigma() == 0.0 && std::isfinite(m.small_jump_mean());
}

ModelSpec truncate_measure(const ModelSpec& m, int n) {
  if (n <= 0) throw DomainError("truncate_measure: n must be positive, got " + std::to_string(n));
  const auto* ia = std::get_if<InfiniteActivityJumps>(&m.jumps());
  if (ia == nullptr) return m;
  InfiniteActivityJumps t = *ia;
  t.lower = std::max(ia->lower, 1.0 / n);
  if (!(t.upper > t.lower)) throw DomainError("truncate_measure: truncation point beyond the density support");
  return ModelSpec::from_c(m.c(), m.sigma(), std::move(t));
}

std::vector<Violation> validate(const ModelSpec& m) {
  std::vector<Violation> out;
  if (!(m.c() > 0.0)) {
    out.push_back({"c > 0", "expense rate c = " + fmt(m.c())});
  }
  if (!(m.mean() > 0.0)) {
    out.push_back({"E(X1) > 0", "E(X1) = -Psi'(0+) = " + fmt(m.mean()) +
                                    " (process must drift to +infinity)"});
  }
  return out;
}

std::vector<Violation> validate(const ModelSpec& m, const PolicyParams& p) {
  auto out = validate(m);
  if (!(p.q > 0.0)) out.push_back({"q > 0", "q = " + fmt(p.q)});
  if (!(p.alpha > 0.0)) out.push_back({"alpha > 0", "alpha = " + fmt(p.alpha)});
  if (is_bounded_variation(m) && !(p.alpha < m.c0())) {
    out.push_back({"alpha < c0", "alpha = " + fmt(p.alpha) + " >= c0 = c + int_0^1 y Pi(dy) = " +
                                     fmt(m.c0()) + " (admissibility for bounded variation)"});
  }
  if (p.b && !(*p.b >= 0.0)) out.push_back({"b >= 0", "b = " + fmt(*p.b)});
  return out;
}

namespace jumps {

double tail(const JumpSpec& j, double y) {
  y = std::max(y, 0.0);
  return std::visit(
      Overloaded{
          [](const NoJumps&) { return 0.0; },
          [y](const ExponentialJumps& e) { return e.rate * std::exp(-e.mu * y); },
          [y](const HyperExponentialJumps& h) {
            double s = 0.0;
            for (std::size_t i = 0; i < h.mus.size(); ++i) {
              s += h.weights[i] * std::exp(-h.mus[i] * y);
            }
            return h.rate * s;
          },
          [y](const GammaJumps& g) {
            return g.rate * boost::math::gamma_q(g.shape, y / g.scale);
          },
          [y](const TabulatedJumps& t) {
            return t.rate * tab_partial_moment(t, y, kInf, 0);
          },
          [y](const InfiniteActivityJumps& ia) {
            if (ia.lower <= 0.0 && y <= 0.0) return kInf;
            const double lo = std::max(y, ia.lower);
            if (lo >= ia.upper) return 0.0;
            return ia_integrate(ia, [](double) { return 1.0; }, lo, ia.upper, 0, 0.0);
          },
      },
      j);
}

double density(const JumpSpec& j, double y) {
  if (y <= 0.0) return 0.0;
  return std::visit(
      Overloaded{
          [](const NoJumps&) { return 0.0; },
          [y](const ExponentialJumps& e) { return e.rate * e.mu * std::exp(-e.mu * y); },
          [y](const HyperExponentialJumps& h) {
            double s = 0.0;
            for (std::size_t i = 0; i < h.mus.size(); ++i) {
              s += h.weights[i] * h.mus[i] * std::exp(-h.mus[i] * y);
            }
            return h.rate * s;
          },
          [y](const GammaJumps& g) {
            return g.rate * boost::math::gamma_p_derivative(g.shape, y / g.scale) / g.scale;
          },
          [y](const TabulatedJumps& t) {
            if (y < t.x.front() || y > t.x.back()) return 0.0;
            auto it = std::upper_bound(t.x.begin(), t.x.end(), y);
            if (it == t.x.end()) return t.rate * t.density.back();
            const std::size_t i = static_cast<std::size_t>(it - t.x.begin());
            const double w = (y - t.x[i - 1]) / (t.x[i] - t.x[i - 1]);
            return t.rate * ((1.0 - w) * t.density[i - 1] + w * t.density[i]);
          },
          [y](const InfiniteActivityJumps& ia) {
            return (y > ia.lower && y <= ia.upper) ? ia.density(y) : 0.0;
          },
      },
      j);
}

std::vector<double> breakpoints(const JumpSpec& j) {
  return std::visit(
      Overloaded{
          [](const NoJumps&) { return std::vector<double>{}; },
          [](const ExponentialJumps&) { return std::vector<double>{0.0}; },
          [](const HyperExponentialJumps&) { return std::vector<double>{0.0}; },
          [](const GammaJumps&) { return std::vector<double>{0.0}; },
          [](const TabulatedJumps& t) {
            std::vector<double> pts;
            const std::size_t stride = std::max<std::size_t>(1, t.x.size() / 32);
            for (std::size_t i = 0; i < t.x.size(); i += stride) pts.push_back(t.x[i]);
            if (pts.back() != t.x.back()) pts.push_back(t.x.back());
            return pts;
          },
          [](const InfiniteActivityJumps& ia) {
            auto pts = decade_points(std::max(ia.lower, kSmallCut), ia.upper);
            return pts;
          },
      },
      j);
}

double integrate(const JumpSpec& j, const std::function<double(double)>& f,
                 double lo, double hi) {
  if (std::holds_alternative<NoJumps>(j) || !(hi > lo)) return 0.0;
  if (const auto* ia = std::get_if<InfiniteActivityJumps>(&j); ia && ia->lower <= 0.0) {
    throw UnsupportedModelError(
        "jump integral over an infinite-activity measure; apply truncate_measure first");
  }
  if (!std::isfinite(hi)) {
    if (const auto* t = std::get_if<TabulatedJumps>(&j)) hi = t->x.back();
    if (const auto* ia = std::get_if<InfiniteActivityJumps>(&j)) hi = ia->upper;
  }
  if (!(hi > lo)) return 0.0;
  std::vector<double> pts{lo};
  for (double p : breakpoints(j)) {
    if (p > lo && p < hi) pts.push_back(p);
  }
  pts.push_back(hi);
  auto g = [&](double y) { return f(y) * density(j, y); };
  return quad::integrate_pieces(g, pts, 1e-14, 1e-11);
}

}  // namespace jumps

}  // namespace dualdiv
