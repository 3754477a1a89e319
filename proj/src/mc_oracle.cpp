#include "dualdiv/mc_oracle.hpp"

#include <algorithm>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <exception>
#include <sstream>

#include "dualdiv/errors.hpp"
#include "dualdiv/quadrature.hpp"

namespace dualdiv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kBlock = 4096;

double exponential(PhiloxStream& rng, double rate) { return -std::log(rng.uniform()) / rate; }

double normal(PhiloxStream& rng) {
  boost::random::normal_distribution<double> n;
  return n(rng);
}

// Past this many standard deviations a big step skips the exact floor check.
constexpr double kFloorSigmas = 9.0;

// First time Brownian motion with drift -slope and volatility sigma falls by
// a > 0; infinity when it never does.
double first_passage_time(PhiloxStream& rng, double a, double slope, double sigma) {
  const double nu = normal(rng);
  const double y = nu * nu;
  if (slope == 0.0) return a * a / (sigma * sigma * y);
  if (slope < 0.0 && rng.uniform() >= std::exp(2.0 * slope * a / (sigma * sigma))) return kInf;
  // Inverse Gaussian with mean a/|slope| and shape a²/σ² (Michael, Schucany and Haas).
  const double mu = a / std::abs(slope);
  const double lam = a * a / (sigma * sigma);
  const double x = mu + mu * mu * y / (2.0 * lam) -
                   mu / (2.0 * lam) * std::sqrt(4.0 * mu * lam * y + mu * mu * y * y);
  return rng.uniform() <= mu / (mu + x) ? x : mu * mu / x;
}

// e^{z²}erfc(z) by its asymptotic series; accurate for z ≥ 25.
double erfcx_large(double z) {
  const double r = 1.0 / (2.0 * z * z);
  return (1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r))) / (z * std::sqrt(M_PI));
}

// Expected fraction of time a Brownian bridge spends below a level, with the
// end points a and b measured from the level in units of σ√h.
double bridge_time_below(double a, double b) {
  if (a <= 0.0 && b <= 0.0 && a + b < 0.0) return 1.0 - bridge_time_below(-a, -b);
  const double f = a * b > 0.0 ? std::exp(-2.0 * a * b) : 1.0;
  const double z = (std::abs(a) + std::abs(b)) / M_SQRT2;
  // f·erfcx(z) = e^{(a-b)²/2}·erfc(z) in both sign cases.
  const double g =
      z < 25.0 ? std::exp(0.5 * (a - b) * (a - b)) * std::erfc(z) : f * erfcx_large(z);
  return std::max(0.5 * f - (a + b) * std::sqrt(M_PI / 8.0) * g, 0.0);
}

// Cells of a piecewise-linear density with an exact per-cell inverse CDF.
struct LinearCells {
  std::vector<double> x;
  std::vector<double> d;
  std::vector<double> cum;  // cumulative cell masses, normalised to 1

  double sample(PhiloxStream& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    const std::size_t k = std::min<std::size_t>(it - cum.begin(), cum.size() - 1);
    const double below = k == 0 ? 0.0 : cum[k - 1];
    const double mass = cum[k] - below;
    const double h = x[k + 1] - x[k];
    const double total = 0.5 * (d[k] + d[k + 1]) * h;
    // ∫₀ˢ (d₀ + (d₁-d₀)t/h) dt = r·total, solved in cancellation-free form.
    const double r = std::clamp((u - below) / mass, 0.0, 1.0) * total;
    const double a = (d[k + 1] - d[k]) / (2.0 * h);
    const double s = 2.0 * r / (d[k] + std::sqrt(std::max(0.0, d[k] * d[k] + 4.0 * a * r)));
    return x[k] + std::min(std::max(s, 0.0), h);
  }
};

}  // namespace

class PathSimulator::JumpSampler {
public:
  explicit JumpSampler(const ModelSpec& m) : jumps_(m.jumps()), rate_(m.activity()) {
    if (const auto* h = std::get_if<HyperExponentialJumps>(&jumps_)) {
      double s = 0.0;
      for (double w : h->weights) cum_.push_back(s += w);
      for (double& c : cum_) c /= s;
    } else if (const auto* t = std::get_if<TabulatedJumps>(&jumps_)) {
      cells_.x = t->x;
      cells_.d = t->density;
      fill_cum(cells_);
    } else if (const auto* ia = std::get_if<InfiniteActivityJumps>(&jumps_)) {
      build_ia_table(*ia);
    }
  }

  double rate() const { return rate_; }

  double operator()(PhiloxStream& rng) const {
    return std::visit(
        [&](const auto& j) -> double {
          using T = std::decay_t<decltype(j)>;
          if constexpr (std::is_same_v<T, NoJumps>) {
            return 0.0;
          } else if constexpr (std::is_same_v<T, ExponentialJumps>) {
            return exponential(rng, j.mu);
          } else if constexpr (std::is_same_v<T, HyperExponentialJumps>) {
            const double u = rng.uniform();
            const auto k = std::min<std::size_t>(
                std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin(), cum_.size() - 1);
            return exponential(rng, j.mus[k]);
          } else if constexpr (std::is_same_v<T, GammaJumps>) {
            boost::random::gamma_distribution<double> g(j.shape, j.scale);
            return g(rng);
          } else if constexpr (std::is_same_v<T, TabulatedJumps>) {
            return cells_.sample(rng);
          } else {
            return sample_ia(j, rng);
          }
        },
        jumps_);
  }

private:
  static void fill_cum(LinearCells& c) {
    double s = 0.0;
    c.cum.clear();
    for (std::size_t k = 0; k + 1 < c.x.size(); ++k) {
      s += 0.5 * (c.d[k] + c.d[k + 1]) * (c.x[k + 1] - c.x[k]);
      c.cum.push_back(s);
    }
    for (double& v : c.cum) v /= s;
  }

  // Geometric cells from the cut-off until the remaining tail mass is below
  // 1e-14 of the total; exact cell masses by quadrature.
  void build_ia_table(const InfiniteActivityJumps& ia) {
    const double hi = ia.upper > 0.0 ? ia.upper : kInf;
    double y = ia.lower;
    double s = 0.0;
    nodes_.push_back(y);
    while (y < hi && jumps::tail(jumps_, y) > 1e-14 * rate_) {
      const double next = std::min(hi, y * 1.02 + 1e-3);
      s += quad::integrate(ia.density, y, next, 1e-15, 1e-13);
      nodes_.push_back(next);
      ia_cum_.push_back(s);
      y = next;
    }
    for (double& v : ia_cum_) v /= s;
  }

  double sample_ia(const InfiniteActivityJumps& ia, PhiloxStream& rng) const {
    const double u = rng.uniform();
    const auto k = std::min<std::size_t>(
        std::upper_bound(ia_cum_.begin(), ia_cum_.end(), u) - ia_cum_.begin(), ia_cum_.size() - 1);
    const double below = k == 0 ? 0.0 : ia_cum_[k - 1];
    const double a = nodes_[k];
    const double b = nodes_[k + 1];
    const double mass = quad::gauss_legendre4(ia.density, a, b);
    const double target = std::clamp((u - below) / (ia_cum_[k] - below), 0.0, 1.0) * mass;
    double y = a + (target / mass) * (b - a);
    for (int it = 0; it < 6; ++it) {
      const double f = quad::gauss_legendre4(ia.density, a, y) - target;
      const double next = y - f / ia.density(y);
      y = std::clamp(next, a, b);
    }
    return y;
  }

  JumpSpec jumps_;
  double rate_;
  std::vector<double> cum_;
  LinearCells cells_;
  std::vector<double> nodes_;
  std::vector<double> ia_cum_;
};

RateBands RateBands::threshold(double alpha, double b) {
  if (std::isinf(b)) return {{}, {0.0}};
  return {{b}, {0.0, alpha}};
}

double RateBands::max_rate() const {
  return rates.empty() ? 0.0 : *std::max_element(rates.begin(), rates.end());
}

PathSimulator::PathSimulator(const ModelSpec& m, double q, RateBands bands, const SimConfig& cfg)
    : model_(m), q_(q), bands_(std::move(bands)), cfg_(cfg) {
  if (!model_.finite_activity()) {
    if (cfg.truncation <= 0) {
      throw UnsupportedModelError(
          "simulation needs a finite-activity jump measure; apply truncate_measure or set a "
          "truncation level");
    }
    model_ = truncate_measure(model_, cfg.truncation);
  }
  if (!(q > 0.0)) throw DomainError("simulation: q must be > 0");
  if (!(cfg.dt > 0.0)) throw DomainError("simulation: dt must be > 0");
  if (cfg.n_paths < 1) throw DomainError("simulation: n_paths must be >= 1");
  if (!(cfg.step_sigmas > 0.0)) throw DomainError("simulation: step_sigmas must be > 0");
  if (bands_.rates.size() != bands_.levels.size() + 1 ||
      !std::is_sorted(bands_.levels.begin(), bands_.levels.end())) {
    throw DomainError("simulation: rate bands need sorted levels and one more rate than levels");
  }
  for (double r : bands_.rates) {
    if (!(r >= 0.0)) throw DomainError("simulation: dividend rates must be >= 0");
  }
  if (model_.sigma() == 0.0 && !(model_.c0() > 0.0)) {
    throw DomainError("simulation: sigma = 0 needs a positive drift c0");
  }
  const double rate = bands_.max_rate();
  const double scale = rate > 0.0 ? rate / q : 1.0;
  const double tol = cfg.tail_tolerance > 0.0 ? cfg.tail_tolerance : 1e-6 * scale;
  if (!(tol < scale)) throw DomainError("simulation: tail_tolerance must be below alpha/q");
  t_max_ = std::log(scale / tol) / q;
  sampler_ = std::make_shared<JumpSampler>(model_);
}

double PathSimulator::absorb(double x, double floor, PhiloxStream& rng, double* dividends,
                             bool* hit) const {
  *dividends = 0.0;
  *hit = false;
  if (x <= floor) {
    *hit = true;
    return 0.0;
  }
  const auto& levels = bands_.levels;
  const auto& rates = bands_.rates;
  const double c0 = model_.c0();
  const double sigma = model_.sigma();
  const double lambda = sampler_->rate();
  const double q = q_;

  auto band_of = [&](double u) {
    return static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), u) -
                                    levels.begin());
  };
  auto next_jump = [&](double t) { return lambda > 0.0 ? t + exponential(rng, lambda) : kInf; };

  double t = 0.0;
  double u = x;
  double disc = 1.0;
  double div = 0.0;
  double tj = next_jump(0.0);

  if (sigma == 0.0) {
    for (;;) {
      const std::size_t i = band_of(u);
      const double lower = std::max(i == 0 ? 0.0 : levels[i - 1], floor);
      const double slope = c0 + rates[i];
      const double t_reach = t + (u - lower) / slope;
      const double t_stop = std::min(tj, t_max_);
      if (t_reach <= t_stop) {
        const double d = std::exp(-q * t_reach);
        div += rates[i] * (disc - d) / q;
        disc = d;
        t = t_reach;
        u = lower;
        if (u <= floor) {
          *hit = true;
          break;
        }
        continue;
      }
      const double d = std::exp(-q * t_stop);
      div += rates[i] * (disc - d) / q;
      disc = d;
      u -= slope * (t_stop - t);
      t = t_stop;
      if (t >= t_max_) break;
      u += (*sampler_)(rng);
      tj = next_jump(t);
    }
    *dividends = div;
    return t;
  }

  const double s2 = sigma * sigma;
  const double k = cfg_.step_sigmas;
  const double dt = cfg_.dt;
  const double disc_dt = std::exp(-q * dt);
  const double sd_dt = sigma * std::sqrt(dt);
  // Crossing probability of the bridge below the floor; 0 once it underflows
  // any uniform draw.
  auto bridge_ruin = [&](double u0, double u1, double h) {
    const double e = 2.0 * (u0 - floor) * (u1 - floor) / (s2 * h);
    return e > 40.0 ? 0.0 : std::exp(-e);
  };
  // Expected rate averaged over a Brownian bridge from u0 to u1 over time h.
  // Expected rate averaged over a Brownian bridge from u0 to u1 with
  // standard deviation sd = σ√h at the end point.
  auto bridge_rate = [&](double u0, double u1, double sd) {
    double r = rates[0];
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const double a = u0 - levels[l];
      const double b = u1 - levels[l];
      double below;
      // Crossing weight below e^{-30}.
      if (a * b > 15.0 * sd * sd) {
        below = a > 0.0 ? 0.0 : 1.0;
      } else {
        below = bridge_time_below(a / sd, b / sd);
      }
      r += (rates[l + 1] - rates[l]) * (1.0 - below);
    }
    return r;
  };

  while (t < t_max_) {
    const std::size_t i = band_of(u);
    const double band_floor = i == 0 ? 0.0 : levels[i - 1];
    const bool floor_band = band_floor <= floor;
    const double lower = std::max(band_floor, floor);
    const double upper = i < levels.size() ? levels[i] : kInf;
    // The floor is crossed exactly below, so only levels limit the step.
    const double dist = floor_band ? upper - u : std::min(u - lower, upper - u);
    const double t_stop = std::min(tj, t_max_);
    const double hmax = t_stop - t;
    const double slope = c0 + rates[i];
    const double root = (-k * sigma + std::sqrt(k * k * s2 + 4.0 * std::abs(slope) * dist)) /
                        (2.0 * std::max(std::abs(slope), 1e-300));
    const double h_big = slope == 0.0 ? std::pow(dist / (k * sigma), 2) : root * root;

    if (h_big >= std::min(dt, hmax)) {
      const double h = std::min(h_big, hmax);
      const double sd = sigma * std::sqrt(h);
      const double a = u - floor;
      double u1;
      double rate;
      if (floor_band && a <= std::max(slope, 0.0) * h + kFloorSigmas * sd) {
        const double tau = first_passage_time(rng, a, slope, sigma);
        if (tau <= h) {
          const double d = disc * std::exp(-q * tau);
          div += rates[i] * (disc - d) / q;
          disc = d;
          t += tau;
          *hit = true;
          break;
        }
        // End point conditional on staying above the floor.
        do {
          u1 = u - slope * h + sd * normal(rng);
        } while (u1 <= floor || rng.uniform() < std::exp(-2.0 * a * (u1 - floor) / (s2 * h)));
        rate = bridge_rate(u, u1, sd);
      } else {
        const double z = normal(rng);
        u1 = u - slope * h + sd * z;
        rate = bridge_rate(u, u1, sd);
        if (rate != rates[i]) {
          u1 = u - (c0 + rate) * h + sd * z;
          rate = bridge_rate(u, u1, sd);
        }
        const double p_cross = u1 <= floor ? 1.0 : bridge_ruin(u, u1, h);
        if (p_cross > 0.0 && (p_cross == 1.0 || rng.uniform() < p_cross)) {
          const double d = disc * std::exp(-q * 0.5 * h);
          div += rates[i] * (disc - d) / q;
          t += 0.5 * h;
          *hit = true;
          break;
        }
      }
      const double d = disc * std::exp(-q * h);
      div += rate * (disc - d) / q;
      disc = d;
      u = u1;
      t += h;
    } else {
      const double h = std::min(dt, hmax);
      const double sd = h == dt ? sd_dt : sigma * std::sqrt(h);
      const double z = normal(rng);
      // Predictor with the starting band's drift, corrector with the drift
      // averaged over the bridge between the predicted end points.
      double u1 = u - slope * h + sd * z;
      double rate_avg = rates[i];
      if (!levels.empty()) {
        rate_avg = bridge_rate(u, u1, sd);
        u1 = u - (c0 + rate_avg) * h + sd * z;
        rate_avg = bridge_rate(u, u1, sd);
      }
      const double d = disc * (h == dt ? disc_dt : std::exp(-q * h));
      if (u1 <= floor) {
        const double frac = (u - floor) / (u - u1);
        div += rate_avg * disc * frac * h;
        t += frac * h;
        disc *= std::exp(-q * frac * h);
        *hit = true;
        break;
      }
      const double p_cross = bridge_ruin(u, u1, h);
      if (p_cross > 0.0 && rng.uniform() < p_cross) {
        div += rate_avg * disc * 0.5 * h;
        t += 0.5 * h;
        disc *= std::exp(-q * 0.5 * h);
        *hit = true;
        break;
      }
      div += rate_avg * (disc - d) / q;
      disc = d;
      u = u1;
      t += h;
    }
    if (t >= t_max_) break;
    if (t >= tj) {
      u += (*sampler_)(rng);
      tj = next_jump(t);
    }
  }
  *dividends = div;
  return std::min(t, t_max_);
}

PathResult PathSimulator::run(double x, PhiloxStream& rng) const {
  PathResult r;
  bool hit = false;
  r.ruin_time = absorb(x, 0.0, rng, &r.discounted_dividends, &hit);
  r.ruined = hit;
  return r;
}

double PathSimulator::first_passage_discount(double x, double level, PhiloxStream& rng) const {
  double div = 0.0;
  bool hit = false;
  const double t = absorb(x, level, rng, &div, &hit);
  return hit ? std::exp(-q_ * t) : 0.0;
}

namespace {

struct Moments {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  std::uint64_t censored = 0;

  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }

  void merge(const Moments& o) {
    if (o.n == 0) return;
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
    const double d = o.mean - mean;
    const double nt = na + nb;
    mean += d * nb / nt;
    m2 += o.m2 + d * d * na * nb / nt;
    n += o.n;
    censored += o.censored;
  }
};

// f(path index) -> (value, censored); blocks of kBlock paths reduced in order.
template <class F>
Moments reduce_paths(std::uint64_t n_paths, bool parallel, F f) {
  const std::uint64_t blocks = (n_paths + kBlock - 1) / kBlock;
  std::vector<Moments> part(blocks);
  std::exception_ptr failure;
  const long nb = static_cast<long>(blocks);
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (long bi = 0; bi < nb; ++bi) {
    try {
      Moments mo;
      const std::uint64_t lo = static_cast<std::uint64_t>(bi) * kBlock;
      const std::uint64_t hi = std::min(n_paths, lo + kBlock);
      for (std::uint64_t i = lo; i < hi; ++i) {
        const auto [v, cens] = f(i);
        mo.add(v);
        mo.censored += cens ? 1 : 0;
      }
      part[bi] = mo;
    } catch (...) {
#pragma omp critical(dualdiv_mc_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  Moments total;
  for (const auto& p : part) total.merge(p);
  return total;
}

Estimate make_estimate(const Moments& mo, const SimConfig& cfg, double censoring_bound) {
  Estimate e;
  e.n_paths = mo.n;
  e.seed = cfg.seed;
  e.mean = mo.mean;
  e.std_error = mo.n > 1 ? std::sqrt(mo.m2 / static_cast<double>(mo.n - 1) /
                                     static_cast<double>(mo.n))
                         : 0.0;
  e.ci_low = e.mean - 2.576 * e.std_error;
  e.ci_high = e.mean + 2.576 * e.std_error;
  e.censoring_bound = censoring_bound;
  e.censored_paths = mo.censored;
  return e;
}

double policy_b(const PolicyParams& p) {
  if (!p.b) throw DomainError("simulation: policy needs a threshold b");
  if (!(*p.b >= 0.0)) throw DomainError("simulation: b must be >= 0");
  return *p.b;
}

Estimate estimate_impl(const ModelSpec& m, double q, const RateBands& bands, double x,
                       const SimConfig& cfg, bool parallel) {
  if (!(x >= 0.0)) throw DomainError("simulation: initial surplus must be >= 0");
  const PathSimulator sim(m, q, bands, cfg);
  const Moments mo = reduce_paths(cfg.n_paths, parallel, [&](std::uint64_t i) {
    PhiloxStream rng(cfg.seed, i);
    const PathResult r = sim.run(x, rng);
    return std::pair<double, bool>{r.discounted_dividends, !r.ruined && x > 0.0};
  });
  return make_estimate(mo, cfg, std::exp(-q * sim.horizon()) * bands.max_rate() / q);
}

}  // namespace

PathResult simulate_path(const ModelSpec& m, const PolicyParams& p, double x, PhiloxStream& rng,
                         const SimConfig& cfg) {
  const PathSimulator sim(m, p.q, RateBands::threshold(p.alpha, policy_b(p)), cfg);
  return sim.run(x, rng);
}

Estimate estimate_value(const ModelSpec& m, const PolicyParams& p, double x,
                        const SimConfig& cfg) {
  return estimate_impl(m, p.q, RateBands::threshold(p.alpha, policy_b(p)), x, cfg, cfg.parallel);
}

Estimate estimate_value_serial(const ModelSpec& m, const PolicyParams& p, double x,
                               const SimConfig& cfg) {
  return estimate_impl(m, p.q, RateBands::threshold(p.alpha, policy_b(p)), x, cfg, false);
}

Estimate estimate_band_value(const ModelSpec& m, double q, const RateBands& bands, double x,
                             const SimConfig& cfg) {
  return estimate_impl(m, q, bands, x, cfg, cfg.parallel);
}

ThresholdScan mc_threshold_scan(const ModelSpec& m, double q, double alpha, double x,
                                const std::vector<double>& b_grid, const SimConfig& cfg) {
  if (b_grid.empty()) throw DomainError("mc_threshold_scan: empty b grid");
  ThresholdScan s;
  s.b = b_grid;
  for (double b : b_grid) {
    s.estimates.push_back(estimate_value(m, PolicyParams{q, alpha, b}, x, cfg));
  }
  for (std::size_t i = 1; i < s.estimates.size(); ++i) {
    if (s.estimates[i].mean > s.estimates[s.argmax].mean) s.argmax = i;
  }
  return s;
}

Estimate estimate_first_passage(const ModelSpec& m, double q, double alpha, double b, double x,
                                const SimConfig& cfg) {
  if (!(x > b)) throw DomainError("estimate_first_passage: need x > b");
  const PathSimulator sim(m, q, RateBands::threshold(alpha, b), cfg);
  const Moments mo = reduce_paths(cfg.n_paths, cfg.parallel, [&](std::uint64_t i) {
    PhiloxStream rng(cfg.seed, i);
    const double v = sim.first_passage_discount(x, b, rng);
    return std::pair<double, bool>{v, v == 0.0};
  });
  return make_estimate(mo, cfg, std::exp(-q * sim.horizon()));
}

}  // namespace dualdiv
