#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "dualdiv/levy_model.hpp"
#include "dualdiv/rng.hpp"

namespace dualdiv {

struct SimConfig {
  std::uint64_t n_paths = 100000;
  std::uint64_t seed = 0x5DEECE66DULL;
  /// Euler step near levels when σ > 0.
  double dt = 1e-3;
  /// Paths are censored at T_max with e^{-q T_max}·(max rate)/q = tail_tolerance.
  /// Non-positive selects 1e-6·α/q.
  double tail_tolerance = 0.0;
  /// Applied through truncate_measure when the model has infinite activity.
  int truncation = 0;
  /// σ > 0: a step of length h is taken in one Gaussian increment when
  /// drift·h + step_sigmas·σ√h stays below the distance to the nearest level.
  double step_sigmas = 4.0;
  bool parallel = true;
};

/// Piecewise-constant dividend rate: rates[i] applies while the surplus lies
/// in (levels[i-1], levels[i]], with levels[-1] = 0 and levels[k] = ∞.
struct RateBands {
  std::vector<double> levels;
  std::vector<double> rates;

  /// Rate α strictly above b, nothing at or below; b = ∞ pays nothing.
  static RateBands threshold(double alpha, double b);
  double max_rate() const;
};

struct PathResult {
  double discounted_dividends = 0.0;
  double ruin_time = 0.0;
  bool ruined = false;
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;   // mean - 2.576 SE
  double ci_high = 0.0;  // mean + 2.576 SE
  std::uint64_t n_paths = 0;
  std::uint64_t seed = 0;
  /// Largest possible contribution lost to censoring, e^{-q T_max}·rate/q.
  double censoring_bound = 0.0;
  std::uint64_t censored_paths = 0;
};

/// Controlled surplus simulator. σ = 0 is event-driven and exact between
/// jumps; σ > 0 mixes large Gaussian steps away from levels with Euler steps
/// of length dt near them, where ruin and time spent above a level are
/// handled through the Brownian bridge between the step end points.
class PathSimulator {
public:
  PathSimulator(const ModelSpec& m, double q, RateBands bands, const SimConfig& cfg);

  /// Dividends α∫e^{-qt}(rate)dt until ruin (U ≤ 0) or T_max.
  PathResult run(double x, PhiloxStream& rng) const;
  /// e^{-qT} for the first time T the surplus falls to `level` (0 if it
  /// does not happen before T_max).
  double first_passage_discount(double x, double level, PhiloxStream& rng) const;

  double horizon() const { return t_max_; }
  const ModelSpec& model() const { return model_; }

  class JumpSampler;

private:
  double absorb(double x, double floor, PhiloxStream& rng, double* dividends, bool* hit) const;

  ModelSpec model_;
  double q_;
  RateBands bands_;
  SimConfig cfg_;
  double t_max_;
  std::shared_ptr<const JumpSampler> sampler_;
};

PathResult simulate_path(const ModelSpec& m, const PolicyParams& p, double x, PhiloxStream& rng,
                         const SimConfig& cfg = {});

/// Mean over cfg.n_paths paths; path i uses PhiloxStream(cfg.seed, i), and
/// sums are reduced in fixed blocks in path order, so the result does not
/// depend on the thread count.
Estimate estimate_value(const ModelSpec& m, const PolicyParams& p, double x,
                        const SimConfig& cfg = {});
Estimate estimate_band_value(const ModelSpec& m, double q, const RateBands& bands, double x,
                             const SimConfig& cfg = {});

/// Single-threaded reference for estimate_value.
Estimate estimate_value_serial(const ModelSpec& m, const PolicyParams& p, double x,
                               const SimConfig& cfg = {});

struct ThresholdScan {
  std::vector<double> b;
  std::vector<Estimate> estimates;
  std::size_t argmax = 0;
};

/// Common random numbers: path i uses the same stream for every b.
ThresholdScan mc_threshold_scan(const ModelSpec& m, double q, double alpha, double x,
                                const std::vector<double>& b_grid, const SimConfig& cfg = {});

/// E_x[e^{-q T}], T the first time the surplus paying α above `b` falls to b,
/// for x > b.
Estimate estimate_first_passage(const ModelSpec& m, double q, double alpha, double b, double x,
                                const SimConfig& cfg = {});

}  // namespace dualdiv
