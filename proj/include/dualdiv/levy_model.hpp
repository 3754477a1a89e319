#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dualdiv {

// Jump laws. Finite-activity variants carry the intensity `rate` (λ = Π(0,∞))
// together with a probability law for the jump size, so Π(dx) = λ F(dx).

struct NoJumps {};

struct ExponentialJumps {
  double rate = 0.0;
  double mu = 1.0;  // inverse mean jump size
};

struct HyperExponentialJumps {
  double rate = 0.0;
  std::vector<double> weights;
  std::vector<double> mus;
};

struct GammaJumps {
  double rate = 0.0;
  double shape = 1.0;
  double scale = 1.0;
};

/// Piecewise-linear jump-size density on the grid `x`, zero outside
/// [x.front(), x.back()]. The density is renormalised to unit mass on
/// construction of the owning ModelSpec.
struct TabulatedJumps {
  double rate = 0.0;
  std::vector<double> x;
  std::vector<double> density;
};

/// Lévy density ν with ∫(1∧x²)ν(x)dx < ∞, possibly of infinite mass near 0.
/// `lower > 0` restricts the measure to (lower, ∞), which makes it finite.
/// ν is taken to vanish beyond `upper`.
struct InfiniteActivityJumps {
  std::function<double(double)> density;
  double lower = 0.0;
  double upper = 0.0;
  std::string label;
};

using JumpSpec = std::variant<NoJumps, ExponentialJumps, HyperExponentialJumps,
                              GammaJumps, TabulatedJumps, InfiniteActivityJumps>;

/// ν(x) = κ x^{-1-a} e^{-βx} restricted to (0, upper]; a ∈ (0, 2).
InfiniteActivityJumps tempered_stable(double kappa, double a, double beta,
                                      double upper = 0.0);

/// Lévy triplet (c, σ, Π) of a spectrally positive process
/// X_t = -c t + σ B_t + J_t. The bounded-variation drift
/// c₀ = c + ∫₀¹ x Π(dx) is computed once at construction.
class ModelSpec {
public:
  static ModelSpec from_c(double c, double sigma, JumpSpec jumps);
  /// Convenience for finite-variation jump parts: solves c from c₀.
  static ModelSpec from_c0(double c0, double sigma, JumpSpec jumps);

  double c() const { return c_; }
  double sigma() const { return sigma_; }
  const JumpSpec& jumps() const { return jumps_; }

  /// c + ∫₀¹ x Π(dx); +∞ when the small-jump mean diverges.
  double c0() const { return c0_; }
  /// Π(0,∞); +∞ for untruncated infinite-activity measures.
  double activity() const { return activity_; }
  bool finite_activity() const;
  /// E(X₁) = -c + ∫₁^∞ y Π(dy).
  double mean() const { return mean_; }
  /// ∫₀¹ x Π(dx), possibly +∞.
  double small_jump_mean() const { return small_mean_; }

  std::string describe() const;

private:
  ModelSpec(double c, double sigma, JumpSpec jumps);

  double c_;
  double sigma_;
  JumpSpec jumps_;
  double c0_ = 0.0;
  double activity_ = 0.0;
  double mean_ = 0.0;
  double small_mean_ = 0.0;
};

struct PolicyParams {
  double q = 0.0;
  double alpha = 0.0;
  std::optional<double> b;
};

struct Violation {
  std::string condition;
  std::string detail;
};

/// Ψ(θ) = cθ + ½σ²θ² + ∫(e^{-θx} - 1 + θx1_{x<1}) Π(dx), θ ≥ 0.
double laplace_exponent(const ModelSpec& m, double theta);
/// Ψ'(θ); at θ = 0 this is -E(X₁) and requires ∫₁^∞ yΠ(dy) < ∞.
double laplace_exponent_derivative(const ModelSpec& m, double theta);

bool is_bounded_variation(const ModelSpec& m);

/// Π_n(dx) = Π(dx) 1_{(1/n,∞)}(x) with c kept fixed. Identity for
/// finite-activity models.
ModelSpec truncate_measure(const ModelSpec& m, int n);

/// Empty iff the (model, policy) pair is admissible.
std::vector<Violation> validate(const ModelSpec& m, const PolicyParams& p);
/// Model-only checks (drift condition, c > 0).
std::vector<Violation> validate(const ModelSpec& m);

// Measure-level helpers for finite-activity jump laws, shared by the scale
// function solver, the generator residuals and the simulator.
namespace jumps {

/// Π((y, ∞)) for y ≥ 0.
double tail(const JumpSpec& j, double y);
/// Lévy density π(y) with Π(dy) = π(y) dy.
double density(const JumpSpec& j, double y);
/// Points where the density is not smooth (support ends, table nodes).
std::vector<double> breakpoints(const JumpSpec& j);
/// ∫_{lo}^{hi} f(y) Π(dy), hi may be +∞.
double integrate(const JumpSpec& j, const std::function<double(double)>& f,
                 double lo, double hi);

}  // namespace jumps

}  // namespace dualdiv
