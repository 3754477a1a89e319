#pragma once

#include <complex>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dualdiv/levy_model.hpp"

namespace dualdiv {

enum class ScaleMethod {
  PartialFractions,  // rational transform, W = Σ Aᵢ e^{ρᵢx}
  RenewalEquation,   // Volterra equation for W solved on a grid
};

std::string to_string(ScaleMethod m);

struct ScaleOptions {
  /// Grid extent for the renewal method (rounded up to whole cells).
  double x_max = 40.0;
  /// Coarse grid step of the renewal method (the finest level uses step/4).
  /// Truncated measures refine it so the cut-off lies on a node.
  double grid_step = 1.0 / 64.0;
  /// Skip partial fractions even when the transform is rational.
  bool force_numerical = false;
  /// Largest accepted Laplace round-trip relative error.
  double max_certificate = 1e-6;
};

struct ExpTerm {
  std::complex<double> amplitude;
  std::complex<double> rate;
};

struct ScaleTriple {
  double w = 0.0;
  double z = 1.0;
  double zbar = 0.0;
};

/// Φ(q) = sup{θ ≥ 0 : Ψ(θ) = q}.
double phi(const ModelSpec& m, double q);
/// Φ₁(q) = sup{θ ≥ 0 : Ψ(θ) + αθ = q}.
double phi1(const ModelSpec& m, double q, double alpha);

/// W^(q), Z^(q), Z̄^(q) for one (model, q) pair. Immutable after construction
/// and cheap to copy (tables are shared).
class ScaleEvaluator {
public:
  const ModelSpec& model() const { return model_; }
  double q() const { return q_; }
  double phi_q() const { return phi_q_; }
  ScaleMethod method() const { return method_; }
  std::span<const ExpTerm> terms() const { return terms_; }
  /// Largest relative Laplace round-trip error at θ = Φ(q) + {1/2, 1, 2, 4}.
  double certificate() const { return certificate_; }
  /// W is available on [0, certified_range()].
  double certified_range() const { return range_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  double w(double x) const;
  double w_prime(double x) const;
  double z(double x) const;
  double zbar(double x) const;
  ScaleTriple triple(double x) const;

  /// W^(q)(0+).
  double w_zero() const;

  /// (∫₀ᵘ W(y)e^{-φy}dy, ∫₀ᵘ Z(y)e^{-φy}dy).
  std::pair<double, double> exp_weighted_integrals(double phi, double u) const;

  /// ∫₀^∞ e^{-θx} W(x) dx computed from the stored representation.
  double laplace_transform(double theta) const;

private:
  friend ScaleEvaluator build_evaluator(const ModelSpec&, double, const ScaleOptions&);
  friend class ExpWeightedIntegrals;
  ScaleEvaluator(ModelSpec m, double q, double phi_q)
      : model_(std::move(m)), q_(q), phi_q_(phi_q) {}

  struct Table;

  void check_range(double x) const;
  double table_w(double x) const;
  double table_w_prime(double x) const;

  ModelSpec model_;
  double q_;
  double phi_q_;
  ScaleMethod method_ = ScaleMethod::PartialFractions;
  std::vector<ExpTerm> terms_;
  std::shared_ptr<const Table> table_;
  double certificate_ = 0.0;
  double range_ = 0.0;
  std::vector<std::string> warnings_;
};

ScaleEvaluator build_evaluator(const ModelSpec& m, double q,
                               const ScaleOptions& opts = {});

/// `exp_weighted_integrals` for a fixed φ with node prefix sums cached, so
/// repeated queries on a renewal-method evaluator cost O(1) cells each.
/// Holds a pointer to the evaluator, which must outlive it.
class ExpWeightedIntegrals {
public:
  ExpWeightedIntegrals(const ScaleEvaluator& e, double phi);
  std::pair<double, double> operator()(double u) const;
  double phi() const { return phi_; }

private:
  const ScaleEvaluator* e_;
  double phi_;
  double step_ = 0.0;
  std::vector<double> prefix_;  // ∫₀^{x_i} W e^{-φy} dy at renewal nodes
};

}  // namespace dualdiv
