#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "dualdiv/levy_model.hpp"
#include "dualdiv/scale_fn.hpp"

namespace dualdiv {

/// A(b), B(b), C(b) and V(b,b) = -(B + C)/A.
struct ThresholdCoefficients {
  double a = 1.0;
  double b_coef = 0.0;
  double c_coef = 0.0;
  double v_bb = 0.0;
};

/// Two algebraically equivalent assemblies of V(x,b) below the threshold.
enum class ValueForm {
  /// V(b,b)·Zθ(b-x) + (α/q)e^{Φ₁(b-x)}[(q - αΦ₁)I_W - Φ₁I_Z].
  Coefficients,
  /// (α/q)[Z(b-x) - Z(b)Zθ(b-x)/Zθ(b)], Zθ(z) = e^{Φ₁z}(1 + αΦ₁I_W(z)).
  Compact,
};

/// (∫₀ᵘ W e^{-φ₁z}dz, ∫₀ᵘ Z e^{-φ₁z}dz).
std::pair<double, double> exp_weighted_integrals(const ScaleEvaluator& e, double phi1, double u);

ThresholdCoefficients coefficients(const ScaleEvaluator& e, double alpha, double b);

/// V(x,b) and its x-derivatives for one threshold strategy. Keeps a pointer
/// to the evaluator, which must outlive it.
class ThresholdValue {
public:
  ThresholdValue(const ScaleEvaluator& e, double alpha, double b);

  double alpha() const { return alpha_; }
  double b() const { return b_; }
  double phi1() const { return phi1_; }
  const ThresholdCoefficients& coefficients() const { return coef_; }
  const ScaleEvaluator& evaluator() const { return *e_; }

  /// V(x,b); 0 for x <= 0. Throws NumericalError if the result leaves
  /// [0, α/q] by more than 1e-8.
  double value(double x, ValueForm form = ValueForm::Coefficients) const;
  /// ∂V/∂x; at x = b the right derivative.
  double derivative(double x) const;
  /// ∂²V/∂x²; at x = b the right limit. Uses W' below the threshold.
  double second_derivative(double x) const;
  /// Left limits of V' and V'' at b.
  double derivative_left_of_b() const;
  double second_derivative_left_of_b() const;

private:
  double zeta(double z, double iw) const;

  const ScaleEvaluator* e_;
  double alpha_;
  double b_;
  double phi1_;
  ExpWeightedIntegrals ints_;
  ThresholdCoefficients coef_;
  double ratio_ = 0.0;  // Z(b)/Zθ(b) = 1 - qV(b,b)/α
};

double value(const ScaleEvaluator& e, double alpha, double b, double x,
             ValueForm form = ValueForm::Coefficients);

/// Limit of V(x,b) as α → ∞ (barrier strategy at b), for 0 <= x <= b.
double barrier_value(const ScaleEvaluator& e, double b, double x);

struct BoundaryReport {
  double b = 0.0;
  double h = 0.0;
  bool zero_volatility = false;
  double v_b = 0.0;
  /// |V(b+h) - V(b-h)|.
  double continuity_residual = 0.0;
  /// Richardson-extrapolated one-sided difference quotients.
  double dv_left = 0.0;
  double dv_right = 0.0;
  double dv_left_analytic = 0.0;
  double dv_right_analytic = 0.0;
  /// σ = 0: |(c₀+α)V'(b+) - c₀V'(b-) - α|; σ > 0: |V'(b+) - V'(b-)|.
  double derivative_residual = 0.0;
  double derivative_residual_analytic = 0.0;
};

BoundaryReport boundary_report(const ScaleEvaluator& e, double alpha, double b,
                               double h = 1e-6);

/// Generator residual: (Γ - q)V below b, (Γ - q)V - αV' + α above b.
/// Requires a finite-activity jump measure.
double ide_residual(const ThresholdValue& v, double x);
double ide_residual(const ScaleEvaluator& e, double alpha, double b, double x);

/// ∫ (f(x+y) - f(x)) Π(dy), split where f has a kink.
double jump_integral(const ModelSpec& m, const std::function<double(double)>& f, double x,
                     double kink = -1.0);

struct ValuationGrid {
  double b = 0.0;
  PolicyParams params;
  std::vector<double> x;
  std::vector<double> v;
  std::vector<double> v_prime;
};

/// V and V' on `xs`; parallel over points, output in input order.
ValuationGrid valuation_grid(const ScaleEvaluator& e, double alpha, double b,
                             const std::vector<double>& xs);

}  // namespace dualdiv
