#pragma once

#include <string>
#include <vector>

#include "dualdiv/scale_fn.hpp"

namespace dualdiv {

struct ThresholdSolverOptions {
  /// Points of the sign-change pre-scan on [0, bracket bound].
  int prescan_points = 100;
  /// Largest bracket bound tried (also capped by the certified range).
  double max_bracket = 1e6;
  /// Bisection stops once the bracket is narrower than this.
  double tolerance = 1e-12;
};

struct OptimalPolicy {
  double b_star = 0.0;
  double phi1_q = 0.0;
  /// Φ₁(q)·α/q <= 1, in which case b* = 0.
  bool degenerate = false;
  double value_at_bstar = 0.0;

  // Solver trace. Empty bracket for the degenerate case.
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double g_lo = 0.0;
  double g_hi = 0.0;
  int bisection_steps = 0;
  /// Sign changes of g(b) = V(b,b) - α/q + 1/Φ₁ seen by the pre-scan.
  int prescan_sign_changes = 0;
  std::vector<std::string> warnings;
};

/// b* from V(b*,b*) = α/q - 1/Φ₁(q). Throws NumericalError if g has no sign
/// change up to the bracket cap.
OptimalPolicy optimal_threshold(const ScaleEvaluator& e, double alpha,
                                const ThresholdSolverOptions& opts = {});

/// V(x, b*) and its derivatives in the closed forms that hold at b*.
class OptimalValue {
public:
  OptimalValue(const ScaleEvaluator& e, double alpha, const OptimalPolicy& p);
  OptimalValue(const ScaleEvaluator& e, double alpha);

  const OptimalPolicy& policy() const { return policy_; }
  double alpha() const { return alpha_; }

  double value(double x) const;
  /// 1 at x = b*.
  double derivative(double x) const;
  /// At x = b* the left limit.
  double second_derivative(double x) const;

private:
  const ScaleEvaluator* e_;
  double alpha_;
  OptimalPolicy policy_;
  ExpWeightedIntegrals ints_;
};

double optimal_value(const ScaleEvaluator& e, double alpha, double x);
double optimal_value_derivative(const ScaleEvaluator& e, double alpha, double x);

struct ConcavityReport {
  double b_star = 0.0;
  std::vector<double> x;
  std::vector<double> second_derivative;
  /// V'' < 0 at every grid point.
  bool concave = false;
  double v2_left = 0.0;   // V''(b*-)
  double v2_right = 0.0;  // V''(b*+)
  double gap = 0.0;       // V''(b*+) - V''(b*-)
  double gap_expected = 0.0;  // αΦ₁W^(q)(0+)
};

/// Requires b* > 0. `points` interior grid points of (0, b*).
ConcavityReport concavity_report(const ScaleEvaluator& e, double alpha, int points = 50);

struct HJBReport {
  std::vector<double> x;
  std::vector<double> residual;
  /// Maximising dividend rate, 0 or α.
  std::vector<double> rate;
  double max_abs_residual = 0.0;
  /// rate is 0 below b* and α above it at every grid point.
  bool rate_matches_threshold = false;
};

/// ΓV - qV + max(0, α(1 - V')) for V = V(·, b*). Grid must avoid 0 and b*;
/// the jump measure must have finite activity.
HJBReport hjb_verify(const ScaleEvaluator& e, double alpha, const OptimalPolicy& p,
                     const std::vector<double>& xs);

}  // namespace dualdiv
