#pragma once

#include <cmath>

#include "dualdiv/levy_model.hpp"

namespace fixtures {

inline constexpr double kQ = 0.1;
inline constexpr double kAlpha = 0.3;

/// σ = 0, c₀ = 0.5, exponential jumps with λ = 1, μ = 1.
inline dualdiv::ModelSpec m1() {
  return dualdiv::ModelSpec::from_c0(0.5, 0.0, dualdiv::ExponentialJumps{1.0, 1.0});
}

/// M1 with σ = 0.4.
inline dualdiv::ModelSpec m2() {
  return dualdiv::ModelSpec::from_c0(0.5, 0.4, dualdiv::ExponentialJumps{1.0, 1.0});
}

/// Tempered stable, index 1/2: ν(x) = κ x^{-3/2} e^{-βx}, with closed-form Ψ.
inline constexpr double kKappa = 0.5;
inline constexpr double kBeta = 0.25;
inline constexpr double kTsC0 = 1.2;

inline dualdiv::ModelSpec tempered() {
  // c₀ is only formal here: c = c₀ - ∫₀¹ x ν(x) dx.
  const double small = kKappa * std::sqrt(M_PI / kBeta) * std::erf(std::sqrt(kBeta));
  return dualdiv::ModelSpec::from_c(kTsC0 - small, 0.0,
                                    dualdiv::tempered_stable(kKappa, 0.5, kBeta));
}

/// Ψ of `tempered()`: c₀θ - 2√π κ (√(β+θ) - √β).
inline double tempered_psi(double theta) {
  return kTsC0 * theta - 2.0 * std::sqrt(M_PI) * kKappa *
                             (std::sqrt(kBeta + theta) - std::sqrt(kBeta));
}

/// Largest root of a θ² + b θ + c.
inline double quad_root(double a, double b, double c) {
  return (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
}

}  // namespace fixtures
