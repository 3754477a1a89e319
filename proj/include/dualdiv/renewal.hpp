#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace dualdiv::renewal {

// Scale-function renewal equation
//
//   ½σ² W'(x) + c₀ W(x) = 1 + ∫₀ˣ W(x-y) g(y) dy,   g(y) = q + Π((y,∞)),
//
// with W(0) = 1/c₀ when σ = 0 and W(0) = 0 otherwise. The unknown is the
// tilted function u(x) = e^{-tilt·x} W(x), and the convolution is discretised
// by product integration: u is interpolated linearly on each cell while the
// tilted kernel g̃(y) = e^{-tilt·y} g(y) enters only through its exact moments
//
//   rise[k] = ∫_{cell k} g̃(y) (y - y_k)/h dy,
//   fall[k] = ∫_{cell k} g̃(y) (y_{k+1} - y)/h dy.
//
// Steep or kinked kernels are therefore handled by the quadrature that
// produced the moments, not by the grid.
struct Problem {
  double c0 = 0.0;
  double sigma = 0.0;
  double tilt = 0.0;
  double step = 0.0;
  std::span<const double> rise;
  std::span<const double> fall;
};

/// Cell moments (rise, fall) of the tilted kernel for `cells` cells of width h.
using MomentFn = std::function<std::pair<std::vector<double>, std::vector<double>>(
    double h, std::size_t cells)>;

/// u at the cells.size() + 1 grid nodes; O(n²). Reference version.
std::vector<double> solve_serial(const Problem& p);

/// Same scheme with the convolution sums evaluated by an OpenMP reduction.
/// Agrees with `solve_serial` up to floating-point reassociation.
std::vector<double> solve(const Problem& p);

/// Solves with steps h, h/2 and h/4 and Romberg-combines at the coarse nodes.
std::vector<double> solve_extrapolated(double c0, double sigma, double tilt, double step,
                                       std::size_t cells, const MomentFn& moments,
                                       bool parallel = true);

}  // namespace dualdiv::renewal
