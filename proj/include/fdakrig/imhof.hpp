#pragma once

#include <cstdint>
#include <span>

namespace fdakrig {

/// P(sum_k w_k xi_k^2 > x) for independent standard normals xi_k, by
/// numerical inversion of the characteristic function.
double imhofUpperTail(std::span<const double> weights, double x);

struct ImhofOptions {
  double relTol = 1e-6;
  int monteCarloSamples = 1000000;
  std::uint64_t seed = 0;
};

/// q with P(sum_k w_k xi_k^2 > q) = alpha. Equal weights use the scaled
/// chi-square quantile directly. Falls back to Monte Carlo (with a warning)
/// when the integral cannot be evaluated.
double imhofQuantile(std::span<const double> weights, double alpha, const ImhofOptions& options = {});

/// Monte Carlo quantile of the same law from `samples` draws.
double monteCarloQuantile(std::span<const double> weights, double alpha, long samples, std::uint64_t seed);

}  // namespace fdakrig
