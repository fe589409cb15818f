#pragma once

#include <vector>

namespace fdakrig {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule, exact for polynomials of degree 2n-1.
GaussRule gaussLegendre(int n);

}  // namespace fdakrig
