#pragma once

#include <functional>
#include <memory>

#include "fdakrig/sparse_ldl.hpp"

namespace fdakrig {

/// Penalized normal equations (G + a P) x = b over a fixed sparsity pattern.
///
/// The union pattern of G and P is analyzed once; every solve only refactors
/// values. Solves are carried out on the Jacobi-scaled system so the pivot
/// tolerance is applied to a matrix with unit diagonal.
class PenalizedSystem {
 public:
  PenalizedSystem(const SparseSymmetric& G, const SparseSymmetric& P,
                  Ordering ordering = Ordering::MinimumDegree);

  int size() const { return static_cast<int>(g_.rows()); }
  /// G and P stored on the common pattern.
  SparseSymmetric gram() const { return SparseSymmetric::fromLower(g_); }
  SparseSymmetric penalty() const { return SparseSymmetric::fromLower(p_); }
  SparseSymmetric combined(double a) const;

  struct Solution {
    Eigen::VectorXd coef;
    double trace = 0.0;  // tr((G + aP)^{-1} G), when requested
  };
  Solution solve(double a, const Eigen::VectorXd& rhs, bool withTrace = true) const;

 private:
  ColSparse g_;
  ColSparse p_;
  std::shared_ptr<const LdlSymbolic> symbolic_;
};

struct ScalarSearchResult {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Brent minimization of f(a) over log(a) in [log lo, log hi]. Evaluations
/// that throw a numerical error count as +huge.
ScalarSearchResult minimizeOverLogScale(const std::function<double(double)>& f, double lo,
                                        double hi, double relTol = 1e-3, int maxEvals = 30);

}  // namespace fdakrig
