#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <span>
#include <vector>

namespace fdakrig {

inline constexpr double kPressureMin = 0.0;
inline constexpr double kPressureMax = 2000.0;

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Nonzero basis values at a single point: `values[r]` belongs to basis
/// function `first + r`, r < order.
struct BasisRow {
  int first = 0;
  std::array<double, 8> values{};
};

/// Clamped B-spline basis over an ascending breakpoint sequence.
///
/// With `b` breakpoints and order `k` (4 = cubic) the knot vector repeats each
/// boundary breakpoint `k` times, giving `b + k - 2` basis functions. The
/// object is immutable after construction and safe to share across threads.
class BasisSystem {
 public:
  BasisSystem(std::vector<double> breakpoints, int order = 4);

  /// `count` equispaced breakpoints over [lo, hi].
  static BasisSystem equispaced(int count, int order = 4, double lo = kPressureMin,
                                double hi = kPressureMax);

  int order() const { return order_; }
  int size() const { return n_basis_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& knots() const { return knots_; }
  double lower() const { return breakpoints_.front(); }
  double upper() const { return breakpoints_.back(); }

  /// Nonzero values of the `deriv`-th derivative at p. Throws DomainError
  /// outside [lower, upper].
  BasisRow evalRow(double p, int deriv = 0) const;

  /// n_points x n_basis sparse evaluation matrix.
  RowSparse eval(std::span<const double> pressures, int deriv = 0) const;

  /// Dense version of eval, convenient for small problems.
  Eigen::MatrixXd evalDense(std::span<const double> pressures, int deriv = 0) const;

  /// Gram matrix of the `deriv`-th derivatives, exact Gauss-Legendre per
  /// breakpoint interval. Symmetric, banded with bandwidth order-1.
  Eigen::MatrixXd gram(int deriv) const;

  /// Entry k = integral of basis function k over [lo, hi].
  Eigen::VectorXd integralVector(double lo, double hi) const;

  /// L2 projection of f onto the spline space (Gauss rule with `points`
  /// nodes per breakpoint interval).
  Eigen::VectorXd project(const std::function<double(double)>& f, int points = 8) const;

  /// Evaluates the spline with coefficient vector `coef`.
  double evalFunction(const Eigen::Ref<const Eigen::VectorXd>& coef, double p,
                      int deriv = 0) const;

  bool operator==(const BasisSystem& other) const {
    return order_ == other.order_ && breakpoints_ == other.breakpoints_;
  }

 private:
  int findSpan(double p) const;

  int order_;
  int n_basis_;
  std::vector<double> breakpoints_;
  std::vector<double> knots_;
};

}  // namespace fdakrig
