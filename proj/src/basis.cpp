#include "fdakrig/basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fdakrig/errors.hpp"
#include "fdakrig/quadrature.hpp"

namespace fdakrig {

BasisSystem::BasisSystem(std::vector<double> breakpoints, int order)
    : order_(order), breakpoints_(std::move(breakpoints)) {
  if (order_ < 2 || order_ > 8) throw ArgumentError("BasisSystem: order must be in [2, 8]");
  if (breakpoints_.size() < 2) throw ArgumentError("BasisSystem: need at least 2 breakpoints");
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i] > breakpoints_[i - 1]))
      throw ArgumentError("BasisSystem: breakpoints must be strictly increasing");
  }
  n_basis_ = static_cast<int>(breakpoints_.size()) + order_ - 2;
  knots_.reserve(n_basis_ + order_);
  for (int i = 0; i < order_; ++i) knots_.push_back(breakpoints_.front());
  for (std::size_t i = 1; i + 1 < breakpoints_.size(); ++i) knots_.push_back(breakpoints_[i]);
  for (int i = 0; i < order_; ++i) knots_.push_back(breakpoints_.back());
}

BasisSystem BasisSystem::equispaced(int count, int order, double lo, double hi) {
  if (count < 2) throw ArgumentError("BasisSystem::equispaced: count must be >= 2");
  std::vector<double> bp(count);
  for (int i = 0; i < count; ++i) bp[i] = lo + (hi - lo) * i / (count - 1);
  bp.back() = hi;
  return BasisSystem(std::move(bp), order);
}

int BasisSystem::findSpan(double p) const {
  const int degree = order_ - 1;
  if (p >= upper()) return n_basis_ - 1;
  // first knot strictly greater than p, within the non-degenerate range
  auto it = std::upper_bound(knots_.begin() + degree, knots_.begin() + n_basis_ + 1, p);
  return static_cast<int>(it - knots_.begin()) - 1;
}

BasisRow BasisSystem::evalRow(double p, int deriv) const {
  if (!(p >= lower() && p <= upper())) {
    std::ostringstream os;
    os << "pressure " << p << " outside basis domain [" << lower() << ", " << upper() << "]";
    throw DomainError(os.str());
  }
  if (deriv < 0) throw ArgumentError("evalRow: negative derivative order");
  const int degree = order_ - 1;
  const int span = findSpan(p);
  BasisRow row;
  row.first = span - degree;
  if (deriv > degree) return row;

  // Piegl & Tiller A2.3: all nonzero basis function derivatives at p.
  double ndu[8][8];
  double left[8], right[8];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = p - knots_[span + 1 - j];
    right[j] = knots_[span + j] - p;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  if (deriv == 0) {
    for (int j = 0; j <= degree; ++j) row.values[j] = ndu[j][degree];
    return row;
  }
  double a[2][8];
  for (int r = 0; r <= degree; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    double d = 0.0;
    for (int k = 1; k <= deriv; ++k) {
      d = 0.0;
      const int rk = r - k;
      const int pk = degree - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = (rk >= -1) ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : degree - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      std::swap(s1, s2);
    }
    row.values[r] = d;
  }
  double factor = 1.0;
  for (int k = 0; k < deriv; ++k) factor *= (degree - k);
  for (int j = 0; j <= degree; ++j) row.values[j] *= factor;
  return row;
}

RowSparse BasisSystem::eval(std::span<const double> pressures, int deriv) const {
  RowSparse out(static_cast<Eigen::Index>(pressures.size()), n_basis_);
  out.reserve(Eigen::VectorXi::Constant(out.rows(), order_));
  for (std::size_t i = 0; i < pressures.size(); ++i) {
    const BasisRow row = evalRow(pressures[i], deriv);
    for (int r = 0; r < order_; ++r) {
      if (row.values[r] != 0.0) out.insert(static_cast<Eigen::Index>(i), row.first + r) = row.values[r];
    }
  }
  out.makeCompressed();
  return out;
}

Eigen::MatrixXd BasisSystem::evalDense(std::span<const double> pressures, int deriv) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pressures.size()), n_basis_);
  for (std::size_t i = 0; i < pressures.size(); ++i) {
    const BasisRow row = evalRow(pressures[i], deriv);
    for (int r = 0; r < order_; ++r) out(static_cast<Eigen::Index>(i), row.first + r) = row.values[r];
  }
  return out;
}

Eigen::MatrixXd BasisSystem::gram(int deriv) const {
  if (deriv < 0 || deriv > 2) throw ArgumentError("gram: derivative order must be 0, 1 or 2");
  const GaussRule rule = gaussLegendre(order_);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n_basis_, n_basis_);
  for (std::size_t iv = 0; iv + 1 < breakpoints_.size(); ++iv) {
    const double a = breakpoints_[iv];
    const double b = breakpoints_[iv + 1];
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double p = mid + half * rule.nodes[q];
      const double w = half * rule.weights[q];
      const BasisRow row = evalRow(p, deriv);
      for (int r = 0; r < order_; ++r) {
        for (int c = 0; c < order_; ++c) {
          g(row.first + r, row.first + c) += w * row.values[r] * row.values[c];
        }
      }
    }
  }
  // exact symmetry
  return 0.5 * (g + g.transpose());
}

Eigen::VectorXd BasisSystem::integralVector(double lo, double hi) const {
  if (!(lo < hi)) throw ArgumentError("integralVector: require lo < hi");
  if (lo < lower() || hi > upper()) throw DomainError("integralVector: bounds outside basis domain");
  const GaussRule rule = gaussLegendre(order_);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_basis_);
  for (std::size_t iv = 0; iv + 1 < breakpoints_.size(); ++iv) {
    const double a = std::max(lo, breakpoints_[iv]);
    const double b = std::min(hi, breakpoints_[iv + 1]);
    if (!(b > a)) continue;
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const BasisRow row = evalRow(mid + half * rule.nodes[q], 0);
      const double w = half * rule.weights[q];
      for (int r = 0; r < order_; ++r) out(row.first + r) += w * row.values[r];
    }
  }
  return out;
}

Eigen::VectorXd BasisSystem::project(const std::function<double(double)>& f, int points) const {
  const GaussRule rule = gaussLegendre(points);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_basis_);
  for (std::size_t iv = 0; iv + 1 < breakpoints_.size(); ++iv) {
    const double half = 0.5 * (breakpoints_[iv + 1] - breakpoints_[iv]);
    const double mid = 0.5 * (breakpoints_[iv + 1] + breakpoints_[iv]);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double p = mid + half * rule.nodes[q];
      const BasisRow row = evalRow(p, 0);
      const double w = half * rule.weights[q] * f(p);
      for (int r = 0; r < order_; ++r) rhs(row.first + r) += w * row.values[r];
    }
  }
  return gram(0).ldlt().solve(rhs);
}

double BasisSystem::evalFunction(const Eigen::Ref<const Eigen::VectorXd>& coef, double p,
                                 int deriv) const {
  if (coef.size() != n_basis_) throw ArgumentError("evalFunction: coefficient size mismatch");
  const BasisRow row = evalRow(p, deriv);
  double s = 0.0;
  for (int r = 0; r < order_; ++r) s += row.values[r] * coef(row.first + r);
  return s;
}

}  // namespace fdakrig
