#include "fdakrig/penalized_system.hpp"

#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>

#include "fdakrig/errors.hpp"

namespace fdakrig {
namespace {

// Values of `m` on `pattern` (a superset of m's pattern), zero elsewhere.
ColSparse alignTo(const ColSparse& pattern, const ColSparse& m) {
  ColSparse out = pattern;
  for (int c = 0; c < out.outerSize(); ++c) {
    ColSparse::InnerIterator src(m, c);
    for (ColSparse::InnerIterator it(out, c); it; ++it) {
      while (src && src.row() < it.row()) ++src;
      it.valueRef() = (src && src.row() == it.row()) ? src.value() : 0.0;
    }
  }
  return out;
}

}  // namespace

PenalizedSystem::PenalizedSystem(const SparseSymmetric& G, const SparseSymmetric& P,
                                 Ordering ordering) {
  if (G.size() != P.size()) throw ArgumentError("PenalizedSystem: G and P differ in size");
  ColSparse pattern = G.lower().cwiseAbs() + P.lower().cwiseAbs();
  pattern.makeCompressed();
  // make sure every diagonal entry is structurally present
  std::vector<Eigen::Triplet<double>> diag;
  for (int i = 0; i < pattern.rows(); ++i) diag.emplace_back(i, i, 0.0);
  ColSparse d(pattern.rows(), pattern.cols());
  d.setFromTriplets(diag.begin(), diag.end());
  pattern = pattern + d;
  pattern.makeCompressed();
  g_ = alignTo(pattern, G.lower());
  p_ = alignTo(pattern, P.lower());
  symbolic_ = analyzeLdl(SparseSymmetric::fromLower(g_), ordering);
}

SparseSymmetric PenalizedSystem::combined(double a) const {
  ColSparse b = g_;
  for (Eigen::Index k = 0; k < b.nonZeros(); ++k) b.valuePtr()[k] += a * p_.valuePtr()[k];
  return SparseSymmetric::fromLower(std::move(b));
}

PenalizedSystem::Solution PenalizedSystem::solve(double a, const Eigen::VectorXd& rhs,
                                                 bool withTrace) const {
  const int n = size();
  if (rhs.size() != n) throw ArgumentError("PenalizedSystem::solve: rhs size mismatch");
  ColSparse b = g_;
  for (Eigen::Index k = 0; k < b.nonZeros(); ++k) b.valuePtr()[k] += a * p_.valuePtr()[k];
  Eigen::VectorXd s(n);
  for (int c = 0; c < n; ++c) {
    const double dc = b.coeff(c, c);
    if (!(dc > 0.0)) throw NotPositiveDefiniteError("PenalizedSystem: nonpositive diagonal", c);
    s(c) = 1.0 / std::sqrt(dc);
  }
  ColSparse gs = g_;
  for (int c = 0; c < n; ++c) {
    ColSparse::InnerIterator ib(b, c);
    for (ColSparse::InnerIterator ig(gs, c); ig; ++ig, ++ib) {
      const double f = s(ig.row()) * s(c);
      ib.valueRef() *= f;
      ig.valueRef() *= f;
    }
  }
  const LdlFactor factor = factorizeLdl(symbolic_, SparseSymmetric::fromLower(std::move(b)));
  Solution out;
  out.coef = s.cwiseProduct(factor.solve(s.cwiseProduct(rhs)));
  if (withTrace) out.trace = leverageTrace(factor, SparseSymmetric::fromLower(std::move(gs)));
  return out;
}

ScalarSearchResult minimizeOverLogScale(const std::function<double(double)>& f, double lo,
                                        double hi, double relTol, int maxEvals) {
  if (!(lo > 0.0) || !(hi > lo)) throw ArgumentError("minimizeOverLogScale: need 0 < lo < hi");
  constexpr double kHuge = 1e300;
  int evaluations = 0;
  auto g = [&](double loga) {
    ++evaluations;
    try {
      const double v = f(std::exp(loga));
      return std::isfinite(v) ? v : kHuge;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numerical) throw;
      return kHuge;
    }
  };
  const int bits = static_cast<int>(std::ceil(1.0 - std::log2(relTol)));
  std::uintmax_t iters = static_cast<std::uintmax_t>(std::max(1, maxEvals - 1));
  const auto [x, fx] =
      boost::math::tools::brent_find_minima(g, std::log(lo), std::log(hi), bits, iters);
  return {std::exp(x), fx, evaluations};
}

}  // namespace fdakrig
