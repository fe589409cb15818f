#include "fdakrig/sparse_ldl.hpp"

#include <Eigen/OrderingMethods>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fdakrig/errors.hpp"

namespace fdakrig {

// ---------------------------------------------------------------------------
// SparseSymmetric

SparseSymmetric SparseSymmetric::fromLower(ColSparse m) {
  if (m.rows() != m.cols()) throw ArgumentError("SparseSymmetric: matrix must be square");
  SparseSymmetric s;
  s.lower_ = m.triangularView<Eigen::Lower>();
  s.lower_.makeCompressed();
  return s;
}

SparseSymmetric SparseSymmetric::fromTriplets(int n,
                                              const std::vector<Eigen::Triplet<double>>& triplets) {
  std::vector<Eigen::Triplet<double>> lower;
  lower.reserve(triplets.size());
  for (const auto& t : triplets) {
    if (t.row() < 0 || t.col() < 0 || t.row() >= n || t.col() >= n)
      throw ArgumentError("SparseSymmetric: triplet index out of range");
    if (t.row() >= t.col()) lower.push_back(t);
    else lower.emplace_back(t.col(), t.row(), t.value());
  }
  SparseSymmetric s;
  s.lower_.resize(n, n);
  s.lower_.setFromTriplets(lower.begin(), lower.end());
  s.lower_.makeCompressed();
  return s;
}

SparseSymmetric SparseSymmetric::fromDense(const Eigen::MatrixXd& dense, double drop) {
  if (dense.rows() != dense.cols()) throw ArgumentError("SparseSymmetric: matrix must be square");
  std::vector<Eigen::Triplet<double>> t;
  for (Eigen::Index c = 0; c < dense.cols(); ++c) {
    for (Eigen::Index r = c; r < dense.rows(); ++r) {
      if (r == c || std::abs(dense(r, c)) > drop) t.emplace_back(static_cast<int>(r), static_cast<int>(c), dense(r, c));
    }
  }
  return fromTriplets(static_cast<int>(dense.rows()), t);
}

Eigen::MatrixXd SparseSymmetric::toDense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd(lower_);
  Eigen::MatrixXd full = d + d.transpose();
  full.diagonal() = d.diagonal();
  return full;
}

double SparseSymmetric::maxAbs() const {
  double m = 0.0;
  for (int k = 0; k < lower_.outerSize(); ++k)
    for (ColSparse::InnerIterator it(lower_, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

Eigen::VectorXd SparseSymmetric::multiply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(size());
  for (int c = 0; c < lower_.outerSize(); ++c) {
    for (ColSparse::InnerIterator it(lower_, c); it; ++it) {
      const int r = static_cast<int>(it.row());
      y(r) += it.value() * x(c);
      if (r != c) y(c) += it.value() * x(r);
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Symbolic analysis

namespace {

struct UpperCsc {
  std::vector<int> ptr;
  std::vector<int> idx;
  std::vector<double> val;
};

// Permuted matrix P^T B P as upper-triangular CSC (row <= col).
UpperCsc permutedUpper(const ColSparse& lower, const std::vector<int>& inverse, bool withValues) {
  const int n = static_cast<int>(lower.rows());
  UpperCsc c;
  c.ptr.assign(n + 1, 0);
  for (int col = 0; col < n; ++col) {
    for (ColSparse::InnerIterator it(lower, col); it; ++it) {
      const int a = inverse[it.row()];
      const int b = inverse[col];
      c.ptr[std::max(a, b) + 1]++;
    }
  }
  std::partial_sum(c.ptr.begin(), c.ptr.end(), c.ptr.begin());
  c.idx.resize(c.ptr[n]);
  if (withValues) c.val.resize(c.ptr[n]);
  std::vector<int> next(c.ptr.begin(), c.ptr.end() - 1);
  for (int col = 0; col < n; ++col) {
    for (ColSparse::InnerIterator it(lower, col); it; ++it) {
      const int a = inverse[it.row()];
      const int b = inverse[col];
      const int pos = next[std::max(a, b)]++;
      c.idx[pos] = std::min(a, b);
      if (withValues) c.val[pos] = it.value();
    }
  }
  return c;
}

}  // namespace

std::shared_ptr<const LdlSymbolic> analyzeLdl(const SparseSymmetric& B, Ordering ordering) {
  const ColSparse& lower = B.lower();
  const int n = B.size();
  auto sym = std::make_shared<LdlSymbolic>();
  sym->n = n;
  sym->perm.resize(n);
  std::iota(sym->perm.begin(), sym->perm.end(), 0);
  if (ordering == Ordering::MinimumDegree && n > 1) {
    // Full symmetric pattern for the ordering.
    ColSparse full = lower;
    ColSparse strict = lower.triangularView<Eigen::StrictlyLower>();
    full = full + ColSparse(strict.transpose());
    Eigen::AMDOrdering<int> amd;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p;
    amd(full, p);
    for (int i = 0; i < n; ++i) sym->perm[i] = p.indices()(i);
  }
  sym->inverse.resize(n);
  for (int i = 0; i < n; ++i) sym->inverse[sym->perm[i]] = i;

  sym->inputOuter.assign(lower.outerIndexPtr(), lower.outerIndexPtr() + n + 1);
  sym->inputInner.assign(lower.innerIndexPtr(), lower.innerIndexPtr() + lower.nonZeros());

  const UpperCsc c = permutedUpper(lower, sym->inverse, false);

  // Elimination tree and column counts (up-looking traversal).
  sym->parent.assign(n, -1);
  std::vector<int> flag(n, -1);
  std::vector<int> count(n, 0);
  for (int k = 0; k < n; ++k) {
    flag[k] = k;
    for (int p = c.ptr[k]; p < c.ptr[k + 1]; ++p) {
      int i = c.idx[p];
      if (i >= k) continue;
      for (; flag[i] != k; i = sym->parent[i]) {
        if (sym->parent[i] == -1) sym->parent[i] = k;
        count[i]++;
        flag[i] = k;
      }
    }
  }
  sym->colPtr.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) sym->colPtr[i + 1] = sym->colPtr[i] + count[i];
  sym->rowIdx.resize(sym->colPtr[n]);
  std::fill(flag.begin(), flag.end(), -1);
  std::fill(count.begin(), count.end(), 0);
  for (int k = 0; k < n; ++k) {
    flag[k] = k;
    for (int p = c.ptr[k]; p < c.ptr[k + 1]; ++p) {
      int i = c.idx[p];
      if (i >= k) continue;
      for (; flag[i] != k; i = sym->parent[i]) {
        sym->rowIdx[sym->colPtr[i] + count[i]++] = k;
        flag[i] = k;
      }
    }
  }
  return sym;
}

// ---------------------------------------------------------------------------
// Numeric factorization

LdlFactor factorizeLdl(std::shared_ptr<const LdlSymbolic> symbolic, const SparseSymmetric& B) {
  const LdlSymbolic& s = *symbolic;
  const ColSparse& lower = B.lower();
  const int n = s.n;
  if (B.size() != n || lower.nonZeros() != static_cast<Eigen::Index>(s.inputInner.size()) ||
      !std::equal(s.inputOuter.begin(), s.inputOuter.end(), lower.outerIndexPtr()) ||
      !std::equal(s.inputInner.begin(), s.inputInner.end(), lower.innerIndexPtr())) {
    throw ArgumentError("factorizeLdl: matrix pattern differs from the analyzed pattern");
  }
  const double tol = 1e-13 * B.maxAbs();
  const UpperCsc c = permutedUpper(lower, s.inverse, true);

  std::vector<double> lx(s.rowIdx.size(), 0.0);
  Eigen::VectorXd d(n);
  std::vector<double> y(n, 0.0);
  std::vector<int> pattern(n);
  std::vector<int> flag(n, -1);
  std::vector<int> filled(n, 0);
  for (int k = 0; k < n; ++k) {
    y[k] = 0.0;
    int top = n;
    flag[k] = k;
    for (int p = c.ptr[k]; p < c.ptr[k + 1]; ++p) {
      int i = c.idx[p];
      y[i] += c.val[p];
      int len = 0;
      for (; flag[i] != k; i = s.parent[i]) {
        pattern[len++] = i;
        flag[i] = k;
      }
      while (len > 0) pattern[--top] = pattern[--len];
    }
    double dk = y[k];
    y[k] = 0.0;
    for (; top < n; ++top) {
      const int i = pattern[top];
      const double yi = y[i];
      y[i] = 0.0;
      const int p2 = s.colPtr[i] + filled[i];
      for (int p = s.colPtr[i]; p < p2; ++p) y[s.rowIdx[p]] -= lx[p] * yi;
      const double lki = yi / d(i);
      dk -= lki * yi;
      lx[p2] = lki;
      filled[i]++;
    }
    if (!(dk > tol)) {
      std::ostringstream os;
      os << "matrix is not positive definite: pivot " << k << " (original index " << s.perm[k]
         << ") = " << dk;
      throw NotPositiveDefiniteError(os.str(), s.perm[k]);
    }
    d(k) = dk;
  }
  return LdlFactor(std::move(symbolic), std::move(lx), std::move(d));
}

Eigen::VectorXd LdlFactor::solve(const Eigen::VectorXd& b) const {
  const LdlSymbolic& s = *symbolic_;
  const int n = s.n;
  if (b.size() != n) throw ArgumentError("LdlFactor::solve: size mismatch");
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = b(s.perm[i]);
  for (int j = 0; j < n; ++j) {
    const double xj = x(j);
    for (int p = s.colPtr[j]; p < s.colPtr[j + 1]; ++p) x(s.rowIdx[p]) -= lx_[p] * xj;
  }
  for (int j = 0; j < n; ++j) x(j) /= d_(j);
  for (int j = n - 1; j >= 0; --j) {
    double xj = x(j);
    for (int p = s.colPtr[j]; p < s.colPtr[j + 1]; ++p) xj -= lx_[p] * x(s.rowIdx[p]);
    x(j) = xj;
  }
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out(s.perm[i]) = x(i);
  return out;
}

double LdlFactor::logDeterminant() const { return d_.array().log().sum(); }

Eigen::MatrixXd LdlFactor::upperDense() const {
  const LdlSymbolic& s = *symbolic_;
  Eigen::MatrixXd u = Eigen::MatrixXd::Identity(s.n, s.n);
  for (int j = 0; j < s.n; ++j)
    for (int p = s.colPtr[j]; p < s.colPtr[j + 1]; ++p) u(j, s.rowIdx[p]) = lx_[p];
  return u;
}

// ---------------------------------------------------------------------------
// Selected inverse

SelectedInverse takahashiSelectedInverse(const LdlFactor& factor) {
  const LdlSymbolic& s = factor.symbolic();
  const int n = s.n;
  const std::vector<double>& lx = factor.lvalues();
  const Eigen::VectorXd& d = factor.diagonal();
  std::vector<double> zx(lx.size(), 0.0);
  Eigen::VectorXd zd(n);

  // mark[r] >= 0 iff r is in the pattern of the current column; it holds the
  // position of L_{r,i} so both L_{ri} and the output slot are reachable.
  std::vector<int> mark(n, -1);
  std::vector<double> acc(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    const int begin = s.colPtr[i];
    const int end = s.colPtr[i + 1];
    for (int p = begin; p < end; ++p) {
      mark[s.rowIdx[p]] = p;
      acc[s.rowIdx[p]] = 0.0;
    }
    // Z_{ji} = -sum_{k in col i} L_{ki} Z_{kj}, j in col i.
    for (int p = begin; p < end; ++p) {
      const int k = s.rowIdx[p];
      const double lki = lx[p];
      acc[k] -= lki * zd(k);
      for (int q = s.colPtr[k]; q < s.colPtr[k + 1]; ++q) {
        const int r = s.rowIdx[q];
        const int pr = mark[r];
        if (pr < 0) continue;
        // Z_{rk} contributes to j = r through L_{ki} and to j = k through L_{ri}.
        acc[r] -= lki * zx[q];
        acc[k] -= lx[pr] * zx[q];
      }
    }
    double zii = 1.0 / d(i);
    for (int p = begin; p < end; ++p) {
      const int j = s.rowIdx[p];
      zx[p] = acc[j];
      zii -= lx[p] * acc[j];
    }
    zd(i) = zii;
    for (int p = begin; p < end; ++p) mark[s.rowIdx[p]] = -1;
  }
  return SelectedInverse(factor.symbolicPtr(), std::move(zx), std::move(zd));
}

long SelectedInverse::find(int r, int c) const {
  const LdlSymbolic& s = *symbolic_;
  auto first = s.rowIdx.begin() + s.colPtr[c];
  auto last = s.rowIdx.begin() + s.colPtr[c + 1];
  auto it = std::lower_bound(first, last, r);
  if (it == last || *it != r) return -1;
  return static_cast<long>(it - s.rowIdx.begin());
}

bool SelectedInverse::contains(int i, int j) const {
  const int a = symbolic_->inverse[i];
  const int b = symbolic_->inverse[j];
  if (a == b) return true;
  return find(std::max(a, b), std::min(a, b)) >= 0;
}

double SelectedInverse::operator()(int i, int j) const {
  const int a = symbolic_->inverse[i];
  const int b = symbolic_->inverse[j];
  if (a == b) return zd_(a);
  const long pos = find(std::max(a, b), std::min(a, b));
  if (pos < 0) {
    std::ostringstream os;
    os << "selected inverse has no entry (" << i << ", " << j << ")";
    throw PatternMismatchError(os.str(), i, j);
  }
  return zx_[pos];
}

Eigen::VectorXd SelectedInverse::diagonal() const {
  Eigen::VectorXd out(size());
  for (int i = 0; i < size(); ++i) out(i) = zd_(symbolic_->inverse[i]);
  return out;
}

double leverageTrace(const SelectedInverse& inverse, const SparseSymmetric& G) {
  if (G.size() != inverse.size()) throw ArgumentError("leverageTrace: dimension mismatch");
  const ColSparse& g = G.lower();
  double trace = 0.0;
  for (int c = 0; c < g.outerSize(); ++c) {
    for (ColSparse::InnerIterator it(g, c); it; ++it) {
      const int r = static_cast<int>(it.row());
      const double z = inverse(r, c);
      trace += (r == c ? 1.0 : 2.0) * z * it.value();
    }
  }
  return trace;
}

double leverageTrace(const LdlFactor& factor, const SparseSymmetric& G) {
  return leverageTrace(takahashiSelectedInverse(factor), G);
}

}  // namespace fdakrig
