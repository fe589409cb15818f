#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <vector>

namespace fdakrig {

using ColSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Symmetric matrix stored as its lower triangle (row >= col) in CSC form.
class SparseSymmetric {
 public:
  SparseSymmetric() = default;
  /// Keeps only the lower triangle of `m` (entries above the diagonal are
  /// ignored). Explicit zeros are kept as structural entries.
  static SparseSymmetric fromLower(ColSparse m);
  /// Mirrors entries of either triangle into the lower triangle; duplicates
  /// (i,j)/(j,i) are summed, so pass each off-diagonal entry once.
  static SparseSymmetric fromTriplets(int n, const std::vector<Eigen::Triplet<double>>& triplets);
  /// Stores every entry with |value| > drop, lower triangle only.
  static SparseSymmetric fromDense(const Eigen::MatrixXd& dense, double drop = 0.0);

  int size() const { return static_cast<int>(lower_.rows()); }
  const ColSparse& lower() const { return lower_; }
  Eigen::MatrixXd toDense() const;
  double maxAbs() const;
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;

 private:
  ColSparse lower_;
};

enum class Ordering { Natural, MinimumDegree };

/// Pattern-only part of an LDL^T factorization. Depends on the sparsity
/// pattern of the input only, so it is computed once and reused for every
/// matrix sharing that pattern.
struct LdlSymbolic {
  int n = 0;
  std::vector<int> perm;     // perm[new] = old
  std::vector<int> inverse;  // inverse[old] = new
  std::vector<int> parent;   // elimination tree, -1 for roots
  std::vector<int> colPtr;   // column pointers of the strict lower factor
  std::vector<int> rowIdx;   // sorted row indices per column
  // Pattern of the input, used to check that later matrices match.
  std::vector<int> inputOuter;
  std::vector<int> inputInner;
};

std::shared_ptr<const LdlSymbolic> analyzeLdl(const SparseSymmetric& B,
                                              Ordering ordering = Ordering::MinimumDegree);

/// P^T B P = L D L^T with L unit lower triangular; equivalently U^T D U with
/// U = L^T unit upper triangular.
class LdlFactor {
 public:
  LdlFactor(std::shared_ptr<const LdlSymbolic> symbolic, std::vector<double> lx,
            Eigen::VectorXd d)
      : symbolic_(std::move(symbolic)), lx_(std::move(lx)), d_(std::move(d)) {}

  int size() const { return symbolic_->n; }
  const LdlSymbolic& symbolic() const { return *symbolic_; }
  const std::shared_ptr<const LdlSymbolic>& symbolicPtr() const { return symbolic_; }
  const std::vector<double>& lvalues() const { return lx_; }
  const Eigen::VectorXd& diagonal() const { return d_; }

  /// Solves B x = b in the original ordering.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  /// log det B = sum log D.
  double logDeterminant() const;
  /// Dense unit upper factor U (permuted ordering); for tests.
  Eigen::MatrixXd upperDense() const;
  std::size_t nonZeros() const { return lx_.size(); }

 private:
  std::shared_ptr<const LdlSymbolic> symbolic_;
  std::vector<double> lx_;
  Eigen::VectorXd d_;
};

/// Numeric factorization. Throws NotPositiveDefiniteError when a pivot falls
/// below 1e-13 * max|B|, and ArgumentError if B's pattern differs from the
/// one `symbolic` was built for.
LdlFactor factorizeLdl(std::shared_ptr<const LdlSymbolic> symbolic, const SparseSymmetric& B);

inline LdlFactor ldlFactor(const SparseSymmetric& B, Ordering ordering = Ordering::MinimumDegree) {
  return factorizeLdl(analyzeLdl(B, ordering), B);
}

/// Entries of B^{-1} on the pattern of the factor plus the diagonal,
/// computed with the Takahashi recurrence from the bottom-right corner up.
class SelectedInverse {
 public:
  SelectedInverse(std::shared_ptr<const LdlSymbolic> symbolic, std::vector<double> zx,
                  Eigen::VectorXd zd)
      : symbolic_(std::move(symbolic)), zx_(std::move(zx)), zd_(std::move(zd)) {}

  int size() const { return symbolic_->n; }
  /// True when (i, j), in original indexing, is among the computed entries.
  bool contains(int i, int j) const;
  /// (B^{-1})_{ij} in original indexing; PatternMismatchError if not computed.
  double operator()(int i, int j) const;
  /// Diagonal of B^{-1} in original indexing.
  Eigen::VectorXd diagonal() const;

 private:
  // position of permuted entry (r, c), r > c, or -1
  long find(int r, int c) const;

  std::shared_ptr<const LdlSymbolic> symbolic_;
  std::vector<double> zx_;
  Eigen::VectorXd zd_;
};

SelectedInverse takahashiSelectedInverse(const LdlFactor& factor);

/// tr(B^{-1} G) = sum_ij (B^{-1})_ij G_ji using only selected entries.
double leverageTrace(const SelectedInverse& inverse, const SparseSymmetric& G);
double leverageTrace(const LdlFactor& factor, const SparseSymmetric& G);

}  // namespace fdakrig
