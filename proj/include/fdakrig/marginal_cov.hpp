#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "fdakrig/basis.hpp"
#include "fdakrig/locality.hpp"
#include "fdakrig/mean_field.hpp"

namespace fdakrig {

enum class CovSelection {
  Gcv,           // cross products treated as independent observations
  ProfileKFold,  // held-out loss with whole profiles left out
};

struct MarginalCovConfig {
  KernelConfig kernel{550.0, 45.25};
  int minProfiles = 30;
  /// Profiles with more than this many ordered cross products are thinned.
  std::size_t maxPairs = 40000;
  /// The smoothing parameter is searched as rho * tr(G)/tr(P).
  double rhoMin = 1e-9;
  double rhoMax = 1e3;
  double relTol = 1e-3;
  int maxEvals = 30;
  CovSelection selection = CovSelection::ProfileKFold;
  int folds = 5;
  std::uint64_t seed = 0;
};

struct MarginalCovFit {
  GeoPoint center;
  double day0 = 45.25;
  Variable variable = Variable::Temperature;
  BasisSystem basis = BasisSystem::equispaced(2);
  Eigen::MatrixXd alpha;  // symmetric M x M
  double lambda = 0.0;
  double gcv = 0.0;
  double cv = 0.0;  // value of the selection criterion at lambda
  double trace = 0.0;
  int n_used = 0;
  long n_pairs = 0;

  double surface(double p1, double p2) const;
  Eigen::MatrixXd surface(std::span<const double> p1, std::span<const double> p2) const;
};

/// Kernel weights K(s_i - s0, d_i - d0) for residual profiles, zero outside
/// the kernel support.
std::vector<double> residualKernelWeights(const ResidualProfileSet& residuals, const GeoPoint& center,
                                          double day0, const KernelConfig& kernel);

MarginalCovFit fitMarginalCovariance(const ResidualProfileSet& residuals, const GeoPoint& center,
                                     double day0, const BasisSystem& basis, Variable variable,
                                     const MarginalCovConfig& config = {});

struct FpcBasis {
  Variable variable = Variable::Temperature;
  BasisSystem basis = BasisSystem::equispaced(2);
  Eigen::MatrixXd coeffs;        // K x M
  Eigen::VectorXd eigenvalues;   // K, descending

  int count() const { return static_cast<int>(coeffs.rows()); }
  /// m x K matrix of phi_k(p_j) (or derivatives).
  Eigen::MatrixXd evaluate(std::span<const double> pressures, int deriv = 0) const;
};

/// Top-K eigenpairs of Omega0^{1/2} alpha Omega0^{1/2}, mapped back by
/// Omega0^{-1/2}. Returns fewer than K when fewer eigenvalues are positive
/// (above 1e-10 of the largest magnitude).
FpcBasis extractFpcs(const MarginalCovFit& fit, int K);

enum class KappaBias {
  Digamma,    // 2 exp(psi(1)) = 1.12292
  ChiSquare,  // exp(-E log chi2_1) = 3.56214, exact for Gaussian residuals
};
double kappaBiasFactor(KappaBias bias);

struct MeasurementErrorFit {
  BasisSystem basis = BasisSystem::equispaced(2);
  Eigen::VectorXd beta;
  double factor = 0.0;
  double lambda = 0.0;
  double trace = 0.0;
  int clamped = 0;

  double kappa(double p) const;
  Eigen::VectorXd kappa(std::span<const double> pressures) const;
};

struct MeasurementErrorConfig {
  KernelConfig kernel{550.0, 45.25};
  /// Interval bounds are relative to tr(G)/tr(P).
  SmoothingConfig smoothing{{1.0}, 1e-9, 1e3, 1e-3, 30};
  KappaBias bias = KappaBias::Digamma;
};

/// Smoothing-spline fit of log squared reconstruction residuals on pressure.
/// `scores[i]` holds profile i's FPC scores; profiles without scores are
/// skipped.
MeasurementErrorFit fitMeasurementError(const ResidualProfileSet& residuals, const FpcBasis& fpcs,
                                        std::span<const std::optional<Eigen::VectorXd>> scores,
                                        const GeoPoint& center, double day0, const BasisSystem& basis,
                                        const MeasurementErrorConfig& config = {});

/// 1 - RSS/TSS of the K-component reconstruction over scored profiles within
/// `radius` km of `center`.
double varianceExplained(const ResidualProfileSet& residuals, const FpcBasis& fpcs,
                         std::span<const std::optional<Eigen::VectorXd>> scores, const GeoPoint& center,
                         double radius = 500.0);

}  // namespace fdakrig
