#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "fdakrig/basis.hpp"
#include "fdakrig/locality.hpp"
#include "fdakrig/penalized_system.hpp"
#include "fdakrig/profile.hpp"

namespace fdakrig {

struct WorkingCorrelation {
  double tau = 0.001;  // 1/dbar
};

double workingCorrelation(double lag, double tau);

/// Precision matrix of exp(-tau |p_j - p_k|) at increasing pressures, which
/// is tridiagonal.
struct TridiagonalPrecision {
  Eigen::VectorXd diag;
  Eigen::VectorXd off;  // off(j) couples j and j+1
};
TridiagonalPrecision exponentialPrecision(std::span<const double> pressures, double tau);

struct SmoothingConfig {
  std::array<double, 8> eta{1.0, 1e8, 1e8, 1e13, 1e13, 1e13, 1e9, 1e13};
  double aMin = 1e-3;
  double aMax = 1e7;
  double relTol = 1e-3;
  int maxEvals = 30;
};

/// Number of spatio-temporal coefficient functions after the year rows.
inline constexpr int kTrendTerms = 7;

std::vector<int> defaultYears();

/// (1{y=y_1},...,1{y=y_Y}, ds1, ds2, ds1^2, ds2^2, ds1 ds2, dd, dd^2).
Eigen::VectorXd buildDesignRow(const GeoPoint& location, double day, int year,
                               const GeoPoint& center, double day0, std::span<const int> years);
inline Eigen::VectorXd buildDesignRow(const ProfileRecord& profile, const GeoPoint& center,
                                      double day0, std::span<const int> years) {
  return buildDesignRow(profile.location, profile.day, profile.year, center, day0, years);
}

/// One profile's contribution to a weighted penalized spline fit.
struct WeightedSeries {
  double weight = 0.0;          // multiplies the whole profile block
  Eigen::VectorXd covariates;   // one entry per coefficient function
  std::vector<double> pressure;
  std::vector<double> value;
};

/// Penalized weighted least squares for coefficient functions that share a
/// B-spline basis:
///   min sum_i w_i |Sigma_i^{-1/2}(y_i - sum_k c_ik Phi_i beta_k)|^2
///       + a sum_k eta_k beta_k' Omega beta_k.
/// Sigma_i is the exponential working correlation, or the identity when no
/// tau is given.
class CovariateSplineProblem {
 public:
  CovariateSplineProblem(std::vector<WeightedSeries> data, const BasisSystem& basis,
                         std::vector<double> eta, std::optional<double> tau);

  int functions() const { return functions_; }
  int basisSize() const { return nb_; }
  /// Sum of m_i over profiles with positive weight.
  int effectiveSize() const { return nEffective_; }
  const PenalizedSystem& system() const { return *system_; }
  const Eigen::VectorXd& rhs() const { return rhs_; }

  struct Fit {
    Eigen::MatrixXd coefficients;  // functions x basis size
    double trace = 0.0;
    double rss = 0.0;
    double gcv = 0.0;
  };
  Fit solve(double a) const;
  /// Sigma^{-1}-weighted residual sum of squares over (1 - tr/n)^2. Throws
  /// DegenerateSmoothingError when tr >= n.
  double gcv(double a) const { return solve(a).gcv; }

  struct Selection {
    Fit fit;
    double a = 0.0;
    int evaluations = 0;
  };
  Selection selectSmoothing(const SmoothingConfig& cfg) const;

 private:
  struct Row {
    int first;
    std::array<double, 8> values;
  };
  struct Block {
    double weight;
    Eigen::VectorXd covariates;
    std::vector<Row> rows;
    std::vector<double> value;
    TridiagonalPrecision precision;
  };
  double residualSum(const Eigen::MatrixXd& coef) const;

  BasisSystem basis_;
  int functions_ = 0;
  int nb_ = 0;
  int nEffective_ = 0;
  std::vector<Block> blocks_;
  Eigen::VectorXd rhs_;
  std::optional<PenalizedSystem> system_;
};

struct MeanConfig {
  KernelConfig kernel{900.0, 45.25};
  WorkingCorrelation wcorr;
  SmoothingConfig smoothing;
  std::vector<int> years = defaultYears();
  int minPerYear = 10;
  double bandwidthGrowth = 1.25;
  double bandwidthCap = 5000.0;
};

struct MeanFit {
  GeoPoint center;
  double day0 = 45.25;
  Variable variable = Variable::Temperature;
  BasisSystem basis = BasisSystem::equispaced(2);
  std::vector<int> years;
  /// Rows: one per modeled year, then the seven trend functions.
  Eigen::MatrixXd coefficients;
  double a = 0.0;
  double gcv = 0.0;
  double trace = 0.0;
  int n_used = 0;
  double h_s = 0.0;

  int yearRow(int year) const;
};

MeanFit fitMean(const ProfileSet& profiles, const GeoPoint& center, double day0,
                const BasisSystem& basis, Variable variable, const MeanConfig& config);

/// Year row `year`, or the average of all year rows when empty.
Eigen::VectorXd evalMean(const MeanFit& fit, std::optional<int> year,
                         std::span<const double> pressures, int deriv = 0);

/// Full fitted surface f(s, d, y, p) at a location, day and year.
Eigen::VectorXd evalMeanAt(const MeanFit& fit, const GeoPoint& location, double day, int year,
                           std::span<const double> pressures, int deriv = 0);

/// Coefficient vector (in the basis) of the fitted surface at a location.
Eigen::VectorXd meanCoefficientsAt(const MeanFit& fit, const GeoPoint& location, double day,
                                   int year);

struct SpaceTimeDerivatives {
  Eigen::VectorXd ds1, ds2, ds1ds1, ds2ds2, ds1ds2, dd, dddd;
};
SpaceTimeDerivatives spaceTimeDerivatives(const MeanFit& fit, std::span<const double> pressures);

struct ResidualProfile {
  std::size_t source = 0;  // index into the profile set
  std::string id;
  GeoPoint location;
  double day = 0.0;
  int year = 0;
  ProfileMode mode = ProfileMode::Delayed;
  std::vector<double> pressure;
  std::vector<double> value;
  std::size_t size() const { return pressure.size(); }
};
using ResidualProfileSet = std::vector<ResidualProfile>;

/// Index of the fit whose center is closest; ties go to the smallest
/// (lat, lon).
std::size_t nearestFit(std::span<const MeanFit> fits, const GeoPoint& location);

/// Y - f(p) with each profile's own year row and covariates against the
/// nearest fit. Profiles without usable data for `variable` are skipped.
ResidualProfileSet computeResiduals(const ProfileSet& profiles, std::span<const MeanFit> fits,
                                    Variable variable);

}  // namespace fdakrig
