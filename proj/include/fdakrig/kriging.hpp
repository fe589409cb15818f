#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdakrig/marginal_cov.hpp"
#include "fdakrig/mean_field.hpp"
#include "fdakrig/score_model.hpp"

namespace fdakrig {

/// Conditional law of (Z, W) at a target in the original score coordinates.
struct ConditionalScoreDist {
  Eigen::VectorXd theta;
  Eigen::MatrixXd Sigma;
  int K1 = 0;
  int K2 = 0;

  Eigen::VectorXd mean(Variable v) const;
  /// Diagonal block of the variable.
  Eigen::MatrixXd cov(Variable v) const;
  /// Sigma_12, K1 x K2.
  Eigen::MatrixXd crossCov() const;
};

struct PredictionTarget {
  GeoPoint location;
  double day = 0.0;
  int year = 0;
};

/// Kriging of the decorrelated scores at `target` from the profiles of
/// `neighbors` in the target year within `radius` km. Neighbors without
/// salinity scores constrain only the temperature scores.
ConditionalScoreDist conditionalScoreDistribution(const SpatialFieldModel& model, const ScoreSet& neighbors,
                                                  const PredictionTarget& target, double radius = 1100.0);

/// Spline coefficients of a fitted mean curve.
struct MeanCurve {
  BasisSystem basis = BasisSystem::equispaced(2);
  Eigen::VectorXd coef;

  Eigen::VectorXd evaluate(std::span<const double> pressures, int deriv = 0) const;
};

/// Mean surface of `fit` at the target, as a curve in pressure.
MeanCurve meanCurveAt(const MeanFit& fit, const PredictionTarget& target);

struct FunctionalPrediction {
  ConditionalScoreDist dist;
  FpcBasis fpcsT;
  FpcBasis fpcsS;
  std::optional<MeanCurve> meanT;
  std::optional<MeanCurve> meanS;
  std::optional<MeasurementErrorFit> kappaT;
  std::optional<MeasurementErrorFit> kappaS;

  const FpcBasis& fpcs(Variable v) const { return v == Variable::Temperature ? fpcsT : fpcsS; }
  const std::optional<MeanCurve>& meanCurve(Variable v) const {
    return v == Variable::Temperature ? meanT : meanS;
  }
  const std::optional<MeasurementErrorFit>& kappa(Variable v) const {
    return v == Variable::Temperature ? kappaT : kappaS;
  }
  /// kappa(p) or zeros when no measurement-error fit is attached.
  Eigen::VectorXd kappaAt(Variable v, std::span<const double> pressures) const;
};

struct CurvePrediction {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// phi(p)^T theta (plus the mean curve when `fullScale`) and
/// phi(p1)^T Sigma phi(p2). Throws DomainError outside [0, 2000].
CurvePrediction predictFunction(const FunctionalPrediction& pred, std::span<const double> pressures, Variable v,
                                bool fullScale = false, int deriv = 0);

/// The mean part of predictFunction alone.
Eigen::VectorXd predictMean(const FunctionalPrediction& pred, std::span<const double> pressures, Variable v,
                            bool fullScale = false, int deriv = 0);

struct Interval {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

/// Gaussian prediction interval for a new measurement at each pressure,
/// including the measurement-error variance.
Interval pointwiseInterval(const FunctionalPrediction& pred, std::span<const double> pressures, Variable v,
                           double alpha, bool fullScale = false);

struct Band {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  double xi = 0.0;     // quantile of the weighted chi-square sum
  int components = 0;  // components entering the weighted sum
};

/// Simultaneous prediction band for `m` measurements of one profile.
Band simultaneousBand(const FunctionalPrediction& pred, std::span<const double> pressures, Variable v, int m,
                      double alpha1 = 0.02275, double alpha2 = 0.02275, bool fullScale = false);

/// B x (K1+K2) draws from N(theta, Sigma).
Eigen::MatrixXd conditionalSimulate(const ConditionalScoreDist& dist, int B, std::uint64_t seed);

/// Fitted pieces at one grid point, used by the validation harness.
struct CvModel {
  SpatialFieldModel model;
  std::optional<MeasurementErrorFit> kappaT;
  std::optional<MeasurementErrorFit> kappaS;
};

struct CvConfig {
  Variable variable = Variable::Temperature;
  double radius = 1100.0;
  double alpha = 0.0455;
  double alpha1 = 0.02275;
  double alpha2 = 0.02275;
  int threads = 1;
  /// Limits the number of held-out profiles (all when negative).
  long maxProfiles = -1;
  /// When set and returning a vector, the profile is predicted from these
  /// scores with zero uncertainty instead of from its neighbors.
  std::function<std::optional<Eigen::VectorXd>(const ResidualProfile&)> oracle;
};

struct CvRecord {
  std::string id;
  std::size_t model = 0;
  int neighbors = 0;
  std::vector<double> pressure;
  std::vector<double> observed;
  std::vector<double> predicted;
  std::vector<double> sd;  // predictive sd including measurement error
  std::vector<bool> inInterval;
  bool inBand = false;
};

struct CvBin {
  double lo = 0.0;
  double hi = 0.0;
  long count = 0;
  double coverage = 0.0;
  double rmse = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

struct CvSummary {
  long profiles = 0;
  long skipped = 0;
  long measurements = 0;
  double coverage = 0.0;
  double bandCoverage = 0.0;
  double rmse = 0.0;
  std::vector<CvBin> coverageBins;  // 20-dbar bins
  std::vector<CvBin> levelBins;     // bins between standard pressure levels
};

struct CvResult {
  std::vector<CvRecord> records;
  CvSummary summary;
};

/// The 58 standard pressure levels from 2.5 to 1975 dbar.
std::span<const double> standardPressureLevels();

/// Bin edges at the midpoints between standard levels, from 0 to 2000.
std::vector<double> standardLevelEdges();

/// Leave-one-profile-out validation: each residual profile is predicted
/// from the other scored profiles with the model nearest to it. Salinity
/// validation uses delayed-mode profiles only.
CvResult crossValidate(std::span<const CvModel> models, const ScoreSet& scores,
                       const ResidualProfileSet& residuals, const CvConfig& config = {});

/// Aggregates records into coverage and error summaries.
CvSummary summarize(std::span<const CvRecord> records, long skipped);

}  // namespace fdakrig
