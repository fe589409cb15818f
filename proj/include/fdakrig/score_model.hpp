#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdakrig/marginal_cov.hpp"
#include "fdakrig/optimize.hpp"

namespace fdakrig {

struct ScoredProfile {
  std::string id;
  GeoPoint location;
  double day = 0.0;
  int year = 0;
  ProfileMode mode = ProfileMode::Delayed;
  Eigen::VectorXd Z;                 // temperature scores
  std::optional<Eigen::VectorXd> W;  // salinity scores
};

using ScoreSet = std::vector<ScoredProfile>;

/// Least-squares scores (Phi^T Phi)^{-1} Phi^T y. Empty when the profile has
/// fewer than K measurements or cond(Phi^T Phi) exceeds `maxCondition`.
std::optional<Eigen::VectorXd> estimateScores(std::span<const double> pressures, std::span<const double> values,
                                              const FpcBasis& fpcs, double maxCondition = 1e8);
std::optional<Eigen::VectorXd> estimateScores(const ResidualProfile& residual, const FpcBasis& fpcs,
                                              double maxCondition = 1e8);

struct ScoreSetSummary {
  int rejectedTemperature = 0;  // profiles dropped entirely
  int rejectedSalinity = 0;     // delayed profiles whose salinity scores were rejected
};

/// Joins temperature and salinity scores by profile id. A profile enters the
/// set when its temperature scores are accepted; W is attached when a
/// delayed-mode salinity residual with accepted scores exists.
ScoreSet buildScoreSet(const ResidualProfileSet& temperature, const FpcBasis& fpcsT,
                       const ResidualProfileSet& salinity, const FpcBasis& fpcsS,
                       ScoreSetSummary* summary = nullptr);

struct DecorrelationTransform {
  Eigen::MatrixXd V;      // orthogonal (K1+K2) x (K1+K2)
  Eigen::VectorXd gamma;  // descending
  int K1 = 0;
  int K2 = 0;

  int size() const { return K1 + K2; }
  Eigen::VectorXd forward(const Eigen::VectorXd& z, const Eigen::VectorXd& w) const;
  Eigen::VectorXd backward(const Eigen::VectorXd& x) const;
};

/// Eigendecomposition of the uncentered second-moment matrix (divisor n-1)
/// of (Z, W) over the profiles carrying salinity scores.
DecorrelationTransform decorrelateScores(const ScoreSet& scores);

struct MaternParams {
  double gamma = 1.0;     // process variance
  double theta_s1 = 500;  // km, east
  double theta_s2 = 500;  // km, north
  double theta_d = 20;    // days
  double sigma2 = 0.1;    // nugget

  Eigen::VectorXd toLog() const;
  static MaternParams fromLog(const Eigen::VectorXd& x);
  bool valid() const;
};

/// Separation between two profiles: km east, km north, days.
struct SpaceTimeLag {
  double ds1 = 0.0;
  double ds2 = 0.0;
  double dd = 0.0;
};

/// c r^nu K_nu(r) with M(nu, 0) = 1; exp(-r) when nu = 1/2.
double maternCorrelation(double nu, double r);

/// gamma M(nu, r) with r the anisotropically scaled lag, plus sigma2 when
/// the two arguments are the same profile.
double maternCovariance(const SpaceTimeLag& lag, const MaternParams& params, double nu, bool samePoint);

/// Profile coordinates for the covariance model: local km displacement from
/// a common origin and the day of year.
struct SiteCoord {
  double east = 0.0;
  double north = 0.0;
  double day = 0.0;
};

SiteCoord siteCoord(const GeoPoint& origin, const GeoPoint& location, double day);
SpaceTimeLag lagBetween(const SiteCoord& a, const SiteCoord& b);

/// Covariance between two site lists. With `sameSet` the lists are the same
/// profiles and the nugget is added on the diagonal.
Eigen::MatrixXd maternMatrix(std::span<const SiteCoord> a, std::span<const SiteCoord> b, const MaternParams& params,
                             double nu, bool sameSet);

struct YearBlock {
  int year = 0;
  std::vector<SiteCoord> sites;
  Eigen::VectorXd values;
};

/// One decorrelated score component split by year; years are independent.
using ComponentData = std::vector<YearBlock>;

/// Gaussian negative log-likelihood summed over years. When `gradLog` is
/// given it receives the gradient with respect to MaternParams::toLog(). A
/// non-SPD block is retried once with 1e-8 gamma on the diagonal.
double negLogLikelihood(const ComponentData& data, const MaternParams& params, double nu = 0.5,
                        Eigen::VectorXd* gradLog = nullptr);

struct MaternBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  static MaternBounds standard();
};

struct MaternFitConfig {
  double nu = 0.5;
  MaternBounds bounds = MaternBounds::standard();
  BoxMinimizeConfig optimizer;
  int minProfiles = 30;
  std::uint64_t seed = 0;
};

struct MaternFit {
  MaternParams params;
  double nll = 0.0;
  int iterations = 0;
  bool converged = false;
  int starts = 0;
};

/// 0.9 and 0.1 of the mean square of the values, 500 km, 20 days.
MaternParams defaultMaternInit(const ComponentData& data);

/// Bound-constrained maximum likelihood in log parameters. A second start
/// from a perturbed point is tried when the first does not converge; the
/// better of the two is returned.
MaternFit fitMatern(const ComponentData& data, const MaternFitConfig& config = {},
                    std::optional<MaternParams> init = std::nullopt);

struct SpatialFieldModel {
  GeoPoint center;
  FpcBasis fpcsT;
  FpcBasis fpcsS;
  DecorrelationTransform transform;
  std::vector<MaternParams> params;  // one per decorrelated component
  double nu = 0.5;
};

/// Sites with every decorrelated score observed, sites with only the
/// temperature scores observed, and sites to predict at. All sites are
/// distinct profiles.
struct LatentConditioningInput {
  std::vector<SiteCoord> full;
  Eigen::MatrixXd fullValues;  // rows: decorrelated scores V^T (Z, W)
  std::vector<SiteCoord> partial;
  Eigen::MatrixXd partialZ;  // rows: temperature scores Z
  std::vector<SiteCoord> targets;
};

struct LatentPosterior {
  Eigen::MatrixXd partialMean;  // decorrelated scores at the partial sites
  Eigen::MatrixXd targetMean;   // decorrelated scores at the targets
  std::vector<Eigen::MatrixXd> targetCov;
};

/// Exact Gaussian conditioning of the decorrelated score fields. Each
/// component is conditioned on the fully observed sites, then the result is
/// conditioned jointly on the linear constraints Z = V_1 x at partial sites.
LatentPosterior conditionLatent(std::span<const MaternParams> params, double nu, const DecorrelationTransform& transform,
                                const LatentConditioningInput& input, bool withCovariance);

struct EmConfig {
  int iterations = 6;
  MaternFitConfig fit;
};

struct EmResult {
  std::vector<MaternParams> params;
  /// Parameters after each iteration.
  std::vector<std::vector<MaternParams>> history;
  /// ||theta(t+1) - theta(t)|| / ||theta(t)|| over all components.
  std::vector<double> relativeChange;
  /// Decorrelated scores used in the final M-step, one row per profile.
  Eigen::MatrixXd completed;
};

/// Splits per-profile decorrelated scores (one row per profile of `scores`)
/// into components, each grouped by year in ascending order.
std::vector<ComponentData> componentData(const ScoreSet& scores, const GeoPoint& origin,
                                         const Eigen::MatrixXd& decorrelated);

/// EM-type fit with missing salinity scores: the first iteration imputes
/// zero W, later ones the conditional mean of the decorrelated scores given
/// all observed scores in the same year. Each M-step refits all components,
/// warm-started at the previous estimates.
EmResult emFitMissingSalinity(const ScoreSet& scores, const DecorrelationTransform& transform,
                              const GeoPoint& origin, const EmConfig& config = {});

}  // namespace fdakrig
