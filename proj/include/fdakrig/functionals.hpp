#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fdakrig/kriging.hpp"

namespace fdakrig {

/// Conservative temperature and potential density anomaly as functions of
/// (temperature, salinity, pressure), with the partials used by the delta
/// method.
struct EquationOfState {
  std::function<double(double, double, double)> theta;
  std::function<double(double, double, double)> sigma;
  std::function<double(double, double, double)> dThetaDt;
  std::function<double(double, double, double)> dThetaDs;

  /// Theta = t - a p (1 + b s), sigma = -c t + d s.
  static EquationOfState toy(double a = 1e-4, double b = 1e-2, double c = 0.2, double d = 0.8);
  /// Theta = t, sigma = -c t + d s.
  static EquationOfState identity(double c = 0.2, double d = 0.8);
};

struct GaussianSummary {
  double mean = 0.0;
  double variance = 0.0;
};

/// Law of the integral of the curve over [lo, hi]. The mean curve is
/// included when the prediction carries one.
GaussianSummary integralDistribution(const FunctionalPrediction& pred, Variable v, double lo, double hi);

/// Law of the `order`-th derivative (1 or 2) at an interior pressure.
GaussianSummary derivativeDistribution(const FunctionalPrediction& pred, Variable v, double p, int order);

/// Map g(t, s, p) and its gradient in (t, s).
struct BivariateMap {
  std::function<double(double, double, double)> value;
  std::function<std::array<double, 2>(double, double, double)> gradient;
};

/// Delta-method mean curve g(E T, E S) and cross-pressure covariance.
CurvePrediction deltaMethod(const FunctionalPrediction& pred, const BivariateMap& g, std::span<const double> pressures);

enum class OhcRule {
  Left,       // sum (p_{m+1} - p_m) Theta(p_m)
  Trapezoid,  // average of both end nodes per interval
};

struct OhcGrid {
  std::vector<double> pressures;  // ascending, first and last are the limits
  static OhcGrid uniform(double step, double pStar, double pStart = 0.0);
  static OhcGrid fine(double pStar) { return uniform(0.5, pStar); }
  static OhcGrid coarse(double pStar) { return uniform(10.0, pStar); }
};

struct OhcConfig {
  double cp = 3991.87;  // J/(kg K)
  double rho = 1030.0;  // kg/m^3
  OhcRule rule = OhcRule::Left;
};

struct OhcEstimate {
  double mean = 0.0;  // J/m^2
  double variance = 0.0;
  OhcGrid grid;
};

/// Riemann-sum heat content with delta-method covariances of Theta across
/// grid nodes.
OhcEstimate ohcDistribution(const FunctionalPrediction& pred, const EquationOfState& eos, const OhcGrid& grid,
                            const OhcConfig& config = {});

using Curve = std::function<double(double)>;

struct MldConfig {
  double pRef = 10.0;
  double dT = 0.2;
  double scanStep = 0.5;
  double tolerance = 0.01;
  double pMax = kPressureMax;
};

/// Mixed-layer depth by the density threshold equivalent to a dT drop at
/// the reference pressure. Empty when the threshold is never crossed.
std::optional<double> mldThreshold(const Curve& T, const Curve& S, const EquationOfState& eos,
                                   const MldConfig& config = {});

struct MldStats {
  std::vector<double> yearMean;    // per year
  std::vector<double> yearMedian;  // per year
  std::vector<double> skewness;    // per year, sd with divisor B - 1
  std::vector<double> exceedance;  // P(D_mean > yearMedian), when mean draws are given
  double pooledMedian = 0.0;
  double overallMean = 0.0;
  double maey = 0.0;
  double mae = 0.0;
  double pYear = 1.0;  // 1 when both spreads vanish
  long censored = 0;
};

/// Summaries of simulated depths: `years[y]` holds the draws of year y and
/// `meanDraws` those of the year-averaged curve. Censored draws (empty) are
/// dropped and counted.
MldStats mldBootstrapStats(std::span<const std::vector<std::optional<double>>> years,
                           std::span<const std::optional<double>> meanDraws = {});

enum class InversionDirection {
  AsWritten,           // flags rho_{j+1} - rho_j > 0
  DecreasingWithDepth  // flags rho_{j+1} - rho_j < 0
};

/// Gap-weighted fraction of flagged consecutive pairs of one profile.
/// Empty for fewer than two measurements.
std::optional<double> profileInversionFraction(std::span<const double> pressures, std::span<const double> density,
                                               InversionDirection direction = InversionDirection::AsWritten);

/// Average over simulations (rows, evaluated on a 1-dbar grid) of the
/// fraction of flagged grid gaps.
double gridInversionProportion(const Eigen::MatrixXd& density,
                               InversionDirection direction = InversionDirection::AsWritten);

/// Fraction of simulations whose density over [p, p + 1] is flagged; the
/// two columns hold the density at p and p + 1.
double inversionFractionAt(const Eigen::MatrixXd& densityPair,
                           InversionDirection direction = InversionDirection::AsWritten);

struct SimulatedCurves {
  Eigen::MatrixXd T;  // B x pressures
  Eigen::MatrixXd S;
};

/// Curves from conditional score draws, on the full scale when the
/// prediction carries mean curves.
SimulatedCurves simulateCurves(const FunctionalPrediction& pred, std::span<const double> pressures, int B,
                               std::uint64_t seed);

/// sigma(T, S, p) elementwise over simulated curves.
Eigen::MatrixXd densityOf(const SimulatedCurves& curves, std::span<const double> pressures,
                          const EquationOfState& eos);

}  // namespace fdakrig
