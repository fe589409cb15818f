#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "fdakrig/profile.hpp"
#include "fdakrig/score_model.hpp"

namespace fdakrig {

using PressureFunction = std::function<double(double)>;

/// Mean surface base(p) + east(p) de + north(p) dn + trend(p) (year - refYear)
/// + seasonal(p) (day - day0), with (de, dn) the local displacement in km
/// from the center. Empty functions contribute zero.
struct SyntheticMean {
  PressureFunction base;
  PressureFunction east;
  PressureFunction north;
  PressureFunction trend;
  PressureFunction seasonal;
  int refYear = 2010;

  double value(const GeoPoint& center, double day0, const GeoPoint& location, double day, int year,
               double p) const;
};

/// Orthonormal cosine modes sqrt(1/L) and sqrt(2/L) cos(k pi p / L) on [0, L],
/// starting from `first`.
std::vector<PressureFunction> cosineModes(int count, int first = 1, double length = 2000.0);

struct SamplingPlan {
  GeoPoint center;
  double radius = 800.0;  // km, uniform over the disc
  double dayLo = 0.0;
  double dayHi = 90.0;
  std::vector<int> years{2009, 2010, 2011};
  int profilesPerYear = 300;
  int minMeasurements = 20;
  int maxMeasurements = 40;
  double pressureLo = 5.0;
  double pressureHi = 1995.0;
  /// Fraction of profiles in realtime mode; their salinity is not usable.
  double realtimeFraction = 0.0;
  /// Fraction of profiles written without any salinity values.
  double missingSalinity = 0.0;
};

/// Scores (Z, W) = V x where the components of x are independent Matern
/// fields (process plus nugget); curves are mean + phi^T Z (or W) plus
/// N(0, kappa(p)) noise.
struct SyntheticModelSpec {
  double day0 = 45.25;
  SyntheticMean meanT;
  SyntheticMean meanS;
  std::vector<PressureFunction> phiT;
  std::vector<PressureFunction> phiS;
  Eigen::MatrixXd V;  // identity when empty
  std::vector<MaternParams> params;
  double nu = 0.5;
  PressureFunction kappaT;
  PressureFunction kappaS;
  SamplingPlan plan;

  int K1() const { return static_cast<int>(phiT.size()); }
  int K2() const { return static_cast<int>(phiS.size()); }
  Eigen::MatrixXd transform() const;
  /// Marginal covariance of (Z, W): V diag(gamma + sigma2) V^T.
  Eigen::MatrixXd scoreCovariance() const;
  /// Throws ValidationError when dimensions or variances are inconsistent.
  void validate() const;

  /// Thermocline-like temperature, halocline-like salinity, three and two
  /// cosine modes, mild gradients and constant measurement error.
  static SyntheticModelSpec standard();
};

struct SyntheticTruth {
  /// One row per profile, in dataset order.
  Eigen::MatrixXd Z;
  Eigen::MatrixXd W;
  Eigen::MatrixXd decorrelated;
};

struct SyntheticDataset {
  ProfileSet profiles;
  SyntheticTruth truth;
};

/// Bit-reproducible under `seed`. Throws SizeError above 5000 profiles per
/// year.
SyntheticDataset synthesizeDataset(const SyntheticModelSpec& spec, std::uint64_t seed);

/// Location at local displacement (east, north) km from `origin`; the exact
/// inverse of localDisplacement.
GeoPoint displace(const GeoPoint& origin, double east, double north);

}  // namespace fdakrig
