#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fdakrig {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kYearDays = 365.25;

struct GeoPoint {
  double lon = 0.0;  // degrees, [-180, 180)
  double lat = 0.0;  // degrees, [-90, 90]

  bool operator==(const GeoPoint&) const = default;
};

/// Wraps a longitude into [-180, 180).
double wrapLongitude(double lon);
bool validGeoPoint(const GeoPoint& p);

/// Haversine distance in km on a sphere of radius 6371 km.
double greatCircleDistance(const GeoPoint& a, const GeoPoint& b);

/// Circular distance between two days of the year on a 365.25-day cycle.
double dayDistance(double d1, double d2);
/// Signed circular difference d - d0 in (-182.625, 182.625].
double dayDifference(double d, double d0);

/// Local east/north displacement of `p` from `origin` in km: the
/// meridional component is R*dlat, the zonal one R*dlon*cos(mean latitude).
struct Displacement {
  double east = 0.0;
  double north = 0.0;
};
Displacement localDisplacement(const GeoPoint& origin, const GeoPoint& p);

struct KernelConfig {
  double h_s = 900.0;   // km
  double h_d = 45.25;   // days
};

/// Epanechnikov kernel k(u) = 0.75 (1 - u^2) on |u| <= 1.
double epanechnikov(double u);

/// Product kernel weight k(d_space/h_s) * k(d_day/h_d).
double kernelWeight(double d_space, double d_day, const KernelConfig& cfg);

struct NeighborSelection {
  std::vector<std::size_t> indices;
  std::vector<double> weights;
  double h_s = 0.0;  // bandwidth actually used (kernel mode), or the radius
};

struct ProfileRecord;

/// Kernel-mode selection. Every year in `years` (all years present in the set
/// when empty) must contribute at least `minPerYear` profiles; otherwise h_s
/// grows by `growth` until satisfied or `cap` km is reached. Throws
/// InsufficientDataError if nothing is selected at the cap.
NeighborSelection selectNeighbors(std::span<const ProfileRecord> profiles, const GeoPoint& center,
                                  double day0, const KernelConfig& cfg,
                                  std::span<const int> years = {}, int minPerYear = 10,
                                  double growth = 1.25, double cap = 5000.0);

/// Radius-mode selection: every profile within `radius` km (weight 1).
NeighborSelection selectWithinRadius(std::span<const ProfileRecord> profiles,
                                     const GeoPoint& center, double radius);

}  // namespace fdakrig
