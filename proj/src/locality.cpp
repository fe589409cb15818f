#include "fdakrig/locality.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "fdakrig/errors.hpp"
#include "fdakrig/profile.hpp"

namespace fdakrig {
namespace {
constexpr double kDeg = std::numbers::pi / 180.0;

std::string describe(const GeoPoint& p) {
  std::ostringstream os;
  os << "(" << p.lon << ", " << p.lat << ")";
  return os.str();
}
}  // namespace

double wrapLongitude(double lon) {
  double w = std::fmod(lon + 180.0, 360.0);
  if (w < 0) w += 360.0;
  return w - 180.0;
}

bool validGeoPoint(const GeoPoint& p) {
  return std::isfinite(p.lon) && std::isfinite(p.lat) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon < 180.0;
}

double greatCircleDistance(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = a.lat * kDeg;
  const double phi2 = b.lat * kDeg;
  const double dphi = (b.lat - a.lat) * kDeg;
  const double dlambda = wrapLongitude(b.lon - a.lon) * kDeg;
  const double s1 = std::sin(0.5 * dphi);
  const double s2 = std::sin(0.5 * dlambda);
  const double h = std::clamp(s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

double dayDifference(double d, double d0) {
  double diff = std::fmod(d - d0, kYearDays);
  if (diff > 0.5 * kYearDays) diff -= kYearDays;
  if (diff <= -0.5 * kYearDays) diff += kYearDays;
  return diff;
}

double dayDistance(double d1, double d2) { return std::abs(dayDifference(d1, d2)); }

Displacement localDisplacement(const GeoPoint& origin, const GeoPoint& p) {
  const double midLat = 0.5 * (origin.lat + p.lat) * kDeg;
  Displacement d;
  d.north = kEarthRadiusKm * (p.lat - origin.lat) * kDeg;
  d.east = kEarthRadiusKm * wrapLongitude(p.lon - origin.lon) * kDeg * std::cos(midLat);
  return d;
}

double epanechnikov(double u) {
  const double a = std::abs(u);
  return a <= 1.0 ? 0.75 * (1.0 - a * a) : 0.0;
}

double kernelWeight(double d_space, double d_day, const KernelConfig& cfg) {
  if (d_space < 0.0 || d_day < 0.0) throw ArgumentError("kernelWeight: distances must be >= 0");
  if (!(cfg.h_s > 0.0) || !(cfg.h_d > 0.0)) throw ArgumentError("kernelWeight: bandwidths must be > 0");
  const double ks = epanechnikov(d_space / cfg.h_s);
  if (ks == 0.0) return 0.0;
  return ks * epanechnikov(d_day / cfg.h_d);
}

NeighborSelection selectNeighbors(std::span<const ProfileRecord> profiles, const GeoPoint& center,
                                  double day0, const KernelConfig& cfg, std::span<const int> years,
                                  int minPerYear, double growth, double cap) {
  if (profiles.empty()) throw InsufficientDataError("selectNeighbors: empty profile set");
  if (!(growth > 1.0)) throw ArgumentError("selectNeighbors: growth factor must exceed 1");
  std::vector<double> ds(profiles.size()), dd(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    ds[i] = greatCircleDistance(center, profiles[i].location);
    dd[i] = dayDistance(profiles[i].day, day0);
  }
  std::set<int> required(years.begin(), years.end());
  if (required.empty())
    for (const auto& p : profiles) required.insert(p.year);

  KernelConfig k = cfg;
  for (;;) {
    std::map<int, int> perYear;
    for (std::size_t i = 0; i < profiles.size(); ++i)
      if (kernelWeight(ds[i], dd[i], k) > 0.0) perYear[profiles[i].year]++;
    bool ok = true;
    for (int y : required) ok = ok && perYear[y] >= minPerYear;
    if (ok || k.h_s >= cap) break;
    k.h_s = std::min(k.h_s * growth, cap);
  }
  NeighborSelection sel;
  sel.h_s = k.h_s;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const double w = kernelWeight(ds[i], dd[i], k);
    if (w > 0.0) {
      sel.indices.push_back(i);
      sel.weights.push_back(w);
    }
  }
  if (sel.indices.empty())
    throw InsufficientDataError("no profiles with positive kernel weight near " + describe(center));
  return sel;
}

NeighborSelection selectWithinRadius(std::span<const ProfileRecord> profiles,
                                     const GeoPoint& center, double radius) {
  NeighborSelection sel;
  sel.h_s = radius;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (greatCircleDistance(center, profiles[i].location) <= radius) {
      sel.indices.push_back(i);
      sel.weights.push_back(1.0);
    }
  }
  if (sel.indices.empty())
    throw InsufficientDataError("no profiles within " + std::to_string(radius) + " km of " +
                                describe(center));
  return sel;
}

}  // namespace fdakrig
