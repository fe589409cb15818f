#include "fdakrig/profile.hpp"

#include <cmath>
#include <sstream>

#include "fdakrig/basis.hpp"
#include "fdakrig/errors.hpp"

namespace fdakrig {

const char* variableName(Variable v) {
  return v == Variable::Temperature ? "temperature" : "salinity";
}

void validateProfile(const ProfileRecord& profile) {
  auto fail = [&](const std::string& why) {
    throw ValidationError("profile '" + profile.id + "': " + why);
  };
  if (!validGeoPoint(profile.location)) fail("invalid location");
  if (!(profile.day >= 0.0 && profile.day < kYearDays)) fail("day of year outside [0, 365.25)");
  if (profile.measurements.empty()) fail("no measurements");
  double prev = -1.0;
  for (const auto& m : profile.measurements) {
    if (!(m.pressure >= kPressureMin && m.pressure <= kPressureMax))
      fail("pressure outside [0, 2000]");
    if (!(m.pressure > prev)) fail("pressures not strictly increasing");
    if (!std::isfinite(m.temperature)) fail("non-finite temperature");
    if (m.salinity && !std::isfinite(*m.salinity)) fail("non-finite salinity");
    prev = m.pressure;
  }
}

bool salinityUsable(const ProfileRecord& profile) { return profile.mode == ProfileMode::Delayed; }

VariableSeries extractSeries(const ProfileRecord& profile, Variable variable) {
  VariableSeries s;
  s.pressure.reserve(profile.size());
  s.value.reserve(profile.size());
  for (const auto& m : profile.measurements) {
    if (variable == Variable::Temperature) {
      s.pressure.push_back(m.pressure);
      s.value.push_back(m.temperature);
    } else if (salinityUsable(profile) && m.salinity) {
      s.pressure.push_back(m.pressure);
      s.value.push_back(*m.salinity);
    }
  }
  return s;
}

}  // namespace fdakrig
