#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fdakrig/locality.hpp"

namespace fdakrig {

enum class ProfileMode { Realtime, Delayed };

struct Measurement {
  double pressure = 0.0;     // dbar
  double temperature = 0.0;  // deg C
  std::optional<double> salinity;  // PSU
};

struct ProfileRecord {
  std::string id;
  GeoPoint location;
  double day = 0.0;  // day of year in [0, 365.25)
  int year = 0;
  ProfileMode mode = ProfileMode::Delayed;
  std::vector<Measurement> measurements;

  std::size_t size() const { return measurements.size(); }
};

using ProfileSet = std::vector<ProfileRecord>;

/// Which measured variable a stage operates on.
enum class Variable { Temperature, Salinity };

const char* variableName(Variable v);

/// Throws ValidationError naming the profile when an invariant is violated:
/// valid location and day, pressures strictly increasing and inside
/// [0, 2000], at least one measurement.
void validateProfile(const ProfileRecord& profile);

/// (pressure, value) pairs of one variable. Salinity is usable only for
/// delayed-mode profiles; missing salinity entries are skipped.
struct VariableSeries {
  std::vector<double> pressure;
  std::vector<double> value;
  std::size_t size() const { return pressure.size(); }
};

VariableSeries extractSeries(const ProfileRecord& profile, Variable variable);

/// True when salinity from this profile may be used for modeling.
bool salinityUsable(const ProfileRecord& profile);

}  // namespace fdakrig
