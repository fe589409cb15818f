#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "fdakrig/profile.hpp"

namespace fdakrig {

/// Column header of the profile text format. One row per measurement;
/// mode is D (delayed) or R (realtime); psal may be NA.
inline constexpr std::string_view kProfileHeader = "profile_id,lon,lat,day,year,mode,pressure,temp,psal";

/// Rows are grouped by profile_id in order of first appearance. Throws
/// ParseError with the line number on malformed input and ValidationError
/// naming the profile when an invariant fails.
ProfileSet readProfiles(std::istream& in, const std::string& source = "input");
ProfileSet loadProfiles(const std::filesystem::path& path);

void writeProfiles(const ProfileSet& profiles, std::ostream& out);
void writeProfiles(const ProfileSet& profiles, const std::filesystem::path& path);

/// Round-trip formatting (%.17g).
std::string formatDouble(double v);

/// Writes through a temporary file in the same directory and renames it
/// into place. Throws IoError.
void writeFileAtomic(const std::filesystem::path& path, std::string_view content);

std::string readFile(const std::filesystem::path& path);

}  // namespace fdakrig
