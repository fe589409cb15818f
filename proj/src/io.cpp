#include "fdakrig/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

#include "fdakrig/errors.hpp"

namespace fdakrig {
namespace {

std::vector<std::string_view> splitCsv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parseNumber(std::string_view s, const std::string& where, const char* field) {
  s = trim(s);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParseError(where + ": cannot parse " + field + " '" + std::string(s) + "'");
  return v;
}

}  // namespace

ProfileSet readProfiles(std::istream& in, const std::string& source) {
  std::string line;
  long lineNo = 0;
  if (!std::getline(in, line)) return {};
  ++lineNo;
  if (trim(line) != kProfileHeader) throw ParseError(source + ":1: unexpected header");
  ProfileSet out;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++lineNo;
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(lineNo);
    const auto f = splitCsv(line);
    if (f.size() != 9) throw ParseError(where + ": expected 9 fields, found " + std::to_string(f.size()));
    const std::string id(trim(f[0]));
    if (id.empty()) throw ParseError(where + ": empty profile_id");
    const GeoPoint loc{parseNumber<double>(f[1], where, "lon"), parseNumber<double>(f[2], where, "lat")};
    const double day = parseNumber<double>(f[3], where, "day");
    const int year = parseNumber<int>(f[4], where, "year");
    const std::string_view modeTok = trim(f[5]);
    ProfileMode mode;
    if (modeTok == "D")
      mode = ProfileMode::Delayed;
    else if (modeTok == "R")
      mode = ProfileMode::Realtime;
    else
      throw ParseError(where + ": mode must be D or R");
    Measurement m;
    m.pressure = parseNumber<double>(f[6], where, "pressure");
    m.temperature = parseNumber<double>(f[7], where, "temp");
    if (trim(f[8]) != "NA") m.salinity = parseNumber<double>(f[8], where, "psal");

    auto [it, fresh] = index.try_emplace(id, out.size());
    if (fresh) {
      ProfileRecord r;
      r.id = id;
      r.location = loc;
      r.day = day;
      r.year = year;
      r.mode = mode;
      out.push_back(std::move(r));
    }
    ProfileRecord& r = out[it->second];
    if (!(r.location == loc) || r.day != day || r.year != year || r.mode != mode)
      throw ValidationError("profile '" + id + "': inconsistent metadata at " + where);
    r.measurements.push_back(m);
  }
  for (const auto& r : out) validateProfile(r);
  return out;
}

ProfileSet loadProfiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return readProfiles(in, path.string());
}

std::string formatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void writeProfiles(const ProfileSet& profiles, std::ostream& out) {
  out << kProfileHeader << '\n';
  for (const auto& r : profiles)
    for (const auto& m : r.measurements) {
      out << r.id << ',' << formatDouble(r.location.lon) << ',' << formatDouble(r.location.lat) << ','
          << formatDouble(r.day) << ',' << r.year << ',' << (r.mode == ProfileMode::Delayed ? 'D' : 'R') << ','
          << formatDouble(m.pressure) << ',' << formatDouble(m.temperature) << ','
          << (m.salinity ? formatDouble(*m.salinity) : std::string("NA")) << '\n';
    }
}

void writeProfiles(const ProfileSet& profiles, const std::filesystem::path& path) {
  std::ostringstream os;
  writeProfiles(profiles, os);
  writeFileAtomic(path, os.str());
}

void writeFileAtomic(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace fdakrig
