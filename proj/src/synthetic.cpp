#include "fdakrig/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "fdakrig/errors.hpp"
#include "fdakrig/locality.hpp"
#include "fdakrig/rng.hpp"

namespace fdakrig {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr int kMaxPerYear = 5000;

double call(const PressureFunction& f, double p) { return f ? f(p) : 0.0; }

std::string profileId(int year, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "Y%d-%05d", year, i);
  return buf;
}

}  // namespace

double SyntheticMean::value(const GeoPoint& center, double day0, const GeoPoint& location, double day, int year,
                            double p) const {
  const Displacement d = localDisplacement(center, location);
  return call(base, p) + call(east, p) * d.east + call(north, p) * d.north +
         call(trend, p) * static_cast<double>(year - refYear) + call(seasonal, p) * dayDifference(day, day0);
}

std::vector<PressureFunction> cosineModes(int count, int first, double length) {
  std::vector<PressureFunction> out;
  for (int k = first; k < first + count; ++k) {
    if (k == 0)
      out.emplace_back([length](double) { return 1.0 / std::sqrt(length); });
    else
      out.emplace_back([k, length](double p) {
        return std::sqrt(2.0 / length) * std::cos(k * std::numbers::pi * p / length);
      });
  }
  return out;
}

GeoPoint displace(const GeoPoint& origin, double east, double north) {
  GeoPoint p;
  p.lat = origin.lat + north / (kEarthRadiusKm * kDeg);
  const double midLat = 0.5 * (origin.lat + p.lat) * kDeg;
  p.lon = wrapLongitude(origin.lon + east / (kEarthRadiusKm * kDeg * std::cos(midLat)));
  return p;
}

Eigen::MatrixXd SyntheticModelSpec::transform() const {
  const int K = K1() + K2();
  return V.size() == 0 ? Eigen::MatrixXd::Identity(K, K) : V;
}

Eigen::MatrixXd SyntheticModelSpec::scoreCovariance() const {
  const int K = K1() + K2();
  Eigen::VectorXd d(K);
  for (int k = 0; k < K; ++k) d(k) = params[static_cast<std::size_t>(k)].gamma + params[static_cast<std::size_t>(k)].sigma2;
  const Eigen::MatrixXd Vm = transform();
  return Vm * d.asDiagonal() * Vm.transpose();
}

void SyntheticModelSpec::validate() const {
  const int K = K1() + K2();
  if (static_cast<int>(params.size()) != K) throw ValidationError("synthetic spec: one Matern parameter set per mode");
  for (const auto& p : params)
    if (!(p.gamma >= 0.0) || !(p.sigma2 >= 0.0) || !(p.theta_s1 > 0.0) || !(p.theta_s2 > 0.0) || !(p.theta_d > 0.0))
      throw ValidationError("synthetic spec: variances must be >= 0 and ranges > 0");
  if (V.size() != 0) {
    if (V.rows() != K || V.cols() != K) throw ValidationError("synthetic spec: V has the wrong size");
    if (!(V.transpose() * V).isApprox(Eigen::MatrixXd::Identity(K, K), 1e-10))
      throw ValidationError("synthetic spec: V is not orthogonal");
  }
  const SamplingPlan& s = plan;
  if (!validGeoPoint(s.center)) throw ValidationError("synthetic spec: invalid center");
  if (!(s.radius >= 0.0) || !(s.dayLo >= 0.0) || !(s.dayHi >= s.dayLo) || !(s.dayHi < kYearDays))
    throw ValidationError("synthetic spec: invalid radius or day range");
  if (s.years.empty() || s.profilesPerYear < 0) throw ValidationError("synthetic spec: no years or negative count");
  if (s.minMeasurements < 1 || s.maxMeasurements < s.minMeasurements)
    throw ValidationError("synthetic spec: invalid measurement counts");
  if (!(s.pressureLo >= kPressureMin) || !(s.pressureHi <= kPressureMax) || !(s.pressureHi > s.pressureLo))
    throw ValidationError("synthetic spec: invalid pressure range");
  if (!(s.realtimeFraction >= 0.0 && s.realtimeFraction <= 1.0) ||
      !(s.missingSalinity >= 0.0 && s.missingSalinity <= 1.0))
    throw ValidationError("synthetic spec: fractions must lie in [0, 1]");
}

SyntheticModelSpec SyntheticModelSpec::standard() {
  SyntheticModelSpec s;
  s.meanT.base = [](double p) { return 3.0 + 15.0 * std::exp(-p / 350.0); };
  s.meanT.east = [](double p) { return 1e-3 * std::exp(-p / 500.0); };
  s.meanT.north = [](double p) { return -2e-3 * std::exp(-p / 500.0); };
  s.meanT.trend = [](double p) { return 0.02 * std::exp(-p / 300.0); };
  s.meanS.base = [](double p) { return 34.4 + 0.6 * std::exp(-p / 400.0); };
  s.meanS.east = [](double p) { return 2e-4 * std::exp(-p / 500.0); };
  s.phiT = cosineModes(3);
  s.phiS = cosineModes(2);
  const double gammas[] = {400.0, 100.0, 25.0, 2.0, 0.5};
  for (double g : gammas) s.params.push_back(MaternParams{g, 300.0, 200.0, 30.0, 0.1 * g});
  const double a = 0.1;
  s.V = Eigen::MatrixXd::Identity(5, 5);
  s.V(1, 1) = s.V(3, 3) = std::cos(a);
  s.V(1, 3) = -std::sin(a);
  s.V(3, 1) = std::sin(a);
  s.kappaT = [](double) { return 0.01; };
  s.kappaS = [](double) { return 1e-4; };
  s.plan.center = {-150.0, 30.0};
  return s;
}

SyntheticDataset synthesizeDataset(const SyntheticModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  const SamplingPlan& plan = spec.plan;
  if (plan.profilesPerYear > kMaxPerYear)
    throw SizeError("synthesizeDataset: " + std::to_string(plan.profilesPerYear) +
                    " profiles per year exceeds the dense limit of " + std::to_string(kMaxPerYear));
  const int K1 = spec.K1(), K2 = spec.K2(), K = K1 + K2;
  const Eigen::MatrixXd Vm = spec.transform();
  const int n = plan.profilesPerYear;

  SyntheticDataset out;
  const auto total = static_cast<Eigen::Index>(n) * static_cast<Eigen::Index>(plan.years.size());
  out.truth.Z.resize(total, K1);
  out.truth.W.resize(total, K2);
  out.truth.decorrelated.resize(total, K);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;

  Eigen::Index row = 0;
  for (int year : plan.years) {
    auto rng = makeStream(seed, {0x5a, static_cast<std::uint64_t>(year)});
    ProfileSet profiles(static_cast<std::size_t>(n));
    std::vector<SiteCoord> sites;
    std::vector<bool> noSalinity(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      ProfileRecord& r = profiles[static_cast<std::size_t>(i)];
      const double rad = plan.radius * std::sqrt(unif(rng));
      const double ang = 2.0 * std::numbers::pi * unif(rng);
      r.id = profileId(year, i);
      r.location = displace(plan.center, rad * std::cos(ang), rad * std::sin(ang));
      r.day = plan.dayLo + (plan.dayHi - plan.dayLo) * unif(rng);
      r.year = year;
      r.mode = unif(rng) < plan.realtimeFraction ? ProfileMode::Realtime : ProfileMode::Delayed;
      noSalinity[static_cast<std::size_t>(i)] = unif(rng) < plan.missingSalinity;
      const int m = std::uniform_int_distribution<int>(plan.minMeasurements, plan.maxMeasurements)(rng);
      const double step = (plan.pressureHi - plan.pressureLo) / m;
      r.measurements.resize(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j)
        r.measurements[static_cast<std::size_t>(j)].pressure = plan.pressureLo + step * (j + unif(rng));
      sites.push_back(siteCoord(plan.center, r.location, r.day));
    }

    Eigen::MatrixXd X(n, K);
    for (int k = 0; k < K; ++k) {
      auto fieldRng = makeStream(seed, {0x5b, static_cast<std::uint64_t>(year), static_cast<std::uint64_t>(k)});
      Eigen::VectorXd e(n);
      for (int i = 0; i < n; ++i) e(i) = normal(fieldRng);
      const MaternParams& prm = spec.params[static_cast<std::size_t>(k)];
      if (prm.gamma == 0.0 && prm.sigma2 == 0.0) {
        X.col(k).setZero();
        continue;
      }
      const Eigen::MatrixXd C = maternMatrix(sites, sites, prm, spec.nu, true);
      Eigen::LLT<Eigen::MatrixXd> llt(C);
      if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
        const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        X.col(k) = es.eigenvectors() * root.cwiseProduct(es.eigenvectors().transpose() * e);
      } else {
        X.col(k) = llt.matrixL() * e;
      }
    }
    const Eigen::MatrixXd ZW = X * Vm.transpose();

    auto noise = makeStream(seed, {0x5c, static_cast<std::uint64_t>(year)});
    for (int i = 0; i < n; ++i) {
      ProfileRecord& r = profiles[static_cast<std::size_t>(i)];
      for (auto& meas : r.measurements) {
        const double p = meas.pressure;
        double t = spec.meanT.value(plan.center, spec.day0, r.location, r.day, year, p);
        double s = spec.meanS.value(plan.center, spec.day0, r.location, r.day, year, p);
        for (int k = 0; k < K1; ++k) t += ZW(i, k) * spec.phiT[static_cast<std::size_t>(k)](p);
        for (int k = 0; k < K2; ++k) s += ZW(i, K1 + k) * spec.phiS[static_cast<std::size_t>(k)](p);
        const double kt = call(spec.kappaT, p), ks = call(spec.kappaS, p);
        const double et = normal(noise), es = normal(noise);
        meas.temperature = t + std::sqrt(std::max(0.0, kt)) * et;
        if (!noSalinity[static_cast<std::size_t>(i)]) meas.salinity = s + std::sqrt(std::max(0.0, ks)) * es;
      }
      out.truth.Z.row(row) = ZW.row(i).head(K1);
      out.truth.W.row(row) = ZW.row(i).tail(K2);
      out.truth.decorrelated.row(row) = X.row(i);
      ++row;
      out.profiles.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace fdakrig
