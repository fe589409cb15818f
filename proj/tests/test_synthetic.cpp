#include <gtest/gtest.h>

#include <cmath>

#include "fdakrig/errors.hpp"
#include "fdakrig/locality.hpp"
#include "fdakrig/synthetic.hpp"

using namespace fdakrig;

namespace {

SyntheticModelSpec smallSpec() {
  SyntheticModelSpec s = SyntheticModelSpec::standard();
  s.plan.profilesPerYear = 60;
  s.plan.years = {2010, 2011};
  return s;
}

}  // namespace

TEST(Synthetic, DisplaceInvertsLocalDisplacement) {
  const GeoPoint origin{179.5, -40.0};
  for (double e : {-700.0, 0.0, 250.0, 900.0})
    for (double n : {-500.0, 0.0, 800.0}) {
      const Displacement d = localDisplacement(origin, displace(origin, e, n));
      EXPECT_NEAR(d.east, e, 1e-8);
      EXPECT_NEAR(d.north, n, 1e-8);
    }
}

TEST(Synthetic, CosineModesAreOrthonormal) {
  const auto modes = cosineModes(4, 0);
  const int n = 20000;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        const double p = 2000.0 * (i + 0.5) / n;
        s += modes[a](p) * modes[b](p) * 2000.0 / n;
      }
      EXPECT_NEAR(s, a == b ? 1.0 : 0.0, 1e-6);
    }
}

TEST(Synthetic, ZeroVarianceGivesTheMeanExactly) {
  SyntheticModelSpec s = smallSpec();
  for (auto& p : s.params) p.gamma = p.sigma2 = 0.0;
  s.kappaT = [](double) { return 0.0; };
  s.kappaS = [](double) { return 0.0; };
  const auto data = synthesizeDataset(s, 3);
  ASSERT_EQ(data.profiles.size(), 120u);
  for (const auto& r : data.profiles)
    for (const auto& m : r.measurements) {
      EXPECT_EQ(m.temperature, s.meanT.value(s.plan.center, s.day0, r.location, r.day, r.year, m.pressure));
      ASSERT_TRUE(m.salinity.has_value());
      EXPECT_EQ(*m.salinity, s.meanS.value(s.plan.center, s.day0, r.location, r.day, r.year, m.pressure));
    }
}

TEST(Synthetic, ReproducibleUnderSeed) {
  const SyntheticModelSpec s = smallSpec();
  const auto a = synthesizeDataset(s, 11);
  const auto b = synthesizeDataset(s, 11);
  const auto c = synthesizeDataset(s, 12);
  ASSERT_EQ(a.profiles.size(), b.profiles.size());
  for (std::size_t i = 0; i < a.profiles.size(); ++i) {
    EXPECT_EQ(a.profiles[i].location, b.profiles[i].location);
    ASSERT_EQ(a.profiles[i].size(), b.profiles[i].size());
    for (std::size_t j = 0; j < a.profiles[i].size(); ++j)
      EXPECT_EQ(a.profiles[i].measurements[j].temperature, b.profiles[i].measurements[j].temperature);
  }
  EXPECT_EQ(a.truth.Z, b.truth.Z);
  EXPECT_NE(a.truth.Z, c.truth.Z);
}

TEST(Synthetic, ProfilesSatisfyThePlan) {
  SyntheticModelSpec s = smallSpec();
  s.plan.realtimeFraction = 0.3;
  s.plan.missingSalinity = 0.2;
  const auto data = synthesizeDataset(s, 5);
  int realtime = 0, missing = 0;
  for (const auto& r : data.profiles) {
    EXPECT_LE(greatCircleDistance(s.plan.center, r.location), s.plan.radius * 1.01);
    EXPECT_GE(r.day, s.plan.dayLo);
    EXPECT_LE(r.day, s.plan.dayHi);
    EXPECT_GE(static_cast<int>(r.size()), s.plan.minMeasurements);
    EXPECT_LE(static_cast<int>(r.size()), s.plan.maxMeasurements);
    EXPECT_NO_THROW(validateProfile(r));
    realtime += r.mode == ProfileMode::Realtime;
    missing += !r.measurements.front().salinity.has_value();
  }
  EXPECT_NEAR(realtime / 120.0, 0.3, 0.12);
  EXPECT_NEAR(missing / 120.0, 0.2, 0.12);
}

TEST(Synthetic, ScoresComposeThroughTheTransform) {
  const SyntheticModelSpec s = smallSpec();
  const auto data = synthesizeDataset(s, 9);
  const Eigen::MatrixXd V = s.transform();
  Eigen::MatrixXd zw(data.truth.Z.rows(), s.K1() + s.K2());
  zw << data.truth.Z, data.truth.W;
  EXPECT_LE((zw - data.truth.decorrelated * V.transpose()).norm(), 1e-10 * zw.norm());
}

TEST(Synthetic, ScoreVarianceMatchesProcessPlusNugget) {
  SyntheticModelSpec s = smallSpec();
  for (auto& p : s.params) p.theta_s1 = p.theta_s2 = 5.0;
  s.plan.profilesPerYear = 200;
  s.plan.years = {2010, 2011, 2012};
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(s.K1() + s.K2());
  long count = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto data = synthesizeDataset(s, seed);
    sum += data.truth.decorrelated.colwise().squaredNorm().transpose();
    count += data.truth.decorrelated.rows();
  }
  for (int k = 0; k < s.K1() + s.K2(); ++k) {
    const double truth = s.params[k].gamma + s.params[k].sigma2;
    EXPECT_NEAR(sum(k) / count / truth, 1.0, 0.05) << "component " << k;
  }
}

TEST(Synthetic, SpatialCorrelationFollowsTheMaternModel) {
  SyntheticModelSpec s = smallSpec();
  s.plan.dayLo = s.plan.dayHi = 45.0;
  s.plan.profilesPerYear = 200;
  s.plan.years = {2010};
  s.params[0].theta_s1 = s.params[0].theta_s2 = 100.0;
  const MaternParams& prm = s.params[0];
  const double lags[] = {50.0, 100.0, 200.0};
  double num[3] = {0, 0, 0};
  long pairs[3] = {0, 0, 0};
  for (std::uint64_t seed = 0; seed < 240; ++seed) {
    const auto data = synthesizeDataset(s, seed);
    const auto n = static_cast<std::size_t>(data.truth.decorrelated.rows());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const SiteCoord a = siteCoord(s.plan.center, data.profiles[i].location, 45.0);
        const SiteCoord b = siteCoord(s.plan.center, data.profiles[j].location, 45.0);
        const double r = std::hypot(a.east - b.east, a.north - b.north);
        for (int l = 0; l < 3; ++l)
          if (std::abs(r - lags[l]) < 10.0) {
            num[l] += data.truth.decorrelated(static_cast<Eigen::Index>(i), 0) *
                      data.truth.decorrelated(static_cast<Eigen::Index>(j), 0);
            ++pairs[l];
          }
      }
  }
  for (int l = 0; l < 3; ++l) {
    ASSERT_GT(pairs[l], 1000);
    const double empirical = num[l] / pairs[l] / (prm.gamma + prm.sigma2);
    const SpaceTimeLag lag{lags[l], 0.0, 0.0};
    const double model = maternCovariance(lag, prm, s.nu, false) / (prm.gamma + prm.sigma2);
    EXPECT_NEAR(empirical, model, 0.05) << "lag " << lags[l];
  }
}

TEST(Synthetic, RejectsOversizedYearsAndBadSpecs) {
  SyntheticModelSpec s = smallSpec();
  s.plan.profilesPerYear = 5001;
  EXPECT_THROW(synthesizeDataset(s, 0), SizeError);
  s = smallSpec();
  s.params.pop_back();
  EXPECT_THROW(synthesizeDataset(s, 0), ValidationError);
  s = smallSpec();
  s.params[0].gamma = -1.0;
  EXPECT_THROW(synthesizeDataset(s, 0), ValidationError);
  s = smallSpec();
  s.V(0, 0) = 2.0;
  EXPECT_THROW(synthesizeDataset(s, 0), ValidationError);
}
