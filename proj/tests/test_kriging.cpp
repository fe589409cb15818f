#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "fdakrig/errors.hpp"
#include "fdakrig/imhof.hpp"
#include "fdakrig/kriging.hpp"

using namespace fdakrig;

namespace {

constexpr double L = 2000.0;
const GeoPoint kCenter{-150.0, -30.0};

FpcBasis cosineFpcs(int K, Variable v = Variable::Temperature) {
  FpcBasis f;
  f.variable = v;
  f.basis = BasisSystem::equispaced(20);
  f.coeffs.resize(K, f.basis.size());
  for (int k = 0; k < K; ++k)
    f.coeffs.row(k) = f.basis
                          .project([k](double p) {
                            return k == 0 ? 1.0 / std::sqrt(L) : std::sqrt(2.0 / L) * std::cos(k * std::numbers::pi * p / L);
                          })
                          .transpose();
  f.eigenvalues = Eigen::VectorXd::LinSpaced(K, K, 1);
  return f;
}

Eigen::MatrixXd randomOrthogonal(std::mt19937_64& rng, int K) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd A(K, K);
  for (auto& v : A.reshaped()) v = z(rng);
  return Eigen::HouseholderQR<Eigen::MatrixXd>(A).householderQ();
}

SpatialFieldModel makeModel(std::mt19937_64& rng, int K1, int K2, double nugget = 0.3) {
  SpatialFieldModel m;
  m.center = kCenter;
  m.fpcsT = cosineFpcs(K1);
  m.fpcsS = cosineFpcs(K2, Variable::Salinity);
  m.transform.K1 = K1;
  m.transform.K2 = K2;
  m.transform.V = randomOrthogonal(rng, K1 + K2);
  m.transform.gamma = Eigen::VectorXd::LinSpaced(K1 + K2, K1 + K2, 1);
  for (int k = 0; k < K1 + K2; ++k)
    m.params.push_back(MaternParams{4.0 / (k + 1), 400.0 + 60.0 * k, 300.0 + 40.0 * k, 15.0 + 5.0 * k,
                                    nugget / (k + 1)});
  return m;
}

ScoredProfile randomProfile(std::mt19937_64& rng, const std::string& id, int K1, int K2, bool withW, int year = 2010) {
  std::uniform_real_distribution<double> dlat(-6.0, 6.0), dlon(-7.0, 7.0), day(0.0, 90.0);
  std::normal_distribution<double> z;
  ScoredProfile s;
  s.id = id;
  s.location = {kCenter.lon + dlon(rng), kCenter.lat + dlat(rng)};
  s.day = day(rng);
  s.year = year;
  s.Z = Eigen::VectorXd(K1);
  for (auto& v : s.Z) v = z(rng);
  if (withW) {
    Eigen::VectorXd w(K2);
    for (auto& v : w) v = z(rng);
    s.W = w;
  }
  s.mode = withW ? ProfileMode::Delayed : ProfileMode::Realtime;
  return s;
}

MeasurementErrorFit constantKappa(double k) {
  MeasurementErrorFit f;
  f.factor = k;
  f.beta = Eigen::VectorXd::Zero(f.basis.size());
  return f;
}

// Joint Gaussian conditioning over every latent decorrelated value at the
// neighbors and the target, observed through (Z, W) or Z alone.
ConditionalScoreDist denseConditioning(const SpatialFieldModel& m, const ScoreSet& nb, const PredictionTarget& t) {
  const int K = m.transform.size(), K1 = m.transform.K1;
  const auto n = static_cast<Eigen::Index>(nb.size());
  std::vector<SiteCoord> sites;
  for (const auto& s : nb) sites.push_back(siteCoord(m.center, s.location, s.day));
  sites.push_back(siteCoord(m.center, t.location, t.day));
  const Eigen::Index N = n + 1;
  // latent vector ordered (site, component)
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N * K, N * K);
  for (int k = 0; k < K; ++k) {
    const Eigen::MatrixXd Ck = maternMatrix(sites, sites, m.params[k], m.nu, true);
    for (Eigen::Index a = 0; a < N; ++a)
      for (Eigen::Index b = 0; b < N; ++b) C(a * K + k, b * K + k) = Ck(a, b);
  }
  // observed original scores = V x at each neighbor, W rows dropped when missing
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> y;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int r = nb[i].W ? K : K1;
    for (int q = 0; q < r; ++q) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(N * K);
      a.segment(i * K, K) = m.transform.V.row(q).transpose();
      rows.push_back(a);
      y.push_back(q < K1 ? nb[i].Z(q) : (*nb[i].W)(q - K1));
    }
  }
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), N * K);
  for (std::size_t i = 0; i < rows.size(); ++i) A.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  const Eigen::VectorXd Y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(K, N * K);
  T.block(0, n * K, K, K) = m.transform.V;
  const Eigen::MatrixXd Saa = A * C * A.transpose();
  const Eigen::MatrixXd Sta = T * C * A.transpose();
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(Saa);
  ConditionalScoreDist d;
  d.K1 = m.transform.K1;
  d.K2 = m.transform.K2;
  d.theta = Sta * ldlt.solve(Y);
  d.Sigma = T * C * T.transpose() - Sta * ldlt.solve(Sta.transpose());
  return d;
}

std::vector<double> grid(int n) {
  std::vector<double> p;
  for (int j = 0; j < n; ++j) p.push_back(2000.0 * j / (n - 1));
  return p;
}

}  // namespace

TEST(Kriging, NoNeighborsGivesThePrior) {
  std::mt19937_64 rng(1);
  const SpatialFieldModel m = makeModel(rng, 2, 2);
  const auto d = conditionalScoreDistribution(m, {}, {kCenter, 40.0, 2010});
  EXPECT_LE(d.theta.cwiseAbs().maxCoeff(), 1e-15);
  const Eigen::MatrixXd latent = m.transform.V.transpose() * d.Sigma * m.transform.V;
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(latent(k, k), m.params[k].gamma + m.params[k].sigma2, 1e-12);
  EXPECT_LE((latent - Eigen::MatrixXd(latent.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Kriging, SingleCoincidentNeighbor) {
  SpatialFieldModel m;
  m.center = kCenter;
  m.transform.K1 = 1;
  m.transform.K2 = 1;
  m.transform.V = Eigen::Matrix2d::Identity();
  m.transform.gamma = Eigen::Vector2d(2, 1);
  m.params = {MaternParams{2.0, 300, 300, 10, 0.5}, MaternParams{1.0, 300, 300, 10, 0.25}};
  ScoredProfile s;
  s.id = "n";
  s.location = {-149.0, -29.5};
  s.day = 30.0;
  s.year = 2010;
  s.Z = Eigen::VectorXd::Constant(1, 1.5);
  s.W = Eigen::VectorXd::Constant(1, -0.8);
  const auto d = conditionalScoreDistribution(m, {s}, {s.location, s.day, 2010});
  const double g1 = 2.0, n1 = 0.5, g2 = 1.0, n2 = 0.25;
  EXPECT_NEAR(d.theta(0), 1.5 * g1 / (g1 + n1), 1e-12);
  EXPECT_NEAR(d.theta(1), -0.8 * g2 / (g2 + n2), 1e-12);
  EXPECT_NEAR(d.Sigma(0, 0), g1 + n1 - g1 * g1 / (g1 + n1), 1e-12);
  EXPECT_NEAR(d.Sigma(1, 1), g2 + n2 - g2 * g2 / (g2 + n2), 1e-12);
  EXPECT_NEAR(d.Sigma(0, 1), 0.0, 1e-14);
}

TEST(Kriging, MatchesDenseConditioning) {
  std::mt19937_64 rng(2);
  const SpatialFieldModel m = makeModel(rng, 2, 2);
  ScoreSet nb;
  for (int i = 0; i < 15; ++i) nb.push_back(randomProfile(rng, "p" + std::to_string(i), 2, 2, i % 3 != 0));
  const PredictionTarget t{{-151.0, -31.0}, 44.0, 2010};
  const auto d = conditionalScoreDistribution(m, nb, t);
  const auto oracle = denseConditioning(m, nb, t);
  EXPECT_LE((d.theta - oracle.theta).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((d.Sigma - oracle.Sigma).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Kriging, ConditionalVarianceBelowPrior) {
  std::mt19937_64 rng(3);
  const SpatialFieldModel m = makeModel(rng, 3, 2);
  ScoreSet nb;
  for (int i = 0; i < 40; ++i) nb.push_back(randomProfile(rng, "p" + std::to_string(i), 3, 2, i % 2 == 0));
  for (int trial = 0; trial < 5; ++trial) {
    const auto t = randomProfile(rng, "t", 3, 2, false);
    const auto d = conditionalScoreDistribution(m, nb, {t.location, t.day, 2010});
    const Eigen::MatrixXd latent = m.transform.V.transpose() * d.Sigma * m.transform.V;
    for (int k = 0; k < 5; ++k) {
      EXPECT_GE(m.params[k].gamma + m.params[k].sigma2 - latent(k, k), -1e-10);
      EXPECT_GE(latent(k, k), -1e-10);
    }
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(d.Sigma).eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(Kriging, ZeroNuggetInterpolates) {
  std::mt19937_64 rng(4);
  SpatialFieldModel m = makeModel(rng, 2, 2);
  for (auto& p : m.params) p.sigma2 = 1e-12;
  ScoreSet nb;
  for (int i = 0; i < 12; ++i) nb.push_back(randomProfile(rng, "p" + std::to_string(i), 2, 2, true));
  const ScoredProfile& s = nb[5];
  const auto d = conditionalScoreDistribution(m, nb, {s.location, s.day, 2010});
  Eigen::VectorXd truth(4);
  truth << s.Z, *s.W;
  EXPECT_LE((d.theta - truth).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Kriging, NeighborOrderDoesNotMatter) {
  std::mt19937_64 rng(5);
  const SpatialFieldModel m = makeModel(rng, 2, 2);
  ScoreSet nb;
  for (int i = 0; i < 25; ++i) nb.push_back(randomProfile(rng, "p" + std::to_string(i), 2, 2, i % 4 != 0));
  const PredictionTarget t{{-150.5, -29.0}, 20.0, 2010};
  const auto a = conditionalScoreDistribution(m, nb, t);
  std::shuffle(nb.begin(), nb.end(), rng);
  const auto b = conditionalScoreDistribution(m, nb, t);
  EXPECT_LE((a.theta - b.theta).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((a.Sigma - b.Sigma).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Kriging, OtherYearsAndDistantProfilesIgnored) {
  std::mt19937_64 rng(6);
  const SpatialFieldModel m = makeModel(rng, 2, 2);
  ScoreSet nb{randomProfile(rng, "a", 2, 2, true, 2011), randomProfile(rng, "b", 2, 2, true)};
  nb[1].location = {-120.0, -30.0};  // about 2900 km away
  const auto d = conditionalScoreDistribution(m, nb, {kCenter, 40.0, 2010});
  const auto prior = conditionalScoreDistribution(m, {}, {kCenter, 40.0, 2010});
  EXPECT_EQ(d.theta, prior.theta);
  EXPECT_EQ(d.Sigma, prior.Sigma);
}

TEST(Kriging, InformationReducesVarianceOnAverage) {
  // simulate neighbor scores from the model and compare predictive variances
  std::mt19937_64 rng(7);
  const SpatialFieldModel m = makeModel(rng, 2, 2);
  FunctionalPrediction prior;
  prior.fpcsT = m.fpcsT;
  prior.fpcsS = m.fpcsS;
  prior.dist = conditionalScoreDistribution(m, {}, {kCenter, 40.0, 2010});
  const auto p = grid(41);
  const Eigen::VectorXd pv = predictFunction(prior, p, Variable::Temperature).cov.diagonal();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(41);
  for (int rep = 0; rep < 20; ++rep) {
    ScoreSet nb;
    for (int i = 0; i < 20; ++i) nb.push_back(randomProfile(rng, "p" + std::to_string(i), 2, 2, i % 2 == 0));
    FunctionalPrediction post = prior;
    post.dist = conditionalScoreDistribution(m, nb, {kCenter, 40.0, 2010});
    const Eigen::VectorXd v = predictFunction(post, p, Variable::Temperature).cov.diagonal();
    EXPECT_GE(v.minCoeff(), -1e-12);
    acc += v / 20.0;
  }
  EXPECT_TRUE(((pv - acc).array() >= -1e-12).all());
}

TEST(Prediction, FirstComponentCurve) {
  FunctionalPrediction pred;
  pred.fpcsT = cosineFpcs(3);
  pred.fpcsS = cosineFpcs(2, Variable::Salinity);
  pred.dist.K1 = 3;
  pred.dist.K2 = 2;
  pred.dist.theta = Eigen::VectorXd::Zero(5);
  pred.dist.theta(0) = 1.0;
  pred.dist.Sigma = Eigen::MatrixXd::Zero(5, 5);
  const auto p = grid(21);
  const auto c = predictFunction(pred, p, Variable::Temperature);
  const Eigen::VectorXd phi1 = pred.fpcsT.evaluate(p).col(0);
  EXPECT_LE((c.mean - phi1).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(c.cov.norm(), 0.0);
  EXPECT_LE(predictFunction(pred, p, Variable::Salinity).mean.cwiseAbs().maxCoeff(), 1e-15);
  // full scale adds the mean curve
  pred.meanT = MeanCurve{BasisSystem::equispaced(5), Eigen::VectorXd::Constant(7, 12.0)};
  const auto f = predictFunction(pred, p, Variable::Temperature, true);
  EXPECT_LE((f.mean - phi1 - Eigen::VectorXd::Constant(21, 12.0)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(predictFunction(pred, p, Variable::Salinity, true), ArgumentError);
  const std::vector<double> bad{-1.0};
  EXPECT_THROW(predictFunction(pred, bad, Variable::Temperature), DomainError);
}

TEST(Prediction, CovarianceDiagonalMatchesPointwise) {
  std::mt19937_64 rng(8);
  const SpatialFieldModel m = makeModel(rng, 3, 2);
  ScoreSet nb;
  for (int i = 0; i < 10; ++i) nb.push_back(randomProfile(rng, "p" + std::to_string(i), 3, 2, true));
  FunctionalPrediction pred;
  pred.fpcsT = m.fpcsT;
  pred.fpcsS = m.fpcsS;
  pred.dist = conditionalScoreDistribution(m, nb, {kCenter, 30.0, 2010});
  const auto p = grid(31);
  const auto c = predictFunction(pred, p, Variable::Salinity);
  for (std::size_t j = 0; j < p.size(); ++j) {
    const std::vector<double> one{p[j]};
    EXPECT_NEAR(predictFunction(pred, one, Variable::Salinity).cov(0, 0), c.cov(j, j), 1e-12);
  }
}

TEST(Prediction, PointwiseIntervalWidths) {
  FunctionalPrediction pred;
  pred.fpcsT = cosineFpcs(2);
  pred.fpcsS = cosineFpcs(1, Variable::Salinity);
  pred.dist.K1 = 2;
  pred.dist.K2 = 1;
  pred.dist.theta = Eigen::Vector3d(0.5, 0.0, 0.0);
  pred.dist.Sigma = Eigen::MatrixXd::Zero(3, 3);
  const auto p = grid(11);
  const auto mean = predictFunction(pred, p, Variable::Temperature).mean;
  const auto degenerate = pointwiseInterval(pred, p, Variable::Temperature, 0.0455);
  EXPECT_LE((degenerate.lo - mean).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((degenerate.hi - mean).cwiseAbs().maxCoeff(), 1e-15);
  pred.kappaT = constantKappa(1.0);
  const auto iv = pointwiseInterval(pred, p, Variable::Temperature, 0.0455);
  EXPECT_LE(((iv.hi - mean).array() - 2.0).abs().maxCoeff(), 1e-4);
  EXPECT_LE(((mean - iv.lo).array() - 2.0).abs().maxCoeff(), 1e-4);
  EXPECT_THROW(pointwiseInterval(pred, p, Variable::Temperature, 1.0), ArgumentError);
}

TEST(Band, SingleComponentClosedForm) {
  FunctionalPrediction pred;
  pred.fpcsT = cosineFpcs(1);
  pred.fpcsS = cosineFpcs(1, Variable::Salinity);
  pred.dist.K1 = 1;
  pred.dist.K2 = 1;
  pred.dist.theta = Eigen::Vector2d(0.3, 0.0);
  const double lambda = 2.5;
  pred.dist.Sigma = Eigen::Vector2d(lambda, 1.0).asDiagonal();
  const auto p = grid(9);
  const auto b = simultaneousBand(pred, p, Variable::Temperature, 10);
  const double chi = boost::math::quantile(boost::math::complement(boost::math::chi_squared(1), 0.02275));
  const double xi = std::sqrt(lambda) * chi;
  EXPECT_NEAR(b.xi, xi, 1e-12 * xi);
  EXPECT_EQ(b.components, 1);
  const Eigen::VectorXd phi = pred.fpcsT.evaluate(p).col(0);
  const Eigen::VectorXd mean = 0.3 * phi;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double half = std::sqrt(xi * std::sqrt(lambda) * phi(j) * phi(j));
    EXPECT_NEAR(b.hi(j) - mean(j), half, 1e-12);
    EXPECT_NEAR(mean(j) - b.lo(j), half, 1e-12);
  }
}

TEST(Band, ZeroVarianceComponentsDropped) {
  FunctionalPrediction pred;
  pred.fpcsT = cosineFpcs(3);
  pred.fpcsS = cosineFpcs(1, Variable::Salinity);
  pred.dist.K1 = 3;
  pred.dist.K2 = 1;
  pred.dist.theta = Eigen::VectorXd::Zero(4);
  pred.dist.Sigma = Eigen::Vector4d(1.0, 0.0, 1e-14, 1.0).asDiagonal();
  const auto b = simultaneousBand(pred, grid(5), Variable::Temperature, 5);
  EXPECT_EQ(b.components, 1);
  EXPECT_TRUE(b.hi.allFinite());
  pred.dist.Sigma.setZero();
  const auto z = simultaneousBand(pred, grid(5), Variable::Temperature, 5);
  EXPECT_EQ(z.components, 0);
  EXPECT_EQ((z.hi - z.lo).norm(), 0.0);
}

TEST(Band, ContainsPointwiseInterval) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const SpatialFieldModel m = makeModel(rng, 4, 3);
    ScoreSet nb;
    for (int i = 0; i < 15; ++i) nb.push_back(randomProfile(rng, "p" + std::to_string(i), 4, 3, i % 2 == 0));
    FunctionalPrediction pred;
    pred.fpcsT = m.fpcsT;
    pred.fpcsS = m.fpcsS;
    pred.kappaT = constantKappa(0.05 * (trial + 1));
    pred.kappaS = constantKappa(0.01);
    pred.dist = conditionalScoreDistribution(m, nb, {kCenter, 45.0, 2010});
    const auto p = grid(60);
    for (Variable v : {Variable::Temperature, Variable::Salinity}) {
      const auto iv = pointwiseInterval(pred, p, v, 0.0455);
      const auto b = simultaneousBand(pred, p, v, 60);
      EXPECT_TRUE((b.lo.array() <= iv.lo.array()).all()) << trial;
      EXPECT_TRUE((b.hi.array() >= iv.hi.array()).all()) << trial;
    }
  }
}

TEST(Simulation, DegenerateCovariance) {
  ConditionalScoreDist d;
  d.K1 = 2;
  d.K2 = 1;
  d.theta = Eigen::Vector3d(1.0, -2.0, 0.5);
  d.Sigma = Eigen::MatrixXd::Zero(3, 3);
  const Eigen::MatrixXd draws = conditionalSimulate(d, 50, 1);
  for (int b = 0; b < 50; ++b) EXPECT_EQ(draws.row(b).transpose(), d.theta);
}

TEST(Simulation, MomentsMatch) {
  std::mt19937_64 rng(10);
  const SpatialFieldModel m = makeModel(rng, 2, 2);
  ScoreSet nb;
  for (int i = 0; i < 10; ++i) nb.push_back(randomProfile(rng, "p" + std::to_string(i), 2, 2, true));
  const auto d = conditionalScoreDistribution(m, nb, {kCenter, 45.0, 2010});
  const int B = 100000;
  const Eigen::MatrixXd x = conditionalSimulate(d, B, 77);
  const Eigen::VectorXd mean = x.colwise().mean();
  for (int k = 0; k < 4; ++k) EXPECT_LE(std::abs(mean(k) - d.theta(k)), 4.0 * std::sqrt(d.Sigma(k, k) / B)) << k;
  const Eigen::MatrixXd c = x.rowwise() - mean.transpose();
  const Eigen::MatrixXd S = c.transpose() * c / (B - 1);
  EXPECT_LE((S - d.Sigma).norm() / d.Sigma.norm(), 0.05);
  EXPECT_EQ(conditionalSimulate(d, 10, 77), x.topRows(10));
}

TEST(Simulation, SingularCovarianceFallsBack) {
  ConditionalScoreDist d;
  d.K1 = 1;
  d.K2 = 1;
  d.theta = Eigen::Vector2d(0.0, 0.0);
  d.Sigma = Eigen::MatrixXd::Ones(2, 2);
  const Eigen::MatrixXd x = conditionalSimulate(d, 1000, 3);
  EXPECT_LE((x.col(0) - x.col(1)).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_GT(x.col(0).cwiseAbs().maxCoeff(), 0.5);
}

TEST(StandardLevels, BinEdges) {
  const auto levels = standardPressureLevels();
  EXPECT_EQ(levels.size(), 58u);
  const auto e = standardLevelEdges();
  EXPECT_EQ(e.size(), 59u);
  auto has = [&](double lo, double hi) {
    for (std::size_t i = 0; i + 1 < e.size(); ++i)
      if (e[i] == lo && e[i + 1] == hi) return true;
    return false;
  };
  EXPECT_TRUE(has(6.25, 15));
  EXPECT_TRUE(has(290, 310));
  EXPECT_TRUE(has(1456.25, 1550));
  EXPECT_EQ(e.front(), 0.0);
  EXPECT_EQ(e.back(), 2000.0);
}

namespace {

struct CvScenario {
  std::vector<CvModel> models;
  ScoreSet scores;
  ResidualProfileSet residualsT, residualsS;
  std::map<std::string, Eigen::VectorXd> truthT;
};

// Scores drawn from the model itself; curves observed with constant noise.
CvScenario cvScenario(std::uint64_t seed, int n, int m, double noiseT, double noiseS, bool processOn = true) {
  std::mt19937_64 rng(seed);
  CvScenario sc;
  SpatialFieldModel model = makeModel(rng, 2, 2);
  std::vector<SiteCoord> sites;
  for (int i = 0; i < n; ++i) {
    sc.scores.push_back(randomProfile(rng, "p" + std::to_string(i), 2, 2, i % 3 != 0));
    sites.push_back(siteCoord(model.center, sc.scores.back().location, sc.scores.back().day));
  }
  Eigen::MatrixXd X(n, 4);
  std::normal_distribution<double> z;
  for (int k = 0; k < 4; ++k) {
    const Eigen::MatrixXd C = maternMatrix(sites, sites, model.params[k], model.nu, true);
    Eigen::VectorXd e(n);
    for (auto& v : e) v = z(rng);
    X.col(k) = processOn ? Eigen::VectorXd(Eigen::LLT<Eigen::MatrixXd>(C).matrixL() * e) : Eigen::VectorXd::Zero(n);
  }
  if (!processOn)
    for (auto& p : model.params) p.gamma = p.sigma2 = 1e-12;
  std::uniform_real_distribution<double> up(0.0, 2000.0);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd zw = model.transform.backward(X.row(i).transpose());
    ScoredProfile& s = sc.scores[i];
    s.Z = zw.head(2);
    if (s.W) s.W = zw.tail(2);
    sc.truthT[s.id] = s.Z;
    std::vector<double> p;
    for (int j = 0; j < m; ++j) p.push_back(up(rng));
    std::sort(p.begin(), p.end());
    for (int v = 0; v < 2; ++v) {
      const FpcBasis& f = v == 0 ? model.fpcsT : model.fpcsS;
      if (v == 1 && !s.W) continue;
      const Eigen::VectorXd curve = f.evaluate(p) * (v == 0 ? zw.head(2) : zw.tail(2));
      ResidualProfile r;
      r.id = s.id;
      r.location = s.location;
      r.day = s.day;
      r.year = s.year;
      r.mode = s.mode;
      r.pressure = p;
      for (int j = 0; j < m; ++j) r.value.push_back(curve(j) + (v == 0 ? noiseT : noiseS) * z(rng));
      (v == 0 ? sc.residualsT : sc.residualsS).push_back(r);
    }
  }
  CvModel cm;
  cm.model = model;
  cm.kappaT = constantKappa(std::max(noiseT * noiseT, 1e-300));
  cm.kappaS = constantKappa(std::max(noiseS * noiseS, 1e-300));
  sc.models.push_back(cm);
  return sc;
}

}  // namespace

TEST(CrossValidate, OracleScoresRecoverTheNoiseLevel) {
  auto sc = cvScenario(11, 150, 40, 0.2, 0.05);
  CvConfig cfg;
  cfg.oracle = [&](const ResidualProfile& r) -> std::optional<Eigen::VectorXd> { return sc.truthT.at(r.id); };
  const auto res = crossValidate(sc.models, sc.scores, sc.residualsT, cfg);
  EXPECT_EQ(res.summary.profiles, 150);
  EXPECT_EQ(res.summary.measurements, 6000);
  EXPECT_NEAR(res.summary.rmse / 0.2, 1.0, 0.05);
}

TEST(CrossValidate, NoiseFreeNoProcessIsExact) {
  auto sc = cvScenario(12, 40, 10, 0.0, 0.0, false);
  const auto res = crossValidate(sc.models, sc.scores, sc.residualsT);
  EXPECT_EQ(res.summary.profiles, 40);
  EXPECT_LE(res.summary.rmse, 1e-10);
}

TEST(CrossValidate, CoverageNearNominal) {
  auto sc = cvScenario(13, 400, 15, 0.3, 0.05);
  CvConfig cfg;
  cfg.threads = 4;
  const auto t = crossValidate(sc.models, sc.scores, sc.residualsT, cfg);
  EXPECT_EQ(t.summary.measurements, 6000);
  EXPECT_NEAR(t.summary.coverage, 0.9545, 0.015);
  EXPECT_GE(t.summary.bandCoverage, 0.93);
  cfg.variable = Variable::Salinity;
  const auto s = crossValidate(sc.models, sc.scores, sc.residualsS, cfg);
  EXPECT_EQ(s.summary.profiles, static_cast<long>(sc.residualsS.size()));
  EXPECT_NEAR(s.summary.coverage, 0.9545, 0.02);
  // per-bin summaries add up
  long total = 0;
  for (const auto& b : t.summary.levelBins) total += b.count;
  EXPECT_EQ(total, 6000);
  total = 0;
  for (const auto& b : t.summary.coverageBins) total += b.count;
  EXPECT_EQ(total, 6000);
}

TEST(CrossValidate, ThreadsDoNotChangeResults) {
  auto sc = cvScenario(14, 60, 8, 0.2, 0.05);
  CvConfig one, four;
  four.threads = 4;
  const auto a = crossValidate(sc.models, sc.scores, sc.residualsT, one);
  const auto b = crossValidate(sc.models, sc.scores, sc.residualsT, four);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].predicted, b.records[i].predicted);
}

TEST(CrossValidate, LonelyProfilesAreSkipped) {
  auto sc = cvScenario(15, 20, 8, 0.2, 0.05);
  sc.scores[3].year = 2012;
  sc.residualsT[3].year = 2012;
  const auto res = crossValidate(sc.models, sc.scores, sc.residualsT);
  EXPECT_EQ(res.summary.skipped, 1);
  EXPECT_EQ(res.summary.profiles, 19);
}
