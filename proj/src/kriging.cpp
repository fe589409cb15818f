#include "fdakrig/kriging.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "fdakrig/errors.hpp"
#include "fdakrig/imhof.hpp"
#include "fdakrig/log.hpp"
#include "fdakrig/rng.hpp"

namespace fdakrig {

Eigen::VectorXd ConditionalScoreDist::mean(Variable v) const {
  return v == Variable::Temperature ? theta.head(K1) : theta.tail(K2);
}

Eigen::MatrixXd ConditionalScoreDist::cov(Variable v) const {
  return v == Variable::Temperature ? Sigma.topLeftCorner(K1, K1) : Sigma.bottomRightCorner(K2, K2);
}

Eigen::MatrixXd ConditionalScoreDist::crossCov() const { return Sigma.topRightCorner(K1, K2); }

ConditionalScoreDist conditionalScoreDistribution(const SpatialFieldModel& model, const ScoreSet& neighbors,
                                                  const PredictionTarget& target, double radius) {
  const DecorrelationTransform& tr = model.transform;
  const GeoPoint& origin = model.center;
  LatentConditioningInput input;
  std::vector<Eigen::VectorXd> full;
  std::vector<Eigen::VectorXd> partial;
  for (const ScoredProfile& s : neighbors) {
    if (s.year != target.year || greatCircleDistance(s.location, target.location) > radius) continue;
    if (s.Z.size() != tr.K1 || (s.W && s.W->size() != tr.K2))
      throw ArgumentError("conditionalScoreDistribution: score dimension mismatch for profile " + s.id);
    if (s.W) {
      input.full.push_back(siteCoord(origin, s.location, s.day));
      full.push_back(tr.forward(s.Z, *s.W));
    } else {
      input.partial.push_back(siteCoord(origin, s.location, s.day));
      partial.push_back(s.Z);
    }
  }
  input.fullValues.resize(static_cast<Eigen::Index>(full.size()), tr.size());
  for (std::size_t i = 0; i < full.size(); ++i) input.fullValues.row(static_cast<Eigen::Index>(i)) = full[i].transpose();
  input.partialZ.resize(static_cast<Eigen::Index>(partial.size()), tr.K1);
  for (std::size_t i = 0; i < partial.size(); ++i)
    input.partialZ.row(static_cast<Eigen::Index>(i)) = partial[i].transpose();
  input.targets.push_back(siteCoord(origin, target.location, target.day));

  const LatentPosterior post = conditionLatent(model.params, model.nu, tr, input, true);
  ConditionalScoreDist out;
  out.K1 = tr.K1;
  out.K2 = tr.K2;
  out.theta = tr.V * post.targetMean.row(0).transpose();
  out.Sigma = tr.V * post.targetCov[0] * tr.V.transpose();
  out.Sigma = 0.5 * (out.Sigma + out.Sigma.transpose()).eval();
  return out;
}

Eigen::VectorXd MeanCurve::evaluate(std::span<const double> pressures, int deriv) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(pressures.size()));
  for (std::size_t j = 0; j < pressures.size(); ++j)
    out(static_cast<Eigen::Index>(j)) = basis.evalFunction(coef, pressures[j], deriv);
  return out;
}

MeanCurve meanCurveAt(const MeanFit& fit, const PredictionTarget& target) {
  return MeanCurve{fit.basis, meanCoefficientsAt(fit, target.location, target.day, target.year)};
}

Eigen::VectorXd FunctionalPrediction::kappaAt(Variable v, std::span<const double> pressures) const {
  const auto& k = kappa(v);
  if (!k) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pressures.size()));
  return k->kappa(pressures);
}

Eigen::VectorXd predictMean(const FunctionalPrediction& pred, std::span<const double> pressures, Variable v,
                            bool fullScale, int deriv) {
  for (double p : pressures)
    if (!(p >= kPressureMin && p <= kPressureMax)) throw DomainError("predictFunction: pressure outside [0, 2000]");
  const FpcBasis& fpcs = pred.fpcs(v);
  const Eigen::VectorXd theta = pred.dist.mean(v);
  if (theta.size() != fpcs.count()) throw ArgumentError("predictFunction: score and FPC counts differ");
  Eigen::VectorXd mean = fpcs.evaluate(pressures, deriv) * theta;
  if (fullScale) {
    const auto& m = pred.meanCurve(v);
    if (!m) throw ArgumentError("predictFunction: full scale requested without a mean curve");
    mean += m->evaluate(pressures, deriv);
  }
  return mean;
}

CurvePrediction predictFunction(const FunctionalPrediction& pred, std::span<const double> pressures, Variable v,
                                bool fullScale, int deriv) {
  CurvePrediction out;
  out.mean = predictMean(pred, pressures, v, fullScale, deriv);
  const Eigen::MatrixXd Phi = pred.fpcs(v).evaluate(pressures, deriv);
  out.cov = Phi * pred.dist.cov(v) * Phi.transpose();
  return out;
}

namespace {

double upperNormal(double a) {
  return boost::math::quantile(boost::math::complement(boost::math::normal(), a));
}

}  // namespace

Interval pointwiseInterval(const FunctionalPrediction& pred, std::span<const double> pressures, Variable v,
                           double alpha, bool fullScale) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("pointwiseInterval: alpha must lie in (0, 1)");
  const CurvePrediction c = predictFunction(pred, pressures, v, fullScale);
  const Eigen::VectorXd var = c.cov.diagonal().cwiseMax(0.0) + pred.kappaAt(v, pressures);
  const Eigen::VectorXd half = upperNormal(alpha / 2.0) * var.cwiseSqrt();
  return Interval{c.mean - half, c.mean + half};
}

Band simultaneousBand(const FunctionalPrediction& pred, std::span<const double> pressures, Variable v, int m,
                      double alpha1, double alpha2, bool fullScale) {
  if (m < 1) throw ArgumentError("simultaneousBand: at least one measurement required");
  if (!(alpha1 > 0.0 && alpha1 < 1.0 && alpha2 > 0.0 && alpha2 < 1.0))
    throw ArgumentError("simultaneousBand: levels must lie in (0, 1)");
  const CurvePrediction c = predictFunction(pred, pressures, v, fullScale);
  const Eigen::VectorXd lambda = pred.dist.cov(v).diagonal();
  const double lmax = lambda.size() > 0 ? lambda.maxCoeff() : 0.0;
  std::vector<double> weights;
  std::vector<int> keep;
  for (Eigen::Index k = 0; k < lambda.size(); ++k)
    if (lambda(k) > 0.0 && lambda(k) > 1e-10 * lmax) {
      weights.push_back(std::sqrt(lambda(k)));
      keep.push_back(static_cast<int>(k));
    }
  Band out;
  out.components = static_cast<int>(keep.size());
  const auto n = static_cast<Eigen::Index>(pressures.size());
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  if (!keep.empty()) {
    out.xi = imhofQuantile(weights, alpha1);
    const Eigen::MatrixXd Phi = pred.fpcs(v).evaluate(pressures);
    for (std::size_t j = 0; j < keep.size(); ++j) r += weights[j] * Phi.col(keep[j]).array().square().matrix();
    r = (out.xi * r.array()).sqrt().matrix();
  }
  const Eigen::VectorXd u = upperNormal(alpha2 / (2.0 * m)) * pred.kappaAt(v, pressures).cwiseSqrt();
  out.lo = c.mean - r - u;
  out.hi = c.mean + r + u;
  return out;
}

Eigen::MatrixXd conditionalSimulate(const ConditionalScoreDist& dist, int B, std::uint64_t seed) {
  if (B < 0) throw ArgumentError("conditionalSimulate: negative draw count");
  const auto K = dist.theta.size();
  Eigen::MatrixXd L;
  Eigen::LLT<Eigen::MatrixXd> llt(dist.Sigma);
  if (llt.info() == Eigen::Success) {
    L = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dist.Sigma);
    L = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  std::mt19937_64 rng = makeStream(seed, {0x5111ULL});
  std::normal_distribution<double> z;
  Eigen::MatrixXd out(B, K);
  Eigen::VectorXd e(K);
  for (int b = 0; b < B; ++b) {
    for (Eigen::Index k = 0; k < K; ++k) e(k) = z(rng);
    out.row(b) = (dist.theta + L * e).transpose();
  }
  return out;
}

std::span<const double> standardPressureLevels() {
  static const std::vector<double> levels = [] {
    std::vector<double> v{2.5};
    for (double p = 10; p <= 170; p += 10) v.push_back(p);
    v.push_back(182.5);
    for (double p = 200; p <= 440; p += 20) v.push_back(p);
    v.push_back(462.5);
    for (double p = 500; p <= 1350; p += 50) v.push_back(p);
    v.push_back(1412.5);
    for (double p = 1500; p <= 1900; p += 100) v.push_back(p);
    v.push_back(1975);
    return v;
  }();
  return levels;
}

std::vector<double> standardLevelEdges() {
  const auto levels = standardPressureLevels();
  std::vector<double> edges{kPressureMin};
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) edges.push_back(0.5 * (levels[i] + levels[i + 1]));
  edges.push_back(kPressureMax);
  return edges;
}

namespace {

std::size_t nearestModel(std::span<const CvModel> models, const GeoPoint& p) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < models.size(); ++i) {
    const double d = greatCircleDistance(models[i].model.center, p);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

double quantile7(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<CvBin> binStats(std::span<const CvRecord> records, const std::vector<double>& edges) {
  const std::size_t nb = edges.size() - 1;
  std::vector<std::vector<double>> err(nb);
  std::vector<long> hit(nb, 0);
  for (const CvRecord& r : records)
    for (std::size_t j = 0; j < r.pressure.size(); ++j) {
      const double p = r.pressure[j];
      // (lo, hi] bins, the first one closed at zero
      auto it = std::lower_bound(edges.begin() + 1, edges.end(), p);
      const auto b = std::min<std::size_t>(static_cast<std::size_t>(it - edges.begin()) - 1, nb - 1);
      err[b].push_back(std::abs(r.observed[j] - r.predicted[j]));
      hit[b] += r.inInterval[j] ? 1 : 0;
    }
  std::vector<CvBin> out(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    CvBin& bin = out[b];
    bin.lo = edges[b];
    bin.hi = edges[b + 1];
    bin.count = static_cast<long>(err[b].size());
    if (bin.count == 0) continue;
    double ss = 0.0;
    for (double e : err[b]) ss += e * e;
    bin.rmse = std::sqrt(ss / static_cast<double>(bin.count));
    bin.coverage = static_cast<double>(hit[b]) / static_cast<double>(bin.count);
    bin.median = quantile7(err[b], 0.5);
    bin.q3 = quantile7(err[b], 0.75);
  }
  return out;
}

}  // namespace

CvSummary summarize(std::span<const CvRecord> records, long skipped) {
  CvSummary s;
  s.profiles = static_cast<long>(records.size());
  s.skipped = skipped;
  long hit = 0, band = 0;
  double ss = 0.0;
  for (const CvRecord& r : records) {
    s.measurements += static_cast<long>(r.pressure.size());
    for (std::size_t j = 0; j < r.pressure.size(); ++j) {
      hit += r.inInterval[j] ? 1 : 0;
      const double e = r.observed[j] - r.predicted[j];
      ss += e * e;
    }
    band += r.inBand ? 1 : 0;
  }
  if (s.measurements > 0) {
    s.coverage = static_cast<double>(hit) / static_cast<double>(s.measurements);
    s.rmse = std::sqrt(ss / static_cast<double>(s.measurements));
  }
  if (s.profiles > 0) s.bandCoverage = static_cast<double>(band) / static_cast<double>(s.profiles);
  std::vector<double> twenty;
  for (double p = kPressureMin; p <= kPressureMax + 1e-9; p += 20.0) twenty.push_back(p);
  s.coverageBins = binStats(records, twenty);
  s.levelBins = binStats(records, standardLevelEdges());
  return s;
}

CvResult crossValidate(std::span<const CvModel> models, const ScoreSet& scores, const ResidualProfileSet& residuals,
                       const CvConfig& config) {
  if (models.empty()) throw ArgumentError("crossValidate: no fitted models");
  const Variable v = config.variable;
  std::vector<const ResidualProfile*> held;
  for (const ResidualProfile& r : residuals) {
    if (v == Variable::Salinity && r.mode != ProfileMode::Delayed) continue;
    if (r.size() == 0) continue;
    held.push_back(&r);
  }
  if (config.maxProfiles >= 0 && static_cast<long>(held.size()) > config.maxProfiles)
    held.resize(static_cast<std::size_t>(config.maxProfiles));

  std::map<int, std::vector<std::size_t>> byYear;
  for (std::size_t i = 0; i < scores.size(); ++i) byYear[scores[i].year].push_back(i);

  std::vector<std::optional<CvRecord>> out(held.size());
  std::atomic<std::size_t> next{0};
  std::mutex errMutex;
  std::exception_ptr failure;

  auto work = [&] {
    for (std::size_t i = next++; i < held.size(); i = next++) {
      try {
        const ResidualProfile& r = *held[i];
        const std::size_t mi = nearestModel(models, r.location);
        const CvModel& cm = models[mi];
        const PredictionTarget target{r.location, r.day, r.year};
        FunctionalPrediction pred;
        pred.fpcsT = cm.model.fpcsT;
        pred.fpcsS = cm.model.fpcsS;
        pred.kappaT = cm.kappaT;
        pred.kappaS = cm.kappaS;
        CvRecord rec;
        rec.id = r.id;
        rec.model = mi;
        std::optional<Eigen::VectorXd> oracle;
        if (config.oracle) oracle = config.oracle(r);
        if (oracle) {
          const int K1 = cm.model.transform.K1, K2 = cm.model.transform.K2;
          pred.dist.K1 = K1;
          pred.dist.K2 = K2;
          pred.dist.theta = Eigen::VectorXd::Zero(K1 + K2);
          pred.dist.Sigma = Eigen::MatrixXd::Zero(K1 + K2, K1 + K2);
          if (v == Variable::Temperature)
            pred.dist.theta.head(K1) = *oracle;
          else
            pred.dist.theta.tail(K2) = *oracle;
        } else {
          ScoreSet nb;
          if (auto it = byYear.find(r.year); it != byYear.end())
            for (std::size_t j : it->second) {
              const ScoredProfile& s = scores[j];
              if (s.id == r.id || greatCircleDistance(s.location, r.location) > config.radius) continue;
              nb.push_back(s);
            }
          if (nb.empty()) {
            logInfo("crossValidate: profile " + r.id + " skipped, no neighbors in the same year");
            continue;
          }
          rec.neighbors = static_cast<int>(nb.size());
          pred.dist = conditionalScoreDistribution(cm.model, nb, target, config.radius);
        }
        const CurvePrediction c = predictFunction(pred, r.pressure, v);
        const Interval iv = pointwiseInterval(pred, r.pressure, v, config.alpha);
        const Band band = simultaneousBand(pred, r.pressure, v, static_cast<int>(r.size()), config.alpha1,
                                           config.alpha2);
        const Eigen::VectorXd kap = pred.kappaAt(v, r.pressure);
        rec.pressure = r.pressure;
        rec.observed = r.value;
        rec.inBand = true;
        for (std::size_t j = 0; j < r.size(); ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          rec.predicted.push_back(c.mean(jj));
          rec.sd.push_back(std::sqrt(std::max(0.0, c.cov(jj, jj)) + kap(jj)));
          const double y = r.value[j];
          rec.inInterval.push_back(y >= iv.lo(jj) && y <= iv.hi(jj));
          if (y < band.lo(jj) || y > band.hi(jj)) rec.inBand = false;
        }
        out[i] = std::move(rec);
      } catch (...) {
        std::lock_guard<std::mutex> lock(errMutex);
        if (!failure) failure = std::current_exception();
        next = held.size();
      }
    }
  };
  const int nt = std::max(1, config.threads);
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  CvResult result;
  long skipped = 0;
  for (auto& r : out)
    if (r)
      result.records.push_back(std::move(*r));
    else
      ++skipped;
  result.summary = summarize(result.records, skipped);
  return result;
}

}  // namespace fdakrig
