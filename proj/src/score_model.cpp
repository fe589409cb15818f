#include "fdakrig/score_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "fdakrig/errors.hpp"
#include "fdakrig/log.hpp"
#include "fdakrig/rng.hpp"

namespace fdakrig {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// -dM/dr
double maternSlope(double nu, double r) {
  if (r <= 0.0) return nu == 0.5 ? 1.0 : 0.0;
  if (nu == 0.5) return std::exp(-r);
  const double c = std::pow(2.0, 1.0 - nu) / boost::math::tgamma(nu);
  return c * std::pow(r, nu) * boost::math::cyl_bessel_k(std::abs(nu - 1.0), r);
}

double scaledDistance(const SpaceTimeLag& lag, const MaternParams& p) {
  const double a = lag.ds1 / p.theta_s1, b = lag.ds2 / p.theta_s2, c = lag.dd / p.theta_d;
  return std::sqrt(a * a + b * b + c * c);
}

// LLT of a covariance block, with one jittered retry.
Eigen::LLT<Eigen::MatrixXd> choleskyWithJitter(Eigen::MatrixXd& S, double jitter, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() == Eigen::Success) return llt;
  S.diagonal().array() += jitter;
  llt.compute(S);
  if (llt.info() != Eigen::Success) throw LikelihoodError(std::string(what) + ": covariance not positive definite");
  return llt;
}

}  // namespace

std::optional<Eigen::VectorXd> estimateScores(std::span<const double> pressures, std::span<const double> values,
                                              const FpcBasis& fpcs, double maxCondition) {
  if (pressures.size() != values.size()) throw ArgumentError("estimateScores: pressure and value lengths differ");
  const int K = fpcs.count();
  if (static_cast<int>(pressures.size()) < K || K == 0) return std::nullopt;
  const Eigen::MatrixXd phi = fpcs.evaluate(pressures);
  const Eigen::MatrixXd g = phi.transpose() * phi;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(K - 1);
  if (!(lo > 0.0) || hi / lo > maxCondition) return std::nullopt;
  const Eigen::Map<const Eigen::VectorXd> y(values.data(), static_cast<Eigen::Index>(values.size()));
  return Eigen::VectorXd(g.ldlt().solve(phi.transpose() * y));
}

std::optional<Eigen::VectorXd> estimateScores(const ResidualProfile& residual, const FpcBasis& fpcs,
                                              double maxCondition) {
  return estimateScores(residual.pressure, residual.value, fpcs, maxCondition);
}

ScoreSet buildScoreSet(const ResidualProfileSet& temperature, const FpcBasis& fpcsT,
                       const ResidualProfileSet& salinity, const FpcBasis& fpcsS, ScoreSetSummary* summary) {
  std::unordered_map<std::string, const ResidualProfile*> byId;
  for (const auto& r : salinity) byId.emplace(r.id, &r);
  ScoreSetSummary sum;
  ScoreSet out;
  for (const auto& r : temperature) {
    auto z = estimateScores(r, fpcsT);
    if (!z) {
      ++sum.rejectedTemperature;
      continue;
    }
    ScoredProfile s;
    s.id = r.id;
    s.location = r.location;
    s.day = r.day;
    s.year = r.year;
    s.mode = r.mode;
    s.Z = std::move(*z);
    if (r.mode == ProfileMode::Delayed) {
      const auto it = byId.find(r.id);
      if (it != byId.end()) {
        s.W = estimateScores(*it->second, fpcsS);
        if (!s.W) ++sum.rejectedSalinity;
      }
    }
    out.push_back(std::move(s));
  }
  if (summary) *summary = sum;
  return out;
}

Eigen::VectorXd DecorrelationTransform::forward(const Eigen::VectorXd& z, const Eigen::VectorXd& w) const {
  if (z.size() != K1 || w.size() != K2) throw ArgumentError("DecorrelationTransform: score dimensions differ");
  Eigen::VectorXd x(K1 + K2);
  x << z, w;
  return V.transpose() * x;
}

Eigen::VectorXd DecorrelationTransform::backward(const Eigen::VectorXd& x) const { return V * x; }

DecorrelationTransform decorrelateScores(const ScoreSet& scores) {
  int K1 = -1, K2 = -1;
  std::vector<const ScoredProfile*> d;
  for (const auto& s : scores)
    if (s.W) {
      d.push_back(&s);
      K1 = static_cast<int>(s.Z.size());
      K2 = static_cast<int>(s.W->size());
    }
  const int K = K1 + K2;
  if (d.empty() || static_cast<int>(d.size()) < K + 1) {
    std::ostringstream os;
    os << "decorrelateScores: " << d.size() << " profiles with salinity scores, need " << std::max(K, 0) + 1;
    throw InsufficientDataError(os.str());
  }
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd x(K);
  for (const ScoredProfile* s : d) {
    if (s->Z.size() != K1 || s->W->size() != K2) throw ArgumentError("decorrelateScores: inconsistent score dimensions");
    x << s->Z, *s->W;
    S.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  S = S.selfadjointView<Eigen::Lower>();
  S /= static_cast<double>(d.size() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  DecorrelationTransform t;
  t.K1 = K1;
  t.K2 = K2;
  t.V.resize(K, K);
  t.gamma.resize(K);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd v = es.eigenvectors().col(K - 1 - k);
    Eigen::Index big;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0.0) v = -v;
    t.V.col(k) = v;
    t.gamma(k) = std::max(0.0, es.eigenvalues()(K - 1 - k));
  }
  return t;
}

Eigen::VectorXd MaternParams::toLog() const {
  Eigen::VectorXd x(5);
  x << std::log(gamma), std::log(theta_s1), std::log(theta_s2), std::log(theta_d), std::log(sigma2);
  return x;
}

MaternParams MaternParams::fromLog(const Eigen::VectorXd& x) {
  if (x.size() != 5) throw ArgumentError("MaternParams::fromLog: five log parameters required");
  return {std::exp(x(0)), std::exp(x(1)), std::exp(x(2)), std::exp(x(3)), std::exp(x(4))};
}

bool MaternParams::valid() const {
  return gamma > 0.0 && theta_s1 > 0.0 && theta_s2 > 0.0 && theta_d > 0.0 && sigma2 > 0.0 && std::isfinite(gamma) &&
         std::isfinite(theta_s1) && std::isfinite(theta_s2) && std::isfinite(theta_d) && std::isfinite(sigma2);
}

double maternCorrelation(double nu, double r) {
  if (!(nu > 0.0)) throw ArgumentError("maternCorrelation: nu must be positive");
  r = std::abs(r);
  if (r == 0.0) return 1.0;
  if (nu == 0.5) return std::exp(-r);
  if (r > 700.0) return 0.0;
  const double c = std::pow(2.0, 1.0 - nu) / boost::math::tgamma(nu);
  return c * std::pow(r, nu) * boost::math::cyl_bessel_k(nu, r);
}

double maternCovariance(const SpaceTimeLag& lag, const MaternParams& params, double nu, bool samePoint) {
  const double c = params.gamma * maternCorrelation(nu, scaledDistance(lag, params));
  return samePoint ? c + params.sigma2 : c;
}

SiteCoord siteCoord(const GeoPoint& origin, const GeoPoint& location, double day) {
  const Displacement d = localDisplacement(origin, location);
  return {d.east, d.north, day};
}

SpaceTimeLag lagBetween(const SiteCoord& a, const SiteCoord& b) {
  return {a.east - b.east, a.north - b.north, dayDifference(a.day, b.day)};
}

Eigen::MatrixXd maternMatrix(std::span<const SiteCoord> a, std::span<const SiteCoord> b, const MaternParams& params,
                             double nu, bool sameSet) {
  const auto na = static_cast<Eigen::Index>(a.size()), nb = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd C(na, nb);
  if (sameSet) {
    for (Eigen::Index j = 0; j < nb; ++j) {
      C(j, j) = params.gamma + params.sigma2;
      for (Eigen::Index i = j + 1; i < na; ++i) C(i, j) = C(j, i) = maternCovariance(lagBetween(a[i], b[j]), params, nu, false);
    }
    return C;
  }
  for (Eigen::Index j = 0; j < nb; ++j)
    for (Eigen::Index i = 0; i < na; ++i) C(i, j) = maternCovariance(lagBetween(a[i], b[j]), params, nu, false);
  return C;
}

double negLogLikelihood(const ComponentData& data, const MaternParams& params, double nu, Eigen::VectorXd* gradLog) {
  if (!params.valid()) throw ArgumentError("negLogLikelihood: parameters must be positive and finite");
  double nll = 0.0;
  if (gradLog) gradLog->setZero(5);
  for (const YearBlock& blk : data) {
    const auto n = static_cast<Eigen::Index>(blk.sites.size());
    if (n == 0) continue;
    if (blk.values.size() != n) throw ArgumentError("negLogLikelihood: site and value counts differ");
    Eigen::MatrixXd S = maternMatrix(blk.sites, blk.sites, params, nu, true);
    const double jitter = 1e-8 * params.gamma;
    const bool jittered = Eigen::LLT<Eigen::MatrixXd>(S).info() != Eigen::Success;
    const Eigen::LLT<Eigen::MatrixXd> llt = choleskyWithJitter(S, jitter, "negLogLikelihood");
    const Eigen::MatrixXd& L = llt.matrixLLT();
    const double logdet = 2.0 * L.diagonal().array().log().sum();
    const Eigen::VectorXd alpha = llt.solve(blk.values);
    nll += 0.5 * (logdet + blk.values.dot(alpha) + static_cast<double>(n) * kLog2Pi);
    if (!gradLog) continue;
    // d nll = 1/2 sum_ij (S^-1 - alpha alpha^T)_ij dS_ij
    Eigen::MatrixXd Wm = llt.solve(Eigen::MatrixXd::Identity(n, n));
    Wm.noalias() -= alpha * alpha.transpose();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(5);
    for (Eigen::Index j = 0; j < n; ++j) {
      g(0) += 0.5 * Wm(j, j) * (params.gamma + (jittered ? jitter : 0.0));
      g(4) += 0.5 * Wm(j, j) * params.sigma2;
      for (Eigen::Index i = j + 1; i < n; ++i) {
        const SpaceTimeLag lag = lagBetween(blk.sites[i], blk.sites[j]);
        const double a = lag.ds1 / params.theta_s1, b = lag.ds2 / params.theta_s2, c = lag.dd / params.theta_d;
        const double r = std::sqrt(a * a + b * b + c * c);
        const double w = Wm(i, j);  // counted twice by symmetry
        g(0) += w * params.gamma * maternCorrelation(nu, r);
        if (r > 0.0) {
          const double s = params.gamma * maternSlope(nu, r) / r;
          g(1) += w * s * a * a;
          g(2) += w * s * b * b;
          g(3) += w * s * c * c;
        }
      }
    }
    *gradLog += g;
  }
  return nll;
}

MaternBounds MaternBounds::standard() {
  MaternBounds b;
  b.lower.resize(5);
  b.upper.resize(5);
  b.lower << -10.0, std::log(10.0), std::log(10.0), std::log(0.5), -12.0;
  b.upper << 10.0, std::log(1e4), std::log(1e4), std::log(365.0), 8.0;
  return b;
}

MaternParams defaultMaternInit(const ComponentData& data) {
  double ss = 0.0;
  long n = 0;
  for (const auto& b : data) {
    ss += b.values.squaredNorm();
    n += b.values.size();
  }
  const double v = n > 0 && ss > 0.0 ? ss / static_cast<double>(n) : 1.0;
  return {0.9 * v, 500.0, 500.0, 20.0, 0.1 * v};
}

MaternFit fitMatern(const ComponentData& data, const MaternFitConfig& config, std::optional<MaternParams> init) {
  long n = 0;
  for (const auto& b : data) n += static_cast<long>(b.sites.size());
  if (n < config.minProfiles) {
    std::ostringstream os;
    os << "fitMatern: " << n << " scored profiles, need " << config.minProfiles;
    throw InsufficientDataError(os.str());
  }
  const Eigen::VectorXd& lo = config.bounds.lower;
  const Eigen::VectorXd& hi = config.bounds.upper;
  const GradientObjective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    return negLogLikelihood(data, MaternParams::fromLog(x), config.nu, g);
  };

  std::optional<BoxMinimizeResult> best;
  std::string lastError;
  int starts = 0;
  auto attempt = [&](const Eigen::VectorXd& x0) {
    ++starts;
    try {
      BoxMinimizeResult r = minimizeBox(f, x0.cwiseMax(lo).cwiseMin(hi), lo, hi, config.optimizer);
      if (!best || r.value < best->value) best = std::move(r);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numerical) throw;
      lastError = e.what();
    }
  };
  const Eigen::VectorXd x0 = (init ? *init : defaultMaternInit(data)).toLog();
  attempt(x0);
  if (!best || !best->converged) {
    std::mt19937_64 rng = makeStream(config.seed, {0x7e57a7ULL});
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd x1 = x0;
    for (Eigen::Index i = 0; i < x1.size(); ++i) x1(i) += u(rng);
    attempt(x1);
  }
  if (!best) throw FitFailure("fitMatern: every start failed (" + lastError + ")");
  MaternFit out;
  out.params = MaternParams::fromLog(best->x);
  out.nll = best->value;
  out.iterations = best->iterations;
  out.converged = best->converged;
  out.starts = starts;
  if (!out.converged) {
    std::ostringstream os;
    os << "fitMatern: not converged after " << starts << " starts, projected gradient " << best->projectedGradient;
    logWarn(os.str());
  }
  return out;
}

LatentPosterior conditionLatent(std::span<const MaternParams> params, double nu, const DecorrelationTransform& transform,
                                const LatentConditioningInput& input, bool withCovariance) {
  const int K = transform.size();
  const int K1 = transform.K1;
  if (static_cast<int>(params.size()) != K) throw ArgumentError("conditionLatent: one parameter set per component required");
  const auto nF = static_cast<Eigen::Index>(input.full.size());
  const auto nP = static_cast<Eigen::Index>(input.partial.size());
  const auto nT = static_cast<Eigen::Index>(input.targets.size());
  if (input.fullValues.rows() != nF || (nF > 0 && input.fullValues.cols() != K))
    throw ArgumentError("conditionLatent: full values must be one K-row per site");
  if (input.partialZ.rows() != nP || (nP > 0 && input.partialZ.cols() != K1))
    throw ArgumentError("conditionLatent: partial values must be one K1-row per site");

  std::vector<SiteCoord> U(input.partial);
  U.insert(U.end(), input.targets.begin(), input.targets.end());
  const Eigen::Index nU = nP + nT;

  // stage 1: each component given the fully observed sites
  std::vector<Eigen::VectorXd> mu(K);
  std::vector<Eigen::MatrixXd> S(K);
  for (int k = 0; k < K; ++k) {
    const MaternParams& p = params[k];
    S[k] = maternMatrix(U, U, p, nu, true);
    if (nF == 0) {
      mu[k] = Eigen::VectorXd::Zero(nU);
      continue;
    }
    Eigen::MatrixXd Cff = maternMatrix(input.full, input.full, p, nu, true);
    const Eigen::MatrixXd Cuf = maternMatrix(U, input.full, p, nu, false);
    const auto llt = choleskyWithJitter(Cff, 1e-8 * p.gamma, "conditionLatent");
    mu[k] = Cuf * llt.solve(input.fullValues.col(k));
    const Eigen::MatrixXd H = llt.matrixL().solve(Cuf.transpose());
    S[k].noalias() -= H.transpose() * H;
  }

  LatentPosterior out;
  out.partialMean.resize(nP, K);
  out.targetMean.resize(nT, K);
  for (int k = 0; k < K; ++k) {
    out.partialMean.col(k) = mu[k].head(nP);
    out.targetMean.col(k) = mu[k].tail(nT);
  }
  if (withCovariance) {
    out.targetCov.assign(nT, Eigen::MatrixXd::Zero(K, K));
    for (Eigen::Index t = 0; t < nT; ++t)
      for (int k = 0; k < K; ++k) out.targetCov[t](k, k) = S[k](nP + t, nP + t);
  }
  if (nP == 0) return out;

  // stage 2: joint conditioning on Z_r = V1 x_r at the partial sites
  const Eigen::MatrixXd V1 = transform.V.topRows(K1);
  const Eigen::Index m = nP * K1;
  Eigen::MatrixXd A(m, m);
  for (Eigen::Index r2 = 0; r2 < nP; ++r2)
    for (Eigen::Index r1 = r2; r1 < nP; ++r1) {
      Eigen::VectorXd d(K);
      for (int k = 0; k < K; ++k) d(k) = S[k](r1, r2);
      const Eigen::MatrixXd blk = V1 * d.asDiagonal() * V1.transpose();
      A.block(r1 * K1, r2 * K1, K1, K1) = blk;
      A.block(r2 * K1, r1 * K1, K1, K1) = blk.transpose();
    }
  Eigen::VectorXd resid(m);
  for (Eigen::Index r = 0; r < nP; ++r) {
    Eigen::VectorXd x(K);
    for (int k = 0; k < K; ++k) x(k) = mu[k](r);
    resid.segment(r * K1, K1) = input.partialZ.row(r).transpose() - V1 * x;
  }
  const auto llt = choleskyWithJitter(A, 1e-10 * std::max(1e-300, A.diagonal().mean()), "conditionLatent");
  const Eigen::VectorXd sol = llt.solve(resid);

  // B(u, k) rows: covariance of x_k(u) with the constraint vector
  auto crossRow = [&](Eigen::Index u, int k) {
    Eigen::VectorXd row(m);
    for (Eigen::Index r = 0; r < nP; ++r) row.segment(r * K1, K1) = S[k](u, r) * V1.col(k);
    return row;
  };
  for (Eigen::Index u = 0; u < nU; ++u)
    for (int k = 0; k < K; ++k) {
      const double delta = crossRow(u, k).dot(sol);
      if (u < nP)
        out.partialMean(u, k) += delta;
      else
        out.targetMean(u - nP, k) += delta;
    }
  if (withCovariance) {
    for (Eigen::Index t = 0; t < nT; ++t) {
      Eigen::MatrixXd B(m, K);
      for (int k = 0; k < K; ++k) B.col(k) = crossRow(nP + t, k);
      const Eigen::MatrixXd H = llt.matrixL().solve(B);
      out.targetCov[t].noalias() -= H.transpose() * H;
      out.targetCov[t] = 0.5 * (out.targetCov[t] + out.targetCov[t].transpose()).eval();
    }
  }
  return out;
}

std::vector<ComponentData> componentData(const ScoreSet& scores, const GeoPoint& origin,
                                         const Eigen::MatrixXd& decorrelated) {
  if (decorrelated.rows() != static_cast<Eigen::Index>(scores.size()))
    throw ArgumentError("componentData: one row of decorrelated scores per profile required");
  const auto K = static_cast<int>(decorrelated.cols());
  std::map<int, std::vector<std::size_t>> byYear;
  for (std::size_t i = 0; i < scores.size(); ++i) byYear[scores[i].year].push_back(i);
  std::vector<ComponentData> out(K);
  for (const auto& [year, idx] : byYear) {
    std::vector<SiteCoord> sites;
    for (std::size_t i : idx) sites.push_back(siteCoord(origin, scores[i].location, scores[i].day));
    for (int k = 0; k < K; ++k) {
      YearBlock b;
      b.year = year;
      b.sites = sites;
      b.values.resize(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) b.values(static_cast<Eigen::Index>(j)) = decorrelated(idx[j], k);
      out[k].push_back(std::move(b));
    }
  }
  return out;
}

namespace {

Eigen::VectorXd stacked(const std::vector<MaternParams>& ps) {
  Eigen::VectorXd v(5 * ps.size());
  for (std::size_t k = 0; k < ps.size(); ++k)
    v.segment(5 * k, 5) << ps[k].gamma, ps[k].theta_s1, ps[k].theta_s2, ps[k].theta_d, ps[k].sigma2;
  return v;
}

std::vector<MaternParams> mStep(const std::vector<ComponentData>& data, const EmConfig& config, int iteration,
                                const std::vector<MaternParams>* warm) {
  std::vector<MaternParams> out(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    MaternFitConfig cfg = config.fit;
    cfg.seed = streamSeed(config.fit.seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(iteration)});
    try {
      out[k] = fitMatern(data[k], cfg, warm ? std::optional<MaternParams>((*warm)[k]) : std::nullopt).params;
    } catch (const FitFailure& e) {
      std::ostringstream os;
      os << "EM iteration " << iteration << ", component " << k << ": " << e.what();
      throw FitFailure(os.str());
    }
  }
  return out;
}

}  // namespace

EmResult emFitMissingSalinity(const ScoreSet& scores, const DecorrelationTransform& transform, const GeoPoint& origin,
                              const EmConfig& config) {
  const int K = transform.size();
  const auto N = static_cast<Eigen::Index>(scores.size());
  Eigen::MatrixXd X(N, K);
  std::vector<Eigen::Index> missing;
  for (Eigen::Index i = 0; i < N; ++i) {
    const ScoredProfile& s = scores[i];
    if (s.W) {
      X.row(i) = transform.forward(s.Z, *s.W).transpose();
    } else {
      X.row(i) = transform.forward(s.Z, Eigen::VectorXd::Zero(transform.K2)).transpose();
      missing.push_back(i);
    }
  }
  EmResult res;
  if (missing.empty() || config.iterations <= 1) {
    res.params = mStep(componentData(scores, origin, X), config, 1, nullptr);
    res.history.push_back(res.params);
    res.completed = X;
    return res;
  }

  std::map<int, std::vector<Eigen::Index>> byYear;
  for (Eigen::Index i = 0; i < N; ++i) byYear[scores[i].year].push_back(i);

  std::vector<MaternParams> params;
  for (int it = 1; it <= config.iterations; ++it) {
    if (it > 1) {
      for (const auto& [year, idx] : byYear) {
        LatentConditioningInput in;
        std::vector<Eigen::Index> full, part;
        for (Eigen::Index i : idx) (scores[i].W ? full : part).push_back(i);
        if (part.empty()) continue;
        in.fullValues.resize(static_cast<Eigen::Index>(full.size()), K);
        in.partialZ.resize(static_cast<Eigen::Index>(part.size()), transform.K1);
        for (std::size_t j = 0; j < full.size(); ++j) {
          in.full.push_back(siteCoord(origin, scores[full[j]].location, scores[full[j]].day));
          in.fullValues.row(static_cast<Eigen::Index>(j)) = X.row(full[j]);
        }
        for (std::size_t j = 0; j < part.size(); ++j) {
          in.partial.push_back(siteCoord(origin, scores[part[j]].location, scores[part[j]].day));
          in.partialZ.row(static_cast<Eigen::Index>(j)) = scores[part[j]].Z.transpose();
        }
        const LatentPosterior post = conditionLatent(params, config.fit.nu, transform, in, false);
        for (std::size_t j = 0; j < part.size(); ++j) X.row(part[j]) = post.partialMean.row(static_cast<Eigen::Index>(j));
      }
    }
    std::vector<MaternParams> next = mStep(componentData(scores, origin, X), config, it, it > 1 ? &params : nullptr);
    if (it > 1) {
      const Eigen::VectorXd a = stacked(params), b = stacked(next);
      res.relativeChange.push_back((b - a).norm() / a.norm());
    }
    params = std::move(next);
    res.history.push_back(params);
  }
  res.params = params;
  res.completed = X;
  return res;
}

}  // namespace fdakrig
