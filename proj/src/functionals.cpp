#include "fdakrig/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fdakrig/errors.hpp"
#include "fdakrig/log.hpp"

namespace fdakrig {

EquationOfState EquationOfState::toy(double a, double b, double c, double d) {
  EquationOfState e;
  e.theta = [a, b](double t, double s, double p) { return t - a * p * (1.0 + b * s); };
  e.sigma = [c, d](double t, double s, double) { return -c * t + d * s; };
  e.dThetaDt = [](double, double, double) { return 1.0; };
  e.dThetaDs = [a, b](double, double, double p) { return -a * b * p; };
  return e;
}

EquationOfState EquationOfState::identity(double c, double d) {
  EquationOfState e;
  e.theta = [](double t, double, double) { return t; };
  e.sigma = [c, d](double t, double s, double) { return -c * t + d * s; };
  e.dThetaDt = [](double, double, double) { return 1.0; };
  e.dThetaDs = [](double, double, double) { return 0.0; };
  return e;
}

GaussianSummary integralDistribution(const FunctionalPrediction& pred, Variable v, double lo, double hi) {
  if (!(lo >= kPressureMin && lo < hi && hi <= kPressureMax))
    throw DomainError("integralDistribution: need 0 <= lo < hi <= 2000");
  const FpcBasis& f = pred.fpcs(v);
  const Eigen::VectorXd a = f.coeffs * f.basis.integralVector(lo, hi);
  GaussianSummary out;
  out.mean = a.dot(pred.dist.mean(v));
  out.variance = std::max(0.0, a.dot(pred.dist.cov(v) * a));
  if (const auto& m = pred.meanCurve(v)) out.mean += m->basis.integralVector(lo, hi).dot(m->coef);
  return out;
}

GaussianSummary derivativeDistribution(const FunctionalPrediction& pred, Variable v, double p, int order) {
  if (order != 1 && order != 2) throw ArgumentError("derivativeDistribution: order must be 1 or 2");
  if (!(p > kPressureMin && p < kPressureMax)) throw DomainError("derivativeDistribution: pressure must be interior");
  const std::vector<double> one{p};
  const CurvePrediction c = predictFunction(pred, one, v, pred.meanCurve(v).has_value(), order);
  return GaussianSummary{c.mean(0), std::max(0.0, c.cov(0, 0))};
}

namespace {

// Row j holds the gradient-weighted FPC values [g_t phi_T(p_j), g_s phi_S(p_j)].
struct Linearization {
  Eigen::VectorXd mean;
  Eigen::MatrixXd J;
};

Linearization linearize(const FunctionalPrediction& pred, const BivariateMap& g, std::span<const double> pressures) {
  const Eigen::VectorXd tMean = predictMean(pred, pressures, Variable::Temperature, pred.meanT.has_value());
  const Eigen::VectorXd sMean = predictMean(pred, pressures, Variable::Salinity, pred.meanS.has_value());
  const Eigen::MatrixXd PhiT = pred.fpcsT.evaluate(pressures);
  const Eigen::MatrixXd PhiS = pred.fpcsS.evaluate(pressures);
  const auto m = static_cast<Eigen::Index>(pressures.size());
  const int K1 = pred.dist.K1, K2 = pred.dist.K2;
  Linearization out;
  out.mean.resize(m);
  out.J.resize(m, K1 + K2);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double p = pressures[static_cast<std::size_t>(j)];
    std::array<double, 2> grad{};
    try {
      out.mean(j) = g.value(tMean(j), sMean(j), p);
      grad = g.gradient(tMean(j), sMean(j), p);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "deltaMethod: evaluation failed at p = " << p << ": " << e.what();
      throw DomainError(os.str());
    }
    if (!std::isfinite(out.mean(j)) || !std::isfinite(grad[0]) || !std::isfinite(grad[1])) {
      std::ostringstream os;
      os << "deltaMethod: non-finite value or gradient at p = " << p;
      throw DomainError(os.str());
    }
    out.J.block(j, 0, 1, K1) = grad[0] * PhiT.row(j);
    out.J.block(j, K1, 1, K2) = grad[1] * PhiS.row(j);
  }
  return out;
}

}  // namespace

CurvePrediction deltaMethod(const FunctionalPrediction& pred, const BivariateMap& g,
                            std::span<const double> pressures) {
  const Linearization lin = linearize(pred, g, pressures);
  return CurvePrediction{lin.mean, lin.J * pred.dist.Sigma * lin.J.transpose()};
}

OhcGrid OhcGrid::uniform(double step, double pStar, double pStart) {
  if (!(step > 0.0) || !(pStar > pStart)) throw ArgumentError("OhcGrid: need step > 0 and pStar > pStart");
  OhcGrid g;
  const auto n = static_cast<long>(std::llround((pStar - pStart) / step));
  if (std::abs(n * step - (pStar - pStart)) > 1e-9 * step)
    throw ArgumentError("OhcGrid: the range must be a whole number of steps");
  for (long i = 0; i <= n; ++i) g.pressures.push_back(pStart + step * static_cast<double>(i));
  g.pressures.back() = pStar;
  return g;
}

OhcEstimate ohcDistribution(const FunctionalPrediction& pred, const EquationOfState& eos, const OhcGrid& grid,
                            const OhcConfig& config) {
  const auto& p = grid.pressures;
  if (p.size() < 2) throw ArgumentError("ohcDistribution: grid needs at least two pressures");
  double maxStep = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (!(p[i + 1] > p[i])) throw ArgumentError("ohcDistribution: grid must be strictly increasing");
    maxStep = std::max(maxStep, p[i + 1] - p[i]);
  }
  if (p.front() < kPressureMin || p.back() > kPressureMax) throw DomainError("ohcDistribution: grid outside [0, 2000]");
  if (maxStep > 100.0) logWarn("ohcDistribution: grid spacing above 100 dbar");

  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double h = p[i + 1] - p[i];
    if (config.rule == OhcRule::Left) {
      w(static_cast<Eigen::Index>(i)) += h;
    } else {
      w(static_cast<Eigen::Index>(i)) += 0.5 * h;
      w(static_cast<Eigen::Index>(i + 1)) += 0.5 * h;
    }
  }
  BivariateMap g{eos.theta, [&eos](double t, double s, double q) {
                   return std::array<double, 2>{eos.dThetaDt(t, s, q), eos.dThetaDs(t, s, q)};
                 }};
  const Linearization lin = linearize(pred, g, p);
  const double scale = config.cp * config.rho;
  const Eigen::VectorXd a = lin.J.transpose() * w;
  OhcEstimate out;
  out.mean = scale * w.dot(lin.mean);
  out.variance = std::max(0.0, scale * scale * a.dot(pred.dist.Sigma * a));
  out.grid = grid;
  return out;
}

std::optional<double> mldThreshold(const Curve& T, const Curve& S, const EquationOfState& eos,
                                   const MldConfig& config) {
  if (!(config.scanStep > 0.0 && config.tolerance > 0.0 && config.pRef < config.pMax))
    throw ArgumentError("mldThreshold: invalid configuration");
  const double tRef = T(config.pRef), sRef = S(config.pRef);
  const double sigmaRef = eos.sigma(tRef, sRef, config.pRef);
  const double delta = eos.sigma(tRef - config.dT, sRef, config.pRef) - sigmaRef;
  if (!(delta > 0.0)) throw DomainError("mldThreshold: density threshold must be positive");
  auto excess = [&](double p) {
    const double v = eos.sigma(T(p), S(p), p) - sigmaRef - delta;
    if (!std::isfinite(v)) throw DomainError("mldThreshold: curve not evaluable");
    return v;
  };
  double prev = config.pRef;
  for (long i = 1;; ++i) {
    const double p = std::min(config.pMax, config.pRef + static_cast<double>(i) * config.scanStep);
    if (excess(p) >= 0.0) {
      double lo = prev, hi = p;
      while (hi - lo > config.tolerance) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) >= 0.0 ? hi : lo) = mid;
      }
      return hi;
    }
    if (p >= config.pMax) return std::nullopt;
    prev = p;
  }
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

MldStats mldBootstrapStats(std::span<const std::vector<std::optional<double>>> years,
                           std::span<const std::optional<double>> meanDraws) {
  if (years.empty()) throw ArgumentError("mldBootstrapStats: no years");
  MldStats st;
  std::vector<std::vector<double>> d(years.size());
  std::vector<double> pooled;
  for (std::size_t y = 0; y < years.size(); ++y) {
    for (const auto& v : years[y]) {
      if (v)
        d[y].push_back(*v);
      else
        ++st.censored;
    }
    if (d[y].empty()) throw InsufficientDataError("mldBootstrapStats: a year has no uncensored draws");
    pooled.insert(pooled.end(), d[y].begin(), d[y].end());
  }
  st.pooledMedian = median(pooled);
  double sumAll = 0.0, maey = 0.0, mae = 0.0;
  for (const auto& dy : d) {
    const auto n = static_cast<double>(dy.size());
    double s = 0.0;
    for (double v : dy) s += v;
    const double mean = s / n;
    const double med = median(dy);
    double ss = 0.0, cube = 0.0;
    for (double v : dy) {
      ss += (v - mean) * (v - mean);
      maey += std::abs(v - med);
      mae += std::abs(v - st.pooledMedian);
    }
    const double sd = dy.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    if (sd > 0.0)
      for (double v : dy) cube += std::pow((v - mean) / sd, 3);
    st.yearMean.push_back(mean);
    st.yearMedian.push_back(med);
    st.skewness.push_back(cube / n);
    sumAll += s;
  }
  const auto total = static_cast<double>(pooled.size());
  st.overallMean = sumAll / total;
  st.maey = maey / total;
  st.mae = mae / total;
  st.pYear = st.mae > 0.0 ? st.maey / st.mae : 1.0;
  if (!meanDraws.empty()) {
    std::vector<double> m;
    for (const auto& v : meanDraws) {
      if (v)
        m.push_back(*v);
      else
        ++st.censored;
    }
    for (double med : st.yearMedian) {
      long above = 0;
      for (double v : m) above += v > med ? 1 : 0;
      st.exceedance.push_back(m.empty() ? 0.0 : static_cast<double>(above) / static_cast<double>(m.size()));
    }
  }
  return st;
}

namespace {

bool flagged(double lower, double upper, InversionDirection dir) {
  return dir == InversionDirection::AsWritten ? upper - lower > 0.0 : upper - lower < 0.0;
}

}  // namespace

std::optional<double> profileInversionFraction(std::span<const double> pressures, std::span<const double> density,
                                               InversionDirection direction) {
  if (pressures.size() != density.size()) throw ArgumentError("profileInversionFraction: length mismatch");
  if (pressures.size() < 2) return std::nullopt;
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j + 1 < pressures.size(); ++j) {
    const double gap = pressures[j + 1] - pressures[j];
    den += gap;
    if (flagged(density[j], density[j + 1], direction)) num += gap;
  }
  if (!(den > 0.0)) return std::nullopt;
  return num / den;
}

double gridInversionProportion(const Eigen::MatrixXd& density, InversionDirection direction) {
  if (density.rows() < 1 || density.cols() < 2) throw ArgumentError("gridInversionProportion: need curves on a grid");
  long hits = 0;
  for (Eigen::Index b = 0; b < density.rows(); ++b)
    for (Eigen::Index j = 0; j + 1 < density.cols(); ++j) hits += flagged(density(b, j), density(b, j + 1), direction);
  return static_cast<double>(hits) / static_cast<double>(density.rows() * (density.cols() - 1));
}

double inversionFractionAt(const Eigen::MatrixXd& densityPair, InversionDirection direction) {
  if (densityPair.cols() != 2 || densityPair.rows() < 1)
    throw ArgumentError("inversionFractionAt: need two columns of simulated density");
  long hits = 0;
  for (Eigen::Index b = 0; b < densityPair.rows(); ++b) hits += flagged(densityPair(b, 0), densityPair(b, 1), direction);
  return static_cast<double>(hits) / static_cast<double>(densityPair.rows());
}

SimulatedCurves simulateCurves(const FunctionalPrediction& pred, std::span<const double> pressures, int B,
                               std::uint64_t seed) {
  const Eigen::MatrixXd draws = conditionalSimulate(pred.dist, B, seed);
  const int K1 = pred.dist.K1, K2 = pred.dist.K2;
  SimulatedCurves out;
  out.T = draws.leftCols(K1) * pred.fpcsT.evaluate(pressures).transpose();
  out.S = draws.rightCols(K2) * pred.fpcsS.evaluate(pressures).transpose();
  if (pred.meanT) out.T.rowwise() += pred.meanT->evaluate(pressures).transpose();
  if (pred.meanS) out.S.rowwise() += pred.meanS->evaluate(pressures).transpose();
  return out;
}

Eigen::MatrixXd densityOf(const SimulatedCurves& curves, std::span<const double> pressures,
                          const EquationOfState& eos) {
  Eigen::MatrixXd out(curves.T.rows(), curves.T.cols());
  for (Eigen::Index b = 0; b < out.rows(); ++b)
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      out(b, j) = eos.sigma(curves.T(b, j), curves.S(b, j), pressures[static_cast<std::size_t>(j)]);
  return out;
}

}  // namespace fdakrig
