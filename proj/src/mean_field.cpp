#include "fdakrig/mean_field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include "fdakrig/errors.hpp"
#include "fdakrig/log.hpp"

namespace fdakrig {

double workingCorrelation(double lag, double tau) { return std::exp(-tau * std::abs(lag)); }

TridiagonalPrecision exponentialPrecision(std::span<const double> pressures, double tau) {
  if (!(tau > 0.0)) throw ArgumentError("exponentialPrecision: tau must be > 0");
  const int m = static_cast<int>(pressures.size());
  TridiagonalPrecision q;
  q.diag = Eigen::VectorXd::Ones(m);
  q.off = Eigen::VectorXd::Zero(std::max(0, m - 1));
  for (int j = 0; j + 1 < m; ++j) {
    const double gap = pressures[j + 1] - pressures[j];
    if (!(gap > 0.0)) throw ArgumentError("exponentialPrecision: pressures must increase");
    const double rho = std::exp(-tau * gap);
    const double inv = 1.0 / (-std::expm1(-2.0 * tau * gap));  // 1 / (1 - rho^2)
    q.off(j) = -rho * inv;
    q.diag(j) += rho * rho * inv;
    q.diag(j + 1) += rho * rho * inv;
  }
  return q;
}

std::vector<int> defaultYears() {
  std::vector<int> y(10);
  std::iota(y.begin(), y.end(), 2007);
  return y;
}

Eigen::VectorXd buildDesignRow(const GeoPoint& location, double day, int year,
                               const GeoPoint& center, double day0, std::span<const int> years) {
  const auto it = std::find(years.begin(), years.end(), year);
  if (it == years.end()) {
    throw UnmodeledYearError("year " + std::to_string(year) + " is not among the modeled years");
  }
  const int ny = static_cast<int>(years.size());
  Eigen::VectorXd c = Eigen::VectorXd::Zero(ny + kTrendTerms);
  c(it - years.begin()) = 1.0;
  const Displacement d = localDisplacement(center, location);
  const double dd = dayDifference(day, day0);
  c(ny + 0) = d.east;
  c(ny + 1) = d.north;
  c(ny + 2) = d.east * d.east;
  c(ny + 3) = d.north * d.north;
  c(ny + 4) = d.east * d.north;
  c(ny + 5) = dd;
  c(ny + 6) = dd * dd;
  return c;
}

CovariateSplineProblem::CovariateSplineProblem(std::vector<WeightedSeries> data,
                                               const BasisSystem& basis, std::vector<double> eta,
                                               std::optional<double> tau)
    : basis_(basis) {
  if (data.empty()) throw InsufficientDataError("penalized fit: no profiles");
  functions_ = static_cast<int>(data.front().covariates.size());
  nb_ = basis.size();
  if (static_cast<int>(eta.size()) != functions_)
    throw ArgumentError("penalized fit: one penalty ratio per coefficient function required");
  for (double e : eta)
    if (!(e > 0.0)) throw ArgumentError("penalized fit: penalty ratios must be > 0");

  const int order = basis.order();
  // pattern of the per-profile Gram blocks Phi' Q Phi, lower triangle
  std::vector<int> slot(static_cast<std::size_t>(nb_) * nb_, -1);
  std::vector<std::pair<int, int>> entries;
  auto slotOf = [&](int a, int b) -> int& {
    if (a < b) std::swap(a, b);
    return slot[static_cast<std::size_t>(a) * nb_ + b];
  };
  auto touch = [&](int a, int b) {
    int& s = slotOf(a, b);
    if (s < 0) {
      s = static_cast<int>(entries.size());
      entries.emplace_back(std::max(a, b), std::min(a, b));
    }
  };

  blocks_.reserve(data.size());
  for (auto& d : data) {
    if (d.covariates.size() != functions_)
      throw ArgumentError("penalized fit: inconsistent covariate dimension");
    if (d.pressure.size() != d.value.size() || d.pressure.empty())
      throw ArgumentError("penalized fit: empty or ragged profile");
    if (!(d.weight > 0.0)) continue;
    Block b;
    b.weight = d.weight;
    b.covariates = std::move(d.covariates);
    b.rows.reserve(d.pressure.size());
    for (double p : d.pressure) {
      const BasisRow r = basis.evalRow(p);
      b.rows.push_back({r.first, r.values});
    }
    b.value = std::move(d.value);
    if (tau) {
      b.precision = exponentialPrecision(d.pressure, *tau);
    } else {
      b.precision.diag = Eigen::VectorXd::Ones(b.value.size());
      b.precision.off = Eigen::VectorXd::Zero(b.value.size() - 1);
    }
    nEffective_ += static_cast<int>(b.value.size());
    const int m = static_cast<int>(b.rows.size());
    for (int j = 0; j < m; ++j) {
      const int fj = b.rows[j].first;
      for (int r = 0; r < order; ++r)
        for (int s = 0; s <= r; ++s) touch(fj + r, fj + s);
      if (j + 1 < m && b.precision.off(j) != 0.0) {
        const int fk = b.rows[j + 1].first;
        for (int r = 0; r < order; ++r)
          for (int s = 0; s < order; ++s) touch(fj + r, fk + s);
      }
    }
    blocks_.push_back(std::move(b));
  }
  if (blocks_.empty()) throw InsufficientDataError("penalized fit: no profile with positive weight");

  const int K = functions_;
  const std::size_t nnz = entries.size();
  std::vector<std::vector<double>> pairValues(static_cast<std::size_t>(K) * (K + 1) / 2);
  auto pairIndex = [](int k, int l) { return static_cast<std::size_t>(k) * (k + 1) / 2 + l; };
  std::vector<double> scratch(nnz, 0.0);
  std::vector<int> touched;
  rhs_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K) * nb_);
  Eigen::VectorXd local = Eigen::VectorXd::Zero(nb_);

  for (const Block& b : blocks_) {
    const int m = static_cast<int>(b.rows.size());
    touched.clear();
    auto add = [&](int a, int c, double v) {
      const int s = slotOf(a, c);
      if (scratch[s] == 0.0) touched.push_back(s);
      scratch[s] += v;
      if (scratch[s] == 0.0) scratch[s] = 1e-300;  // keep it listed
    };
    local.setZero();
    for (int j = 0; j < m; ++j) {
      const Row& rj = b.rows[j];
      const double qjj = b.precision.diag(j);
      for (int r = 0; r < order; ++r)
        for (int s = 0; s <= r; ++s) add(rj.first + r, rj.first + s, qjj * rj.values[r] * rj.values[s]);
      double qy = qjj * b.value[j];
      if (j > 0) qy += b.precision.off(j - 1) * b.value[j - 1];
      if (j + 1 < m) qy += b.precision.off(j) * b.value[j + 1];
      for (int r = 0; r < order; ++r) local(rj.first + r) += qy * rj.values[r];
      if (j + 1 < m && b.precision.off(j) != 0.0) {
        const Row& rk = b.rows[j + 1];
        const double q = b.precision.off(j);
        for (int r = 0; r < order; ++r)
          for (int s = 0; s < order; ++s) {
            const int a = rj.first + r;
            const int c = rk.first + s;
            const double v = q * rj.values[r] * rk.values[s];
            // S gets q (phi_j phi_k' + phi_k phi_j'); on the diagonal both halves land together
            add(a, c, a == c ? 2.0 * v : v);
          }
      }
    }
    for (int k = 0; k < K; ++k) {
      const double ck = b.covariates(k);
      if (ck == 0.0) continue;
      rhs_.segment(static_cast<Eigen::Index>(k) * nb_, nb_) += b.weight * ck * local;
      for (int l = 0; l <= k; ++l) {
        const double cl = b.covariates(l);
        if (cl == 0.0) continue;
        auto& vals = pairValues[pairIndex(k, l)];
        if (vals.empty()) vals.assign(nnz, 0.0);
        const double f = b.weight * ck * cl;
        for (int s : touched) vals[s] += f * scratch[s];
      }
    }
    for (int s : touched) scratch[s] = 0.0;
  }

  std::vector<Eigen::Triplet<double>> gTrip;
  for (int k = 0; k < K; ++k)
    for (int l = 0; l <= k; ++l) {
      const auto& vals = pairValues[pairIndex(k, l)];
      if (vals.empty()) continue;
      const int rk = k * nb_;
      const int cl = l * nb_;
      for (std::size_t s = 0; s < nnz; ++s) {
        const auto [a, c] = entries[s];
        gTrip.emplace_back(rk + a, cl + c, vals[s]);
        if (k != l && a != c) gTrip.emplace_back(rk + c, cl + a, vals[s]);
      }
    }
  const int n = K * nb_;
  const Eigen::MatrixXd omega = basis.gram(2);
  std::vector<Eigen::Triplet<double>> pTrip;
  for (int k = 0; k < K; ++k)
    for (int a = 0; a < nb_; ++a)
      for (int c = std::max(0, a - order + 1); c <= a; ++c)
        if (omega(a, c) != 0.0 || a == c) pTrip.emplace_back(k * nb_ + a, k * nb_ + c, eta[k] * omega(a, c));
  system_.emplace(SparseSymmetric::fromTriplets(n, gTrip), SparseSymmetric::fromTriplets(n, pTrip));
}

double CovariateSplineProblem::residualSum(const Eigen::MatrixXd& coef) const {
  const int order = basis_.order();
  double rss = 0.0;
  Eigen::VectorXd beta(nb_);
  std::vector<double> e;
  for (const Block& b : blocks_) {
    beta.noalias() = coef.transpose() * b.covariates;
    const int m = static_cast<int>(b.rows.size());
    e.resize(m);
    for (int j = 0; j < m; ++j) {
      double f = 0.0;
      for (int r = 0; r < order; ++r) f += b.rows[j].values[r] * beta(b.rows[j].first + r);
      e[j] = b.value[j] - f;
    }
    double q = 0.0;
    for (int j = 0; j < m; ++j) {
      q += b.precision.diag(j) * e[j] * e[j];
      if (j + 1 < m) q += 2.0 * b.precision.off(j) * e[j] * e[j + 1];
    }
    rss += b.weight * q;
  }
  return rss;
}

CovariateSplineProblem::Fit CovariateSplineProblem::solve(double a) const {
  if (!(a > 0.0)) throw ArgumentError("penalized fit: smoothing parameter must be > 0");
  const auto sol = system_->solve(a, rhs_, true);
  Fit fit;
  fit.coefficients = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      sol.coef.data(), functions_, nb_);
  fit.trace = sol.trace;
  fit.rss = residualSum(fit.coefficients);
  const double ratio = fit.trace / nEffective_;
  if (!(ratio < 1.0)) {
    std::ostringstream os;
    os << "leverage trace " << fit.trace << " reaches the number of measurements " << nEffective_;
    throw DegenerateSmoothingError(os.str());
  }
  fit.gcv = fit.rss / ((1.0 - ratio) * (1.0 - ratio));
  return fit;
}

CovariateSplineProblem::Selection CovariateSplineProblem::selectSmoothing(
    const SmoothingConfig& cfg) const {
  if (!(cfg.aMin > 0.0) || !(cfg.aMax > cfg.aMin))
    throw ArgumentError("smoothing search interval must satisfy 0 < lo < hi");
  const auto best = minimizeOverLogScale([this](double a) { return gcv(a); }, cfg.aMin, cfg.aMax,
                                         cfg.relTol, cfg.maxEvals);
  if (!(best.value < 1e299))
    throw DegenerateSmoothingError("GCV undefined over the whole smoothing search interval");
  Selection s;
  s.a = best.x;
  s.evaluations = best.evaluations;
  s.fit = solve(best.x);
  return s;
}

int MeanFit::yearRow(int year) const {
  const auto it = std::find(years.begin(), years.end(), year);
  if (it == years.end())
    throw UnmodeledYearError("year " + std::to_string(year) + " is not among the modeled years");
  return static_cast<int>(it - years.begin());
}

MeanFit fitMean(const ProfileSet& profiles, const GeoPoint& center, double day0,
                const BasisSystem& basis, Variable variable, const MeanConfig& config) {
  if (config.years.empty()) throw ArgumentError("fitMean: no modeled years");
  const ProfileSet* source = &profiles;
  ProfileSet usable;
  if (variable == Variable::Salinity) {
    for (const auto& p : profiles)
      if (salinityUsable(p) && !extractSeries(p, variable).value.empty()) usable.push_back(p);
    source = &usable;
  }
  const NeighborSelection sel =
      selectNeighbors(*source, center, day0, config.kernel, config.years, config.minPerYear,
                      config.bandwidthGrowth, config.bandwidthCap);

  std::vector<WeightedSeries> data;
  std::vector<double> kernel;
  std::vector<std::size_t> used;
  for (std::size_t t = 0; t < sel.indices.size(); ++t) {
    const ProfileRecord& p = (*source)[sel.indices[t]];
    if (sel.weights[t] <= 0.0) continue;
    if (std::find(config.years.begin(), config.years.end(), p.year) == config.years.end()) continue;
    if (extractSeries(p, variable).value.empty()) continue;
    used.push_back(sel.indices[t]);
    kernel.push_back(sel.weights[t]);
  }
  if (used.empty()) throw InsufficientDataError("fitMean: no profiles with positive kernel weight");
  const double n = static_cast<double>(used.size());
  data.reserve(used.size());
  for (std::size_t t = 0; t < used.size(); ++t) {
    const ProfileRecord& p = (*source)[used[t]];
    VariableSeries series = extractSeries(p, variable);
    WeightedSeries w;
    w.weight = kernel[t] / (n * static_cast<double>(series.size()));
    w.covariates = buildDesignRow(p, center, day0, config.years);
    w.pressure = std::move(series.pressure);
    w.value = std::move(series.value);
    data.push_back(std::move(w));
  }

  std::vector<double> eta(config.years.size(), config.smoothing.eta[0]);
  for (int k = 1; k <= kTrendTerms; ++k) eta.push_back(config.smoothing.eta[k]);
  const CovariateSplineProblem problem(std::move(data), basis, std::move(eta), config.wcorr.tau);
  const auto sel2 = problem.selectSmoothing(config.smoothing);

  MeanFit fit;
  fit.center = center;
  fit.day0 = day0;
  fit.variable = variable;
  fit.basis = basis;
  fit.years = config.years;
  fit.coefficients = sel2.fit.coefficients;
  fit.a = sel2.a;
  fit.gcv = sel2.fit.gcv;
  fit.trace = sel2.fit.trace;
  fit.n_used = static_cast<int>(used.size());
  fit.h_s = sel.h_s;
  return fit;
}

Eigen::VectorXd evalMean(const MeanFit& fit, std::optional<int> year,
                         std::span<const double> pressures, int deriv) {
  const int ny = static_cast<int>(fit.years.size());
  Eigen::VectorXd coef = year ? Eigen::VectorXd(fit.coefficients.row(fit.yearRow(*year)).transpose())
                              : Eigen::VectorXd(fit.coefficients.topRows(ny).colwise().mean().transpose());
  return fit.basis.eval(pressures, deriv) * coef;
}

Eigen::VectorXd meanCoefficientsAt(const MeanFit& fit, const GeoPoint& location, double day,
                                   int year) {
  const Eigen::VectorXd c = buildDesignRow(location, day, year, fit.center, fit.day0, fit.years);
  return fit.coefficients.transpose() * c;
}

Eigen::VectorXd evalMeanAt(const MeanFit& fit, const GeoPoint& location, double day, int year,
                           std::span<const double> pressures, int deriv) {
  return fit.basis.eval(pressures, deriv) * meanCoefficientsAt(fit, location, day, year);
}

SpaceTimeDerivatives spaceTimeDerivatives(const MeanFit& fit, std::span<const double> pressures) {
  const int ny = static_cast<int>(fit.years.size());
  const RowSparse phi = fit.basis.eval(pressures);
  auto row = [&](int k, double scale) -> Eigen::VectorXd {
    return scale * (phi * fit.coefficients.row(ny + k).transpose());
  };
  return {row(0, 1.0), row(1, 1.0), row(2, 2.0), row(3, 2.0), row(4, 1.0), row(5, 1.0), row(6, 2.0)};
}

std::size_t nearestFit(std::span<const MeanFit> fits, const GeoPoint& location) {
  if (fits.empty()) throw InsufficientDataError("nearestFit: no mean fits");
  std::size_t best = 0;
  double bestD = greatCircleDistance(fits[0].center, location);
  for (std::size_t i = 1; i < fits.size(); ++i) {
    const double d = greatCircleDistance(fits[i].center, location);
    const auto& c = fits[i].center;
    const auto& b = fits[best].center;
    if (d < bestD || (d == bestD && std::tie(c.lat, c.lon) < std::tie(b.lat, b.lon))) {
      best = i;
      bestD = d;
    }
  }
  return best;
}

ResidualProfileSet computeResiduals(const ProfileSet& profiles, std::span<const MeanFit> fits,
                                    Variable variable) {
  ResidualProfileSet out;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const ProfileRecord& p = profiles[i];
    VariableSeries s = extractSeries(p, variable);
    if (s.value.empty()) continue;
    const MeanFit& fit = fits[nearestFit(fits, p.location)];
    const Eigen::VectorXd mu = evalMeanAt(fit, p.location, p.day, p.year, s.pressure);
    ResidualProfile r;
    r.source = i;
    r.id = p.id;
    r.location = p.location;
    r.day = p.day;
    r.year = p.year;
    r.mode = p.mode;
    r.pressure = std::move(s.pressure);
    r.value.resize(s.value.size());
    for (std::size_t j = 0; j < s.value.size(); ++j) r.value[j] = s.value[j] - mu(j);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace fdakrig
