#include "fdakrig/marginal_cov.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_set>

#include "fdakrig/errors.hpp"
#include "fdakrig/log.hpp"
#include "fdakrig/rng.hpp"

namespace fdakrig {
namespace {

double traceOf(const SparseSymmetric& s) {
  double t = 0.0;
  const ColSparse& l = s.lower();
  for (int c = 0; c < l.outerSize(); ++c)
    for (ColSparse::InnerIterator it(l, c); it; ++it)
      if (it.row() == c) t += it.value();
  return t;
}

// Banded storage of a matrix over the tensor index a1 + M*a2, keeping
// offsets |b1 - a1| <= hb and |b2 - a2| <= hb.
class TensorBand {
 public:
  TensorBand(int M, int hb) : M_(M), hb_(hb), W_(2 * hb + 1), v_(static_cast<std::size_t>(M) * M * W_ * W_, 0.0) {}
  double& at(int a1, int a2, int d1, int d2) {
    return v_[((static_cast<std::size_t>(a1) + static_cast<std::size_t>(M_) * a2) * W_ + (d1 + hb_)) * W_ +
              (d2 + hb_)];
  }
  int size() const { return M_; }
  void add(const TensorBand& o, double sign) {
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += sign * o.v_[i];
  }
  SparseSymmetric toSparse() const {
    std::vector<Eigen::Triplet<double>> t;
    for (int a2 = 0; a2 < M_; ++a2)
      for (int a1 = 0; a1 < M_; ++a1) {
        const int r = a1 + M_ * a2;
        for (int d2 = -hb_; d2 <= hb_; ++d2)
          for (int d1 = -hb_; d1 <= hb_; ++d1) {
            const int b1 = a1 + d1, b2 = a2 + d2;
            if (b1 < 0 || b1 >= M_ || b2 < 0 || b2 >= M_) continue;
            const int c = b1 + M_ * b2;
            if (c > r) continue;
            const double v =
                v_[((static_cast<std::size_t>(r)) * W_ + (d1 + hb_)) * W_ + (d2 + hb_)];
            if (v != 0.0) t.emplace_back(r, c, v);
          }
      }
    return SparseSymmetric::fromTriplets(M_ * M_, t);
  }

 private:
  int M_, hb_, W_;
  std::vector<double> v_;
};

// Weighted sums over off-diagonal cross products of a set of profiles:
// G = sum w b(p_j)b(p_j)^T (x) b(p_l)b(p_l)^T, rhs = sum w y_j y_l b(p_j) (x) b(p_l),
// c0 = sum w (y_j y_l)^2.
struct CrossProducts {
  TensorBand G;
  int hb_;
  Eigen::VectorXd rhs;
  double c0 = 0.0;
  long pairs = 0;

  CrossProducts(int M, int hb) : G(M, hb), hb_(hb), rhs(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M) * M)) {}

  CrossProducts& operator+=(const CrossProducts& o) {
    G.add(o.G, 1.0);
    rhs += o.rhs;
    c0 += o.c0;
    pairs += o.pairs;
    return *this;
  }
  CrossProducts& operator-=(const CrossProducts& o) {
    G.add(o.G, -1.0);
    rhs -= o.rhs;
    c0 -= o.c0;
    pairs -= o.pairs;
    return *this;
  }

  double rss(const Eigen::VectorXd& x, const SparseSymmetric& Gs) const {
    return std::max(0.0, c0 - 2.0 * x.dot(rhs) + x.dot(Gs.multiply(x)));
  }

  // `scale` is the profile's kernel weight over n; it is further divided by
  // the number of cross products used.
  void add(const std::vector<BasisRow>& rows, const std::vector<double>& y, double scale, std::size_t maxPairs,
           std::mt19937_64& rng) {
    const int m = static_cast<int>(rows.size());
    const int M = G.size();
    const int hb = hb_;
    const int k = hb + 1;
    const long ordered = static_cast<long>(m) * (m - 1);
    if (static_cast<std::size_t>(ordered) <= maxPairs) {
      const double w = scale / static_cast<double>(ordered);
      pairs += ordered;
      Eigen::MatrixXd Gi = Eigen::MatrixXd::Zero(M, 2 * hb + 1);
      Eigen::VectorXd u = Eigen::VectorXd::Zero(M);
      int lo = M, hi = -1;
      double sy2 = 0.0, sy4 = 0.0;
      for (int j = 0; j < m; ++j) {
        const BasisRow& b = rows[j];
        lo = std::min(lo, b.first);
        hi = std::max(hi, b.first + hb);
        for (int a = 0; a < k; ++a) {
          u(b.first + a) += y[j] * b.values[a];
          for (int c = 0; c < k; ++c) Gi(b.first + a, c - a + hb) += b.values[a] * b.values[c];
        }
        sy2 += y[j] * y[j];
        sy4 += y[j] * y[j] * y[j] * y[j];
      }
      c0 += w * (sy2 * sy2 - sy4);
      for (int a2 = lo; a2 <= hi; ++a2)
        for (int d2 = -hb; d2 <= hb; ++d2) {
          const double g2 = Gi(a2, d2 + hb);
          if (g2 == 0.0) continue;
          for (int a1 = lo; a1 <= hi; ++a1)
            for (int d1 = -hb; d1 <= hb; ++d1) {
              const double g1 = Gi(a1, d1 + hb);
              if (g1 != 0.0) G.at(a1, a2, d1, d2) += w * g1 * g2;
            }
        }
      for (int a2 = lo; a2 <= hi; ++a2)
        for (int a1 = lo; a1 <= hi; ++a1) rhs(a1 + M * a2) += w * u(a1) * u(a2);
      for (int j = 0; j < m; ++j) {
        const BasisRow& b = rows[j];
        const double y2 = y[j] * y[j];
        for (int r1 = 0; r1 < k; ++r1)
          for (int r2 = 0; r2 < k; ++r2) {
            const double v12 = b.values[r1] * b.values[r2];
            rhs(b.first + r1 + M * (b.first + r2)) -= w * y2 * v12;
            for (int s1 = 0; s1 < k; ++s1)
              for (int s2 = 0; s2 < k; ++s2)
                G.at(b.first + r1, b.first + r2, s1 - r1, s2 - r2) -= w * v12 * b.values[s1] * b.values[s2];
          }
      }
      return;
    }
    // uniform subsample of unordered pairs, both orientations kept
    const long total = ordered / 2;
    const long want = static_cast<long>(maxPairs / 2);
    std::unordered_set<long> chosen;
    for (long j = total - want; j < total; ++j) {  // Floyd's algorithm
      const long v = std::uniform_int_distribution<long>(0, j)(rng);
      if (!chosen.insert(v).second) chosen.insert(j);
    }
    std::vector<long> picks(chosen.begin(), chosen.end());
    std::sort(picks.begin(), picks.end());
    const double w = scale / (2.0 * static_cast<double>(want));
    pairs += 2 * want;
    for (long idx : picks) {
      // idx -> (j, l) with j < l in row-major order of the strict upper triangle
      long j = 0, rem = idx;
      while (rem >= m - 1 - j) {
        rem -= m - 1 - j;
        ++j;
      }
      const long l = j + 1 + rem;
      const double yy = y[j] * y[l];
      c0 += 2.0 * w * yy * yy;
      for (int orient = 0; orient < 2; ++orient) {
        const BasisRow& b1 = orient == 0 ? rows[j] : rows[l];
        const BasisRow& b2 = orient == 0 ? rows[l] : rows[j];
        for (int r1 = 0; r1 < k; ++r1)
          for (int r2 = 0; r2 < k; ++r2) {
            const double v12 = b1.values[r1] * b2.values[r2];
            rhs(b1.first + r1 + M * (b2.first + r2)) += w * yy * v12;
            for (int s1 = 0; s1 < k; ++s1)
              for (int s2 = 0; s2 < k; ++s2) G.at(b1.first + r1, b2.first + r2, s1 - r1, s2 - r2) += w * v12 * b1.values[s1] * b2.values[s2];
          }
      }
    }
  }
};

}  // namespace

std::vector<double> residualKernelWeights(const ResidualProfileSet& residuals, const GeoPoint& center,
                                          double day0, const KernelConfig& kernel) {
  std::vector<double> w(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i)
    w[i] = kernelWeight(greatCircleDistance(center, residuals[i].location),
                        dayDistance(residuals[i].day, day0), kernel);
  return w;
}

double MarginalCovFit::surface(double p1, double p2) const {
  const BasisRow r1 = basis.evalRow(p1);
  const BasisRow r2 = basis.evalRow(p2);
  double s = 0.0;
  for (int a = 0; a < basis.order(); ++a)
    for (int b = 0; b < basis.order(); ++b) s += r1.values[a] * alpha(r1.first + a, r2.first + b) * r2.values[b];
  return s;
}

Eigen::MatrixXd MarginalCovFit::surface(std::span<const double> p1, std::span<const double> p2) const {
  const Eigen::MatrixXd b1 = basis.evalDense(p1);
  const Eigen::MatrixXd b2 = basis.evalDense(p2);
  return b1 * alpha * b2.transpose();
}

MarginalCovFit fitMarginalCovariance(const ResidualProfileSet& residuals, const GeoPoint& center,
                                     double day0, const BasisSystem& basis, Variable variable,
                                     const MarginalCovConfig& config) {
  const std::vector<double> kw = residualKernelWeights(residuals, center, day0, config.kernel);
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < residuals.size(); ++i)
    if (kw[i] > 0.0 && residuals[i].size() >= 2) used.push_back(i);
  if (static_cast<int>(used.size()) < config.minProfiles) {
    std::ostringstream os;
    os << "marginal covariance: " << used.size() << " profiles with two or more measurements, need "
       << config.minProfiles;
    throw InsufficientDataError(os.str());
  }
  const int M = basis.size();
  const int hb = basis.order() - 1;
  const double n = static_cast<double>(used.size());
  const int folds = config.selection == CovSelection::ProfileKFold
                        ? std::clamp(config.folds, 2, static_cast<int>(used.size()))
                        : 1;
  std::vector<CrossProducts> parts;
  for (int f = 0; f < folds; ++f) parts.emplace_back(M, hb);
  // profiles are dealt to folds in a seeded random order
  std::vector<int> foldOf(used.size());
  for (std::size_t t = 0; t < used.size(); ++t) foldOf[t] = static_cast<int>(t % folds);
  if (folds > 1) {
    std::mt19937_64 rng = makeStream(config.seed, {0xf01dULL});
    std::shuffle(foldOf.begin(), foldOf.end(), rng);
  }
  std::vector<BasisRow> rows;
  for (std::size_t t = 0; t < used.size(); ++t) {
    const ResidualProfile& r = residuals[used[t]];
    rows.resize(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) rows[j] = basis.evalRow(r.pressure[j]);
    std::mt19937_64 rng = makeStream(config.seed, {static_cast<std::uint64_t>(used[t]), 0xc0faULL});
    parts[foldOf[t]].add(rows, r.value, kw[used[t]] / n, config.maxPairs, rng);
  }
  CrossProducts total = parts[0];
  for (int f = 1; f < folds; ++f) total += parts[f];

  const Eigen::MatrixXd omega = basis.gram(2);
  std::vector<Eigen::Triplet<double>> pt;
  for (int a2 = 0; a2 < M; ++a2)
    for (int a1 = 0; a1 < M; ++a1) {
      const int r = a1 + M * a2;
      for (int d = -hb; d <= 0; ++d) {
        if (a1 + d >= 0 && omega(a1, a1 + d) != 0.0) pt.emplace_back(r, r + d, omega(a1, a1 + d));
        if (a2 + d >= 0 && omega(a2, a2 + d) != 0.0) pt.emplace_back(r, r + d * M, omega(a2, a2 + d));
      }
    }
  const SparseSymmetric Gs = total.G.toSparse();
  const SparseSymmetric Ps = SparseSymmetric::fromTriplets(M * M, pt);
  const PenalizedSystem system(Gs, Ps);
  const double scale = traceOf(Gs) / traceOf(Ps);

  struct Eval {
    Eigen::VectorXd x;
    double trace = 0.0, gcv = 0.0;
  };
  auto evaluate = [&](double lambda) {
    const auto sol = system.solve(lambda, total.rhs, true);
    Eval e;
    e.x = sol.coef;
    e.trace = sol.trace;
    const double ratio = e.trace / static_cast<double>(total.pairs);
    if (!(ratio < 1.0)) throw DegenerateSmoothingError("marginal covariance: leverage reaches sample size");
    e.gcv = total.rss(e.x, Gs) / ((1.0 - ratio) * (1.0 - ratio));
    return e;
  };

  std::vector<PenalizedSystem> trainSystems;
  std::vector<Eigen::VectorXd> trainRhs;
  std::vector<SparseSymmetric> heldG;
  if (folds > 1) {
    for (int f = 0; f < folds; ++f) {
      CrossProducts train = total;
      train -= parts[f];
      trainSystems.emplace_back(train.G.toSparse(), Ps);
      trainRhs.push_back(train.rhs);
      heldG.push_back(parts[f].G.toSparse());
    }
  }
  auto criterion = [&](double lambda) {
    if (folds == 1) return evaluate(lambda).gcv;
    double loss = 0.0;
    for (int f = 0; f < folds; ++f) {
      const Eigen::VectorXd x = trainSystems[f].solve(lambda, trainRhs[f], false).coef;
      loss += parts[f].rss(x, heldG[f]);
    }
    return loss;
  };

  const auto best = minimizeOverLogScale(criterion, config.rhoMin * scale, config.rhoMax * scale,
                                         config.relTol, config.maxEvals);
  if (!(best.value < 1e299))
    throw DegenerateSmoothingError("marginal covariance: selection criterion undefined on the search interval");
  const Eval e = evaluate(best.x);

  MarginalCovFit fit;
  fit.center = center;
  fit.day0 = day0;
  fit.variable = variable;
  fit.basis = basis;
  const Eigen::MatrixXd a = Eigen::Map<const Eigen::MatrixXd>(e.x.data(), M, M);
  fit.alpha = 0.5 * (a + a.transpose());
  fit.lambda = best.x;
  fit.gcv = e.gcv;
  fit.trace = e.trace;
  fit.n_used = static_cast<int>(used.size());
  fit.n_pairs = total.pairs;
  fit.cv = best.value;
  return fit;
}

Eigen::MatrixXd FpcBasis::evaluate(std::span<const double> pressures, int deriv) const {
  return basis.eval(pressures, deriv) * coeffs.transpose();
}

FpcBasis extractFpcs(const MarginalCovFit& fit, int K) {
  const int M = fit.basis.size();
  if (K < 1 || K > M) throw ArgumentError("extractFpcs: K must lie in [1, M]");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> g(fit.basis.gram(0));
  Eigen::VectorXd ev = g.eigenvalues();
  const double floor = 1e-12 * ev.maxCoeff();
  ev = ev.cwiseMax(floor);
  const Eigen::MatrixXd root = g.eigenvectors() * ev.cwiseSqrt().asDiagonal() * g.eigenvectors().transpose();
  const Eigen::MatrixXd invRoot =
      g.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * g.eigenvectors().transpose();
  const Eigen::MatrixXd H = root * fit.alpha * root;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> h(0.5 * (H + H.transpose()));
  // eigenvalues ascend
  int positive = 0;
  const double tol = 1e-10 * h.eigenvalues().cwiseAbs().maxCoeff();
  for (int i = M - 1; i >= 0 && h.eigenvalues()(i) > tol; --i) ++positive;
  const int keep = std::min(K, positive);
  if (keep < K) {
    std::ostringstream os;
    os << "extractFpcs: only " << positive << " positive eigenvalues, returning " << keep << " components";
    logWarn(os.str());
  }
  FpcBasis out;
  out.variable = fit.variable;
  out.basis = fit.basis;
  out.coeffs.resize(keep, M);
  out.eigenvalues.resize(keep);
  for (int i = 0; i < keep; ++i) {
    const int col = M - 1 - i;
    out.eigenvalues(i) = h.eigenvalues()(col);
    out.coeffs.row(i) = (invRoot * h.eigenvectors().col(col)).transpose();
  }
  return out;
}

double kappaBiasFactor(KappaBias bias) {
  // E log chi2_1 = psi(1/2) + log 2 = -egamma - log 2
  return bias == KappaBias::Digamma ? 2.0 * std::exp(-std::numbers::egamma)
                                    : std::exp(std::numbers::egamma + std::numbers::ln2);
}

double MeasurementErrorFit::kappa(double p) const { return factor * std::exp(basis.evalFunction(beta, p)); }

Eigen::VectorXd MeasurementErrorFit::kappa(std::span<const double> pressures) const {
  return factor * (basis.eval(pressures) * beta).array().exp().matrix();
}

MeasurementErrorFit fitMeasurementError(const ResidualProfileSet& residuals, const FpcBasis& fpcs,
                                        std::span<const std::optional<Eigen::VectorXd>> scores,
                                        const GeoPoint& center, double day0, const BasisSystem& basis,
                                        const MeasurementErrorConfig& config) {
  if (scores.size() != residuals.size())
    throw ArgumentError("fitMeasurementError: one score entry per residual profile required");
  const std::vector<double> kw = residualKernelWeights(residuals, center, day0, config.kernel);
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < residuals.size(); ++i)
    if (kw[i] > 0.0 && scores[i]) used.push_back(i);
  if (used.empty()) throw InsufficientDataError("fitMeasurementError: no scored profiles in the kernel");
  const double n = static_cast<double>(used.size());
  int clamped = 0;
  std::vector<WeightedSeries> data;
  for (std::size_t i : used) {
    const ResidualProfile& r = residuals[i];
    const Eigen::VectorXd recon = fpcs.evaluate(r.pressure) * (*scores[i]);
    WeightedSeries s;
    s.weight = kw[i] / (n * static_cast<double>(r.size()));
    s.covariates = Eigen::VectorXd::Ones(1);
    s.pressure = r.pressure;
    s.value.resize(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) {
      double e2 = (r.value[j] - recon(j)) * (r.value[j] - recon(j));
      if (e2 < 1e-12) {
        e2 = 1e-12;
        ++clamped;
      }
      s.value[j] = std::log(e2);
    }
    data.push_back(std::move(s));
  }
  if (clamped > 0) logWarn("fitMeasurementError: " + std::to_string(clamped) + " squared residuals clamped at 1e-12");
  const CovariateSplineProblem problem(std::move(data), basis, {1.0}, std::nullopt);
  SmoothingConfig smoothing = config.smoothing;
  const double scale = traceOf(problem.system().gram()) / traceOf(problem.system().penalty());
  smoothing.aMin *= scale;
  smoothing.aMax *= scale;
  const auto sel = problem.selectSmoothing(smoothing);
  MeasurementErrorFit fit;
  fit.basis = basis;
  fit.beta = sel.fit.coefficients.row(0).transpose();
  fit.factor = kappaBiasFactor(config.bias);
  fit.lambda = sel.a;
  fit.trace = sel.fit.trace;
  fit.clamped = clamped;
  return fit;
}

double varianceExplained(const ResidualProfileSet& residuals, const FpcBasis& fpcs,
                         std::span<const std::optional<Eigen::VectorXd>> scores, const GeoPoint& center,
                         double radius) {
  if (scores.size() != residuals.size())
    throw ArgumentError("varianceExplained: one score entry per residual profile required");
  double rss = 0.0, tss = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    if (!scores[i] || greatCircleDistance(center, residuals[i].location) > radius) continue;
    const ResidualProfile& r = residuals[i];
    const Eigen::VectorXd recon = fpcs.evaluate(r.pressure) * (*scores[i]);
    for (std::size_t j = 0; j < r.size(); ++j) {
      rss += (r.value[j] - recon(j)) * (r.value[j] - recon(j));
      tss += r.value[j] * r.value[j];
    }
    ++count;
  }
  if (count == 0) throw InsufficientDataError("varianceExplained: no scored profiles within the radius");
  if (!(tss > 0.0)) throw InsufficientDataError("varianceExplained: zero total sum of squares");
  return 1.0 - rss / tss;
}

}  // namespace fdakrig
