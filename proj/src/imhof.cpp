#include "fdakrig/imhof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "fdakrig/errors.hpp"
#include "fdakrig/log.hpp"
#include "fdakrig/rng.hpp"

namespace fdakrig {
namespace {

void checkWeights(std::span<const double> weights) {
  if (weights.empty()) throw ArgumentError("imhof: at least one weight required");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw ArgumentError("imhof: weights must be positive and finite");
}

}  // namespace

double imhofUpperTail(std::span<const double> weights, double x) {
  checkWeights(weights);
  if (x <= 0.0) return 1.0;
  const double wmax = *std::max_element(weights.begin(), weights.end());
  // integrand sin(theta(u)) / (u rho(u))
  auto integrand = [&](double u) {
    if (u <= 0.0) {
      double s = 0.0;
      for (double w : weights) s += w;
      return 0.5 * (s - x);
    }
    double theta = -0.5 * x * u, logRho = 0.0;
    for (double w : weights) {
      theta += 0.5 * std::atan(w * u);
      logRho += 0.25 * std::log1p(w * w * u * u);
    }
    return std::sin(theta) / (u * std::exp(logRho));
  };
  // panels of half the asymptotic oscillation period; the panel sums
  // alternate, so the partial sums are accelerated by repeated averaging
  const double width = 2.0 * std::numbers::pi / x;
  const int sub = std::max(1, static_cast<int>(std::ceil(width * wmax / 2.0)));
  constexpr int kMaxPanels = 6000, kTail = 16, kCheck = 32;
  std::vector<double> partial;
  partial.reserve(kMaxPanels);
  auto accelerated = [&] {
    std::vector<double> t(partial.end() - kTail, partial.end());
    for (int level = 0; level + 1 < kTail; ++level)
      for (std::size_t i = 0; i + 1 < t.size() - static_cast<std::size_t>(level); ++i) t[i] = 0.5 * (t[i] + t[i + 1]);
    return t[0];
  };
  double sum = 0.0, last = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k < kMaxPanels; ++k) {
    double piece = 0.0;
    for (int j = 0; j < sub; ++j) {
      const double a = (k + static_cast<double>(j) / sub) * width;
      piece += boost::math::quadrature::gauss_kronrod<double, 21>::integrate(integrand, a, a + width / sub, 0);
    }
    if (!std::isfinite(piece)) throw LikelihoodError("imhof: non-finite integrand");
    sum += piece;
    partial.push_back(sum);
    if (std::abs(piece) < 1e-13 && k > 4) return 0.5 + sum / std::numbers::pi;
    if ((k + 1) % kCheck == 0 && k + 1 >= 2 * kCheck) {
      const double est = accelerated();
      if (std::abs(est - last) < 1e-12) return 0.5 + est / std::numbers::pi;
      last = est;
    }
  }
  return 0.5 + accelerated() / std::numbers::pi;
}

double monteCarloQuantile(std::span<const double> weights, double alpha, long samples, std::uint64_t seed) {
  checkWeights(weights);
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("monteCarloQuantile: alpha must lie in (0, 1)");
  std::mt19937_64 rng = makeStream(seed, {0x1a4f0fULL});
  std::normal_distribution<double> z;
  std::vector<double> q(static_cast<std::size_t>(samples));
  for (auto& v : q) {
    double s = 0.0;
    for (double w : weights) {
      const double e = z(rng);
      s += w * e * e;
    }
    v = s;
  }
  const auto k = static_cast<std::size_t>(std::clamp<double>(std::ceil((1.0 - alpha) * samples) - 1, 0, samples - 1));
  std::nth_element(q.begin(), q.begin() + static_cast<long>(k), q.end());
  return q[k];
}

double imhofQuantile(std::span<const double> weights, double alpha, const ImhofOptions& options) {
  checkWeights(weights);
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("imhofQuantile: alpha must lie in (0, 1)");
  const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
  if (*hi - *lo <= 1e-12 * *hi) {
    const boost::math::chi_squared chi(static_cast<double>(weights.size()));
    return *hi * boost::math::quantile(boost::math::complement(chi, alpha));
  }
  try {
    double mean = 0.0, var = 0.0;
    for (double w : weights) {
      mean += w;
      var += 2.0 * w * w;
    }
    auto f = [&](double q) { return imhofUpperTail(weights, q) - alpha; };
    double a = 0.0, b = mean + 4.0 * std::sqrt(var);
    double fb = f(b);
    for (int i = 0; i < 60 && fb > 0.0; ++i) {
      a = b;
      b *= 2.0;
      fb = f(b);
    }
    const double fa = a == 0.0 ? 1.0 - alpha : f(a);
    if (!(fa > 0.0 && fb <= 0.0) || !std::isfinite(fa) || !std::isfinite(fb))
      throw LikelihoodError("imhof: could not bracket the quantile");
    boost::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(
        f, a, b, fa, fb,
        [&](double l, double u) { return std::abs(u - l) <= options.relTol * std::max(1e-300, std::abs(l)); }, iters);
    const double q = 0.5 * (r.first + r.second);
    if (!std::isfinite(q) || q <= 0.0) throw LikelihoodError("imhof: quantile not finite");
    return q;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Numerical) throw;
    logWarn(std::string("imhofQuantile: ") + e.what() + "; using Monte Carlo");
    return monteCarloQuantile(weights, alpha, options.monteCarloSamples, options.seed);
  }
}

}  // namespace fdakrig
