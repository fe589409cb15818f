#include "fdakrig/optimize.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "fdakrig/errors.hpp"

namespace fdakrig {
namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

struct Pair {
  Eigen::VectorXd s, y;
  double rho;
};

// Two-loop recursion restricted to the free coordinates.
Eigen::VectorXd lbfgsDirection(const Eigen::VectorXd& g, const std::deque<Pair>& mem,
                               const Eigen::Array<bool, Eigen::Dynamic, 1>& free) {
  const Eigen::VectorXd mask = free.cast<double>().matrix();
  Eigen::VectorXd q = g.cwiseProduct(mask);
  std::vector<double> alpha(mem.size());
  for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
    alpha[i] = mem[i].rho * mem[i].s.cwiseProduct(mask).dot(q);
    q -= alpha[i] * mem[i].y.cwiseProduct(mask);
  }
  double gamma = 1.0;
  if (!mem.empty()) {
    const Pair& last = mem.back();
    const double yy = last.y.cwiseProduct(mask).squaredNorm();
    const double sy = last.s.cwiseProduct(mask).dot(last.y.cwiseProduct(mask));
    if (yy > 0.0 && sy > 0.0) gamma = sy / yy;
  }
  Eigen::VectorXd r = gamma * q;
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * mem[i].y.cwiseProduct(mask).dot(r);
    r += (alpha[i] - beta) * mem[i].s.cwiseProduct(mask);
  }
  return -r.cwiseProduct(mask);
}

}  // namespace

BoxMinimizeResult minimizeBox(const GradientObjective& f, const Eigen::VectorXd& x0,
                              const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                              const BoxMinimizeConfig& config) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) throw ArgumentError("minimizeBox: bound dimensions differ from x0");
  if ((lower.array() > upper.array()).any()) throw ArgumentError("minimizeBox: lower bound exceeds upper bound");

  BoxMinimizeResult res;
  Eigen::VectorXd x = project(x0, lower, upper);
  Eigen::VectorXd g(n);
  double fx = f(x, &g);
  ++res.evaluations;
  if (!std::isfinite(fx) || !g.allFinite()) throw FitFailure("minimizeBox: objective not finite at the start");

  std::deque<Pair> mem;
  auto projectedGradient = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& gv) {
    return (xv - project(xv - gv, lower, upper)).cwiseAbs().maxCoeff();
  };

  for (res.iterations = 0; res.iterations < config.maxIterations; ++res.iterations) {
    res.projectedGradient = projectedGradient(x, g);
    if (res.projectedGradient <= config.gradTol) {
      res.converged = true;
      break;
    }
    Eigen::Array<bool, Eigen::Dynamic, 1> free(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool atLo = x(i) <= lower(i) && g(i) > 0.0;
      const bool atHi = x(i) >= upper(i) && g(i) < 0.0;
      free(i) = !(atLo || atHi);
    }
    Eigen::VectorXd d = lbfgsDirection(g, mem, free);
    if (!(g.dot(d) < 0.0)) {
      mem.clear();
      d = -g.cwiseProduct(free.cast<double>().matrix());
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double step = 1.0;
      if (mem.empty()) step = std::min(1.0, 1.0 / std::max(1e-300, d.cwiseAbs().maxCoeff()));
      for (int bt = 0; bt < config.maxBacktracks; ++bt, step *= 0.5) {
        const Eigen::VectorXd xn = project(x + step * d, lower, upper);
        const Eigen::VectorXd dx = xn - x;
        if (dx.cwiseAbs().maxCoeff() == 0.0) break;
        Eigen::VectorXd gn(n);
        double fn;
        try {
          fn = f(xn, &gn);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::Numerical) throw;
          fn = std::numeric_limits<double>::infinity();
        }
        ++res.evaluations;
        if (std::isfinite(fn) && gn.allFinite() && fn <= fx + 1e-4 * g.dot(dx)) {
          const Eigen::VectorXd y = gn - g;
          const double sy = dx.dot(y);
          if (sy > 1e-10 * dx.norm() * y.norm()) {
            mem.push_back({dx, y, 1.0 / sy});
            if (static_cast<int>(mem.size()) > config.memory) mem.pop_front();
          }
          x = xn;
          g = gn;
          fx = fn;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        if (mem.empty()) break;
        // retry along steepest descent with a fresh memory
        mem.clear();
        d = -g.cwiseProduct(free.cast<double>().matrix());
      }
    }
    if (!accepted) break;
  }
  res.x = x;
  res.value = fx;
  res.projectedGradient = projectedGradient(x, g);
  if (res.projectedGradient <= config.gradTol) res.converged = true;
  return res;
}

Eigen::VectorXd numericGradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + step;
    xm(i) = x(i) - step;
    g(i) = (f(xp) - f(xm)) / (2.0 * step);
    xp(i) = xm(i) = x(i);
  }
  return g;
}

}  // namespace fdakrig
