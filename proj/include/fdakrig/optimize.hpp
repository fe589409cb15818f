#pragma once

#include <functional>

#include <Eigen/Dense>

namespace fdakrig {

/// Objective returning f(x); fills `grad` when it is non-null.
using GradientObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BoxMinimizeConfig {
  int maxIterations = 200;
  double gradTol = 1e-5;  // on the infinity norm of the projected gradient
  int memory = 8;
  int maxBacktracks = 40;
};

struct BoxMinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double projectedGradient = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Limited-memory quasi-Newton minimization under box constraints. Variables
/// at a bound whose gradient points outward are held fixed; the remaining
/// ones take an L-BFGS step followed by a projected backtracking search.
BoxMinimizeResult minimizeBox(const GradientObjective& f, const Eigen::VectorXd& x0,
                              const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                              const BoxMinimizeConfig& config = {});

/// Central-difference gradient of a scalar function with step h * max(1, |x_i|).
Eigen::VectorXd numericGradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x, double h = 1e-6);

}  // namespace fdakrig
