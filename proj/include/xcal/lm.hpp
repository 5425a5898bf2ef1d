#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace xcal::lm {

// Defaults: lambda0 = 1e-3, x0.3 on accept, x3 on reject; stop on relative
// objective decrease < 1e-12, step norm < 1e-12 or 100 iterations.
struct Options {
  double initial_lambda = 1e-3;
  double lambda_decrease = 0.3;
  double lambda_increase = 3.0;
  double max_lambda = 1e16;
  double relative_decrease_tolerance = 1e-12;
  double step_tolerance = 1e-12;
  double absolute_cost_tolerance = 1e-24;
  int max_iterations = 100;
  double fd_relative_step = 1e-6;
  double fd_min_step = 1e-9;
};

using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
// Applied to every accepted iterate; used to re-fix the gauge of homogeneous
// parameter vectors. Must not change the residuals.
using GaugeFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using ProgressCallback = std::function<void(int iteration, double cost)>;

struct Summary {
  Eigen::VectorXd parameters;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;  // accepted steps
  bool converged = false;
  // Objective after the start and after every accepted step.
  std::vector<double> cost_history;
};

Eigen::MatrixXd numeric_jacobian(const ResidualFunction& residuals, const Eigen::VectorXd& x,
                                 const Options& options = {});

/// Minimizes the sum of squared residuals. Only strictly decreasing steps are
/// accepted, so cost_history is non-increasing. Throws kInvalidInitialization
/// if the objective is not finite at x0.
Summary minimize(const ResidualFunction& residuals, const Eigen::VectorXd& x0,
                 const Options& options = {}, const GaugeFunction& gauge = {},
                 const ProgressCallback& progress = {});

}  // namespace xcal::lm
