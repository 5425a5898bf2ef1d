#include "xcal/lm.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "xcal/error.hpp"

namespace xcal::lm {

Eigen::MatrixXd numeric_jacobian(const ResidualFunction& residuals, const Eigen::VectorXd& x,
                                 const Options& options) {
  Eigen::MatrixXd jac;
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = std::max(options.fd_relative_step * std::abs(x[i]), options.fd_min_step);
    xp[i] = x[i] + h;
    const Eigen::VectorXd rp = residuals(xp);
    xp[i] = x[i] - h;
    const Eigen::VectorXd rm = residuals(xp);
    xp[i] = x[i];
    if (jac.size() == 0) jac.resize(rp.size(), x.size());
    jac.col(i) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

Summary minimize(const ResidualFunction& residuals, const Eigen::VectorXd& x0,
                 const Options& options, const GaugeFunction& gauge,
                 const ProgressCallback& progress) {
  Summary out;
  Eigen::VectorXd x = gauge ? gauge(x0) : x0;
  Eigen::VectorXd r = residuals(x);
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) {
    throw Error(ErrorCode::kInvalidInitialization, "objective is not finite at the initial point");
  }
  out.initial_cost = cost;
  out.cost_history.push_back(cost);
  double lambda = options.initial_lambda;

  for (int outer = 0; outer < options.max_iterations; ++outer) {
    if (cost <= options.absolute_cost_tolerance) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd jac = numeric_jacobian(residuals, x, options);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    const double diag_floor = 1e-12 * std::max(jtj.diagonal().maxCoeff(), 1e-300);

    bool accepted = false;
    bool stop = false;
    while (!accepted && !stop) {
      Eigen::MatrixXd damped = jtj;
      for (Eigen::Index i = 0; i < damped.rows(); ++i) {
        damped(i, i) += lambda * std::max(jtj(i, i), diag_floor);
      }
      const Eigen::VectorXd step = damped.ldlt().solve(-grad);
      if (!step.allFinite() ||
          step.norm() < options.step_tolerance * (x.norm() + options.step_tolerance)) {
        out.converged = step.allFinite();
        stop = true;
        break;
      }
      Eigen::VectorXd x_new = x + step;
      if (gauge) x_new = gauge(x_new);
      const Eigen::VectorXd r_new = residuals(x_new);
      const double cost_new = r_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new < cost) {
        const double relative = (cost - cost_new) / cost;
        x = x_new;
        r = r_new;
        cost = cost_new;
        lambda = std::max(lambda * options.lambda_decrease, 1e-300);
        ++out.iterations;
        out.cost_history.push_back(cost);
        if (progress) progress(out.iterations, cost);
        accepted = true;
        if (relative < options.relative_decrease_tolerance) {
          out.converged = true;
          stop = true;
        }
      } else {
        lambda *= options.lambda_increase;
        if (lambda > options.max_lambda) {
          // No descent direction left at working precision.
          out.converged = true;
          stop = true;
        }
      }
    }
    if (stop) break;
  }
  out.parameters = x;
  out.final_cost = cost;
  return out;
}

}  // namespace xcal::lm
