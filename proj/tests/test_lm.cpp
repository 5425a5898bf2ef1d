#include <gtest/gtest.h>

#include <Eigen/Cholesky>

#include "xcal/error.hpp"
#include "xcal/lm.hpp"

namespace xcal::lm {
namespace {

Eigen::VectorXd rosenbrock(const Eigen::VectorXd& x) {
  Eigen::VectorXd r(2);
  r << 10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0];
  return r;
}

TEST(Lm, Rosenbrock) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  Options o;
  o.max_iterations = 500;
  const Summary s = minimize(rosenbrock, x0, o);
  EXPECT_NEAR(s.parameters[0], 1.0, 1e-6);
  EXPECT_NEAR(s.parameters[1], 1.0, 1e-6);
  EXPECT_LT(s.final_cost, 1e-12);
  for (std::size_t k = 1; k < s.cost_history.size(); ++k) EXPECT_LT(s.cost_history[k], s.cost_history[k - 1]);
}

TEST(Lm, LinearLeastSquares) {
  // r = A x - b with a known normal-equation solution.
  Eigen::MatrixXd a(3, 2);
  a << 1, 0, 0, 1, 1, 1;
  Eigen::VectorXd b(3);
  b << 1, 2, 4;
  const Eigen::VectorXd expected = (a.transpose() * a).ldlt().solve(a.transpose() * b);
  const Summary s = minimize([&](const Eigen::VectorXd& x) { Eigen::VectorXd r = a * x - b; return r; },
                             Eigen::VectorXd::Zero(2));
  EXPECT_LE((s.parameters - expected).norm(), 1e-8);
}

TEST(Lm, NonFiniteStartRejected) {
  auto bad = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(1);
    r << std::log(x[0]);
    return r;
  };
  try {
    minimize(bad, Eigen::VectorXd::Constant(1, -1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidInitialization);
  }
}

TEST(Lm, AlreadyOptimalStopsImmediately) {
  const Summary s = minimize([](const Eigen::VectorXd& x) { Eigen::VectorXd r = x; return r; },
                             Eigen::VectorXd::Zero(3));
  EXPECT_EQ(s.iterations, 0);
  EXPECT_EQ(s.final_cost, 0.0);
}

TEST(Lm, IterationCapClearsConvergedFlag) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  Options o;
  o.max_iterations = 2;
  const Summary s = minimize(rosenbrock, x0, o);
  EXPECT_LE(s.iterations, 2);
  EXPECT_FALSE(s.converged);
}

TEST(Lm, NumericJacobianMatchesAnalytic) {
  Eigen::VectorXd x(2);
  x << 0.3, -0.7;
  const Eigen::MatrixXd j = numeric_jacobian(rosenbrock, x);
  Eigen::MatrixXd expected(2, 2);
  expected << -20.0 * x[0], 10.0, -1.0, 0.0;
  EXPECT_LE((j - expected).norm(), 1e-7);
}

TEST(Lm, GaugeAppliedToIterates) {
  // Minimize |x - (3, 4)|^2 with a gauge that rescales x to unit norm; the
  // result must be the projection onto the unit circle.
  auto res = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r = x.normalized() * 5.0 - Eigen::Vector2d(3, 4);
    return r;
  };
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.0;
  const Summary s = minimize(res, x0, {}, [](const Eigen::VectorXd& x) { Eigen::VectorXd y = x.normalized(); return y; });
  EXPECT_NEAR(s.parameters.norm(), 1.0, 1e-14);
  EXPECT_NEAR(s.parameters[0], 0.6, 1e-6);
}

}  // namespace
}  // namespace xcal::lm
