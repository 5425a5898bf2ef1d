#include <gtest/gtest.h>

#include "support.hpp"
#include "xcal/tof.hpp"

namespace xcal::tof {
namespace {

using testing::gauss;
using testing::uniform;

CameraMatrix simple_camera() {
  Mat34 m = Mat34::Zero();
  m.leftCols<3>() = Vec3(200, 200, 1).asDiagonal();
  return CameraMatrix(m);
}

CameraMatrix tof_camera() {
  return CameraMatrix(testing::look_camera(300, Vec2(87.5, 71.5), Eigen::AngleAxisd(0.1, Vec3::UnitY()).toRotationMatrix(),
                                           Vec3(20, -40, 10)));
}

TEST(RangeSample, Validation) {
  EXPECT_THROW(RangeSample(Vec2(1, 1), 0.0), Error);
  EXPECT_THROW(RangeSample(Vec2(1, 1), 5000.1), Error);
  EXPECT_NO_THROW(RangeSample(Vec2(1, 1), 5000.0));
  EXPECT_NO_THROW(RangeSample(Vec2(1, 1), 7000.0, 8000.0));
}

TEST(Backproject, AxisRay) {
  Mat34 m = Mat34::Zero();
  m.leftCols<3>() = Mat3::Identity();
  const HPoint3 q = backproject(CameraMatrix(m), RangeSample(Vec2(0, 0), 5));
  EXPECT_LE((q.euclidean() - Vec3(0, 0, 5)).norm(), 1e-15);
}

TEST(Backproject, HandEvaluated) {
  const HPoint3 q = backproject(simple_camera(), RangeSample(Vec2(200, 0), 1000));
  EXPECT_LE((q.euclidean() - Vec3(1, 0, 1) * (1000 / std::sqrt(2.0))).norm(), 1e-10);
}

TEST(Backproject, SingularCamera) {
  try {
    backproject(CameraMatrix(Mat34::Zero()), RangeSample(Vec2(0, 0), 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidCamera);
  }
}

TEST(RefineRange, FrontalPlane) {
  Mat34 m = Mat34::Zero();
  m.leftCols<3>() = Mat3::Identity();
  const auto r = refine_range(CameraMatrix(m), HPoint2(0, 0), HPlane3(Vec4(0, 0, 1, -1234)));
  EXPECT_NEAR(r.rho, 1234.0, 1e-12);
}

TEST(RefineRange, SlantedPlane) {
  const HPlane3 v(Vec4(1, 0, 1, -3000));
  const auto r = refine_range(simple_camera(), HPoint2(0, 0), v);
  EXPECT_NEAR(r.rho, 3000.0, 1e-9);
  // Explicit ray-plane intersection: t (0, 0, 1) with x + z = 3000.
  EXPECT_LE((r.point.euclidean() - Vec3(0, 0, 3000)).norm(), 1e-9);
  EXPECT_NEAR(v.residual(r.point), 0.0, 1e-9);
}

TEST(RefineRange, Errors) {
  try {
    refine_range(simple_camera(), HPoint2(0, 0), HPlane3(Vec4(1, 0, 0, -10)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRayParallelToPlane);
  }
  try {
    refine_range(simple_camera(), HPoint2(0, 0), HPlane3(Vec4(0, 0, 1, 100)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPlaneBehindCamera);
  }
}

TEST(RadialResidual, MatchesDistanceAlongRay) {
  auto g = testing::rng(2);
  const CameraMatrix cam = tof_camera();
  const HPlane3 plane(Vec4(0.1, -0.2, 1, -2000));
  for (int k = 0; k < 20; ++k) {
    const Vec2 px(uniform(g, 10, 160), uniform(g, 10, 130));
    const auto on = refine_range(cam, HPoint2::from_pixel(px), plane);
    const double rho = on.rho + gauss(g, 20.0);
    const HPoint3 raw = backproject(cam, RangeSample(px, rho));
    EXPECT_NEAR(radial_residual(cam, raw, plane), (raw.euclidean() - on.point.euclidean()).norm(), 1e-9);
    EXPECT_NEAR(radial_residual(cam, raw, plane), std::abs(rho - on.rho), 1e-9);
    EXPECT_LE(perpendicular_distance(raw, plane), radial_residual(cam, raw, plane) + 1e-9);
  }
}

TEST(FitPlane, ExactCoplanar) {
  auto g = testing::rng(3);
  Mat34 m = Mat34::Zero();
  m.leftCols<3>() = Mat3::Identity();
  std::vector<HPoint3> pts;
  for (int k = 0; k < 100; ++k) pts.push_back(HPoint3(uniform(g, -500, 500), uniform(g, -500, 500), 2000));
  const FittedPlane f = fit_plane_ransac(pts, CameraMatrix(m));
  EXPECT_TRUE(homogeneous_equal(f.plane.coeffs(), Vec4(0, 0, 1, -2000), 1e-10));
  EXPECT_EQ(f.inlier_count(), 100u);
  EXPECT_LE(f.rms_radial_residual, 1e-9);
  EXPECT_NEAR(f.plane.normal().norm(), 1.0, 1e-12);
}

TEST(FitPlane, RejectsOutliers) {
  auto g = testing::rng(4);
  Mat34 m = Mat34::Zero();
  m.leftCols<3>() = Mat3::Identity();
  std::vector<HPoint3> pts;
  for (int k = 0; k < 70; ++k) pts.push_back(HPoint3(uniform(g, -500, 500), uniform(g, -500, 500), 2000));
  for (int k = 0; k < 30; ++k) {
    double z = 0.0;
    do {
      z = uniform(g, 1500, 2500);
    } while (std::abs(z - 2000) < 100);
    pts.push_back(HPoint3(uniform(g, -500, 500), uniform(g, -500, 500), z));
  }
  PlaneFitOptions o;
  o.seed = 7;
  const FittedPlane f = fit_plane_ransac(pts, CameraMatrix(m), o);
  const double angle = std::acos(std::min(1.0, std::abs(f.plane.normal().normalized().z()))) * 180 / M_PI;
  EXPECT_LE(angle, 0.5);
  for (int k = 70; k < 100; ++k) EXPECT_FALSE(f.inlier_mask[static_cast<std::size_t>(k)]);
}

TEST(FitPlane, Deterministic) {
  auto g = testing::rng(5);
  std::vector<HPoint3> pts;
  for (int k = 0; k < 80; ++k) {
    pts.push_back(HPoint3(uniform(g, -500, 500), uniform(g, -500, 500), 2000 + gauss(g, 5) + (k % 5 == 0 ? 300 : 0)));
  }
  PlaneFitOptions o;
  o.seed = 99;
  const FittedPlane a = fit_plane_ransac(pts, tof_camera(), o);
  const FittedPlane b = fit_plane_ransac(pts, tof_camera(), o);
  EXPECT_EQ(a.plane.coeffs(), b.plane.coeffs());
  EXPECT_EQ(a.inlier_mask, b.inlier_mask);
}

TEST(FitPlane, BreakdownSweep) {
  // Board-sized patch, 10 mm range noise, 40% gross range errors.
  const CameraMatrix cam(testing::look_camera(300, Vec2(87.5, 71.5), Mat3::Identity(), Vec3::Zero()));
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto g = testing::rng(100 + seed);
    const Vec3 normal = (Vec3(0, 0, -1) + testing::uniform3(g, -0.4, 0.4)).normalized();
    const Vec3 anchor(uniform(g, -100, 100), uniform(g, -100, 100), uniform(g, 1000, 2500));
    const HPlane3 plane(Vec4(normal.x(), normal.y(), normal.z(), -normal.dot(anchor)));
    std::vector<HPoint3> pts;
    for (int y = 40; y < 100; y += 2) {
      for (int x = 50; x < 125; x += 2) {
        double rho = refine_range(cam, HPoint2(x, y), plane).rho;
        if (uniform(g, 0, 1) < 0.4) {
          rho = std::max(100.0, rho + (uniform(g, 0, 1) < 0.5 ? -1 : 1) * uniform(g, 150, 450));
        } else {
          rho += gauss(g, 10.0);
        }
        pts.push_back(backproject(cam, RangeSample(Vec2(x, y), rho)));
      }
    }
    PlaneFitOptions o;
    o.seed = seed;
    const FittedPlane fit = fit_plane_ransac(pts, cam, o);
    const double cosang = std::min(1.0, std::abs(fit.plane.normalized().normal().dot(normal)));
    EXPECT_LE(std::acos(cosang) * 180.0 / M_PI, 1.0) << "seed " << seed;
  }
}

TEST(FitPlane, Collinear) {
  const std::vector<HPoint3> pts{HPoint3(0, 0, 1000), HPoint3(1, 1, 1000), HPoint3(2, 2, 1000)};
  try {
    fit_plane_ransac(pts, simple_camera());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateData);
  }
}

}  // namespace
}  // namespace xcal::tof
