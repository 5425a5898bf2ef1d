#include <gtest/gtest.h>

#include "support.hpp"
#include "xcal/geom.hpp"

namespace xcal {
namespace {

using testing::gauss;
using testing::uniform;
using testing::uniform3;

TEST(InhomogDistance, Examples) {
  EXPECT_DOUBLE_EQ(inhomog_distance(HPoint2(1, 2, 1), HPoint2(1, 2, 1)), 0.0);
  EXPECT_DOUBLE_EQ(inhomog_distance(HPoint2(2, 0, 2), HPoint2(1, 0, 1)), 0.0);
  EXPECT_DOUBLE_EQ(inhomog_distance(HPoint2(3, 4, 1), HPoint2(0, 0, 1)), 5.0);
}

TEST(InhomogDistance, PointAtInfinityRejected) {
  EXPECT_THROW(inhomog_distance(HPoint2(1, 0, 0), HPoint2(0, 0, 1)), Error);
}

TEST(Wedge, SelfAnnihilation) {
  const HPoint3 q(1, 2, 3, 1);
  EXPECT_LE((wedge(q) * q.coords()).norm(), 1e-14);
}

TEST(Wedge, OriginBlocks) {
  const Mat64 w = wedge(HPoint3(0, 0, 0, 1));
  Mat64 expected = Mat64::Zero();
  expected.topLeftCorner<3, 3>() = Mat3::Identity();
  EXPECT_EQ(w, expected);
}

TEST(Wedge, TopBlockIsDistance) {
  auto g = testing::rng(3);
  for (int k = 0; k < 20; ++k) {
    const Vec3 p = uniform3(g, -100, 100);
    const Vec3 q = uniform3(g, -100, 100);
    const Eigen::Matrix<double, 6, 1> v = wedge(HPoint3::from_euclidean(q)) * p.homogeneous();
    EXPECT_NEAR(v.head<3>().norm(), (p - q).norm(), 1e-10);
    EXPECT_LE((v.tail<3>() - q.cross(p)).norm(), 1e-9);
  }
}

TEST(CrossMatrix, Examples) {
  EXPECT_EQ(cross_matrix(Vec3::Zero()), Mat3::Zero());
  EXPECT_EQ(cross_matrix(Vec3(1, 0, 0)) * Vec3(0, 1, 0), Vec3(0, 0, 1));
  EXPECT_EQ(cross_matrix(Vec3(3, -1, 2)) * Vec3(3, -1, 2), Vec3::Zero());
  const Mat3 m = cross_matrix(Vec3(0.3, -2, 5));
  EXPECT_EQ(m, Mat3(-m.transpose()));
}

TEST(NormalizePoints, SymmetricPair) {
  const std::vector<HPoint3> pts{HPoint3(-1, 0, 0), HPoint3(1, 0, 0)};
  const auto n = normalize_points(std::span<const HPoint3>(pts));
  EXPECT_NEAR(n.points[0].delta().x(), -std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(n.points[1].delta().x(), std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(n.transform(0, 0), std::sqrt(3.0), 1e-15);
}

TEST(NormalizePoints, Idempotent) {
  auto g = testing::rng(5);
  std::vector<HPoint3> pts;
  for (int k = 0; k < 30; ++k) pts.push_back(HPoint3::from_euclidean(uniform3(g, -500, 500)));
  const auto once = normalize_points(std::span<const HPoint3>(pts));
  const auto twice = normalize_points(std::span<const HPoint3>(once.points));
  EXPECT_LE((twice.transform - Mat4::Identity()).norm(), 1e-12);
}

TEST(NormalizePoints, RandomCloudPostconditions) {
  auto g = testing::rng(6);
  std::vector<HPoint3> pts;
  for (int k = 0; k < 50; ++k) {
    const double w = uniform(g, 0.5, 2.0);
    pts.push_back(HPoint3(Vec4(uniform(g, -800, 800), uniform(g, -800, 800), uniform(g, 0, 3000), 1.0) * w));
  }
  const auto n = normalize_points(std::span<const HPoint3>(pts));
  Vec3 c = Vec3::Zero();
  double mean_norm = 0.0;
  for (const auto& p : n.points) {
    c += p.euclidean();
    mean_norm += p.euclidean().norm();
  }
  EXPECT_LE((c / 50.0).norm(), 1e-12);
  EXPECT_NEAR(mean_norm / 50.0, std::sqrt(3.0), 1e-12);
}

TEST(NormalizePoints, Errors) {
  const std::vector<HPoint3> same{HPoint3(1, 1, 1), HPoint3(2, 2, 2, 2)};
  const std::vector<HPoint3> inf{HPoint3(1, 1, 1), HPoint3(1, 0, 0, 0)};
  try {
    normalize_points(std::span<const HPoint3>(same));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateScale);
  }
  try {
    normalize_points(std::span<const HPoint3>(inf));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPointAtInfinity);
  }
}

TEST(ApplyHomography, Identity) {
  const HPoint3 p(1, 2, 3);
  const HPlane3 u(Vec4(0, 0, 1, -3));
  EXPECT_EQ(apply_homography(Homography3::identity(), p).coords(), p.coords());
  EXPECT_TRUE(homogeneous_equal(transform_plane(Homography3::identity(), u).coeffs(), u.coeffs()));
}

TEST(ApplyHomography, Translation) {
  Mat4 t = Mat4::Identity();
  t.topRightCorner<3, 1>() = Vec3(10, -20, 30);
  EXPECT_EQ(apply_homography(Homography3(t), HPoint3(0, 0, 0)).euclidean(), Vec3(10, -20, 30));
}

TEST(ApplyHomography, IncidencePreserved) {
  auto g = testing::rng(9);
  for (int k = 0; k < 20; ++k) {
    const Homography3 h(testing::random_homography(g));
    const Vec3 n = uniform3(g, -1, 1).normalized();
    const double d = uniform(g, -1000, 1000);
    const Vec3 on = n.unitOrthogonal() * uniform(g, -300, 300) - n * d;
    const HPlane3 u(Vec4(n.x(), n.y(), n.z(), d));
    const HPoint3 p = HPoint3::from_euclidean(on);
    ASSERT_NEAR(u.residual(p), 0.0, 1e-9);
    const HPoint3 hp = apply_homography(h, p);
    const HPlane3 hu = transform_plane(h, u);
    EXPECT_NEAR(hu.coeffs().normalized().dot(hp.coords().normalized()), 0.0, 1e-10);
  }
}

TEST(Homography3, SingularRejected) {
  Mat4 m = Mat4::Identity();
  m(3, 3) = 0.0;
  m(3, 2) = 0.0;
  EXPECT_THROW(Homography3{m}, Error);
}

TEST(HPoint3, EuclideanAtInfinityRejected) {
  try {
    (void)HPoint3(1, 0, 0, 0).euclidean();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPointAtInfinity);
  }
}

TEST(HomogeneousEqual, ScaleAndSign) {
  const Vec4 a(1, -2, 3, 4);
  EXPECT_TRUE(homogeneous_equal(a, -2.5 * a));
  EXPECT_FALSE(homogeneous_equal(a, Vec4(1, -2, 3, 4.001)));
  EXPECT_TRUE(homogeneous_equal(a, Vec4(1, -2, 3, 4.001), 1e-3));
}

TEST(Canonical, LargestEntryPositive) {
  const Eigen::MatrixXd c = canonical(Vec4(1, -5, 2, 0));
  EXPECT_NEAR(c.norm(), 1.0, 1e-15);
  EXPECT_GT(c(1, 0), 0.0);
}

TEST(Rodrigues, RoundTrip) {
  auto g = testing::rng(11);
  for (int k = 0; k < 20; ++k) {
    const Vec3 r = uniform3(g, -1.5, 1.5);
    EXPECT_LE((matrix_to_rodrigues(rodrigues_to_matrix(r)) - r).norm(), 1e-12);
  }
  EXPECT_LE((rodrigues_to_matrix(Vec3(0, 0, M_PI / 2)) * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm(), 1e-15);
}

TEST(Similarity3, InverseComposes) {
  const Similarity3 s(2.0, Vec3(0.1, -0.2, 0.3), Vec3(10, 20, 30));
  EXPECT_LE((s.matrix() * s.inverse().matrix() - Mat4::Identity()).norm(), 1e-12);
  EXPECT_THROW(Similarity3(-1.0, Vec3::Zero(), Vec3::Zero()), Error);
}

TEST(RigidTransform3, RejectsReflection) {
  EXPECT_THROW(RigidTransform3(Vec3(-1, 1, 1).asDiagonal().toDenseMatrix(), Vec3::Zero()), Error);
}

TEST(CameraMatrix, CentreIsNullVector) {
  const CameraMatrix c(testing::look_camera(500, Vec2(320, 240), Mat3::Identity(), Vec3(-100, 0, 0)));
  EXPECT_TRUE(homogeneous_equal(c.centre(), Vec4(100, 0, 0, 1)));
}

}  // namespace
}  // namespace xcal
