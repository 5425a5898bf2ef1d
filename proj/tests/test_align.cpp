#include <gtest/gtest.h>

#include "support.hpp"
#include "xcal/align.hpp"
#include "xcal/stereo.hpp"

namespace xcal::align {
namespace {

using testing::make_align_scene;
using testing::unit_distance;

std::vector<HPoint3> stereo_points(const testing::AlignScene& s) {
  std::vector<HPoint3> out;
  for (const auto& p : s.pairs) out.push_back(p.stereo_point);
  return out;
}

std::vector<HPoint2> left_pixels(const testing::AlignScene& s) {
  std::vector<HPoint2> out;
  for (const auto& o : s.images) out.push_back(o.left);
  return out;
}

// Inverse-disparity distortion of the ToF frame composed with a rigid map.
Mat4 distorted_truth(double c0 = 3e-4, double c1 = 0.97) {
  Mat4 hd = Mat4::Identity();
  hd(3, 2) = c0;
  hd(3, 3) = c1;
  return hd * testing::rig_transform();
}

TEST(Dlt, IdentityPairs) {
  auto g = testing::rng(1);
  std::vector<Correspondence3D3D> pairs;
  for (int k = 0; k < 20; ++k) {
    const HPoint3 p = HPoint3::from_euclidean(testing::uniform3(g, -1000, 1000));
    pairs.push_back({p, p});
  }
  EXPECT_LE(unit_distance(dlt_homography3(pairs).matrix(), Mat4::Identity()), 1e-10);
}

TEST(Dlt, ExactRecovery) {
  auto g = testing::rng(2);
  const Mat4 h = testing::random_homography(g);
  const auto s = make_align_scene(3, h);
  ASSERT_EQ(s.pairs.size(), 350u);
  EXPECT_LE(unit_distance(dlt_homography3(s.pairs).matrix(), h), 1e-8);
}

TEST(Dlt, FourPairsRejected) {
  const auto s = make_align_scene(4, Mat4::Identity(), 1);
  try {
    dlt_homography3(std::span(s.pairs).first(4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(Dlt, CoplanarRejected) {
  const auto s = make_align_scene(5, testing::rig_transform(), 1);
  try {
    dlt_homography3(s.pairs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateConfiguration);
  }
}

TEST(Dlt, AlgebraicResidualEqualsSmallestSingularValue) {
  const auto s = make_align_scene(6, distorted_truth(), 10, 0.0, 5.0);
  const DltResult r = dlt_homography3_detailed(s.pairs);
  EXPECT_NEAR(r.algebraic_residual, r.singular_values[15], 1e-12);
  EXPECT_GT(r.algebraic_residual, 0.0);
  for (int k = 1; k < 16; ++k) EXPECT_LE(r.singular_values[k], r.singular_values[k - 1]);
}

TEST(ReprojectionError, Examples) {
  const auto s = make_align_scene(7, Mat4::Identity(), 1);
  const auto pts = stereo_points(s);
  auto px = left_pixels(s);
  EXPECT_NEAR(reprojection_error(s.left, pts, px), 0.0, 1e-18);
  px[3] = HPoint2::from_pixel(px[3].pixel() + Vec2(3, 4));
  EXPECT_NEAR(reprojection_error(s.left, pts, px), 25.0, 1e-9);
}

TEST(ReprojectionError, ChiSquareExpectation) {
  double sum = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    const auto s = make_align_scene(100 + seed, Mat4::Identity(), 10, 0.5);
    sum += reprojection_error(s.left, stereo_points(s), left_pixels(s)) / 350.0;
  }
  EXPECT_NEAR(sum / 10.0, 0.5, 0.075);
}

TEST(RefineJoint, NoiseFreeUnchanged) {
  const auto s = make_align_scene(8, testing::rig_transform());
  const Homography3 h = dlt_homography3(s.pairs);
  const AlignmentResult r = refine_joint(h, s.pairs, s.images, s.left, s.right);
  EXPECT_LE(unit_distance(r.homography.matrix(), h.matrix()), 1e-10);
  EXPECT_LE(r.iterations, 1);
}

TEST(RefineJoint, RecoversFromPerturbation) {
  auto g = testing::rng(9);
  const Mat4 truth = distorted_truth();
  const auto s = make_align_scene(9, truth);
  Mat4 start = truth / truth.norm();
  for (int i = 0; i < 16; ++i) start(i / 4, i % 4) *= 1.0 + 0.01 * testing::gauss(g, 1.0);
  const AlignmentResult r = refine_joint(Homography3(start), s.pairs, s.images, s.left, s.right);
  EXPECT_LE(r.final_error, 1e-6);
  EXPECT_LE(unit_distance(r.homography.matrix(), truth), 1e-8);
}

TEST(RefineJoint, CamerasUntouchedAndCountsAudited) {
  const auto s = make_align_scene(10, distorted_truth(), 10, 0.3, 8.0);
  const Mat34 left_before = s.left.matrix();
  const Mat34 right_before = s.right.matrix();
  const Mat3 f_before = stereo::fundamental_from_cameras(s.left, s.right).matrix();
  std::vector<double> progress;
  const AlignmentResult r = refine_joint(dlt_homography3(s.pairs), s.pairs, s.images, s.left, s.right, {},
                                         [&](int, double cost) { progress.push_back(cost); });
  EXPECT_EQ(s.left.matrix(), left_before);
  EXPECT_EQ(s.right.matrix(), right_before);
  EXPECT_EQ(stereo::fundamental_from_cameras(s.left, s.right).matrix(), f_before);
  EXPECT_FALSE(r.refined_left.has_value());
  EXPECT_EQ(r.raw_parameters, 16);
  EXPECT_EQ(r.effective_parameters, 15);
  EXPECT_LE(r.final_cost, r.initial_cost);
  for (std::size_t k = 1; k < r.cost_history.size(); ++k) EXPECT_LE(r.cost_history[k], r.cost_history[k - 1]);
  EXPECT_NEAR(r.final_left_cost + r.final_right_cost, r.final_cost, 1e-9 * r.final_cost);
}

TEST(RefineJoint, NonFiniteStart) {
  const auto s = make_align_scene(11, Mat4::Identity(), 2);
  // H^-1 puts the first ToF point on the left camera's principal plane.
  Mat4 h_inv = Mat4::Identity();
  h_inv(2, 3) = -s.pairs[0].tof_point.euclidean().z();
  try {
    refine_joint(Homography3(h_inv.inverse()), s.pairs, s.images, s.left, s.right);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidInitialization);
  }
}

TEST(RefineSeparate, NoiseFreeMatchesDlt) {
  const auto s = make_align_scene(12, testing::rig_transform());
  const Homography3 h = dlt_homography3(s.pairs);
  const AlignmentResult r = refine_separate(h, s.pairs, s.images, s.left, s.right);
  ASSERT_TRUE(r.refined_left.has_value());
  EXPECT_LE(unit_distance(r.refined_left->matrix(), s.left.matrix() * h.inverse_matrix()), 1e-9);
  EXPECT_LE(unit_distance(r.refined_right->matrix(), s.right.matrix() * h.inverse_matrix()), 1e-9);
  EXPECT_EQ(r.raw_parameters, 24);
  EXPECT_EQ(r.effective_parameters, 22);
}

TEST(RefineSeparate, DistortedDataChangesF) {
  const auto s = make_align_scene(13, distorted_truth(), 10, 0.3, 8.0);
  const Homography3 h = dlt_homography3(s.pairs);
  const AlignmentResult joint = refine_joint(h, s.pairs, s.images, s.left, s.right);
  const AlignmentResult sep = refine_separate(h, s.pairs, s.images, s.left, s.right);
  EXPECT_LE(sep.final_left_cost, joint.final_left_cost + 1e-9);
  EXPECT_LE(sep.final_right_cost, joint.final_right_cost + 1e-9);
  EXPECT_LE(sep.final_cost, joint.final_cost + 1e-9);
  const Mat3 f = stereo::fundamental_from_cameras(s.left, s.right).matrix();
  const Mat3 f_star = stereo::fundamental_from_cameras(*sep.refined_left, *sep.refined_right).matrix();
  EXPECT_GT(unit_distance(f, f_star), 1e-6);
}

TEST(Procrustes, Identity) {
  const auto s = make_align_scene(14, Mat4::Identity(), 2);
  const Similarity3 r = procrustes_similarity(s.pairs);
  EXPECT_NEAR(r.scale(), 1.0, 1e-12);
  EXPECT_LE((r.rotation() - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LE(r.translation().norm(), 1e-9);
}

TEST(Procrustes, ScaledRotation) {
  Mat4 t = Mat4::Identity();
  const Mat3 rz = Eigen::AngleAxisd(M_PI / 6, Vec3::UnitZ()).toRotationMatrix();
  t.topLeftCorner<3, 3>() = 2.0 * rz;
  t.topRightCorner<3, 1>() = Vec3(10, -5, 7);
  const auto s = make_align_scene(15, t, 2);
  const Similarity3 r = procrustes_similarity(s.pairs);
  EXPECT_NEAR(r.scale(), 2.0, 1e-10);
  EXPECT_LE((r.rotation() - rz).norm(), 1e-10);
  EXPECT_LE((r.translation() - Vec3(10, -5, 7)).norm(), 1e-10);
}

TEST(Procrustes, MirrorGivesProperRotation) {
  Mat4 t = Mat4::Identity();
  t(0, 0) = -1.0;
  const auto s = make_align_scene(16, t, 2);
  const Similarity3 r = procrustes_similarity(s.pairs);
  EXPECT_NEAR(r.rotation().determinant(), 1.0, 1e-12);
}

TEST(Procrustes, Collinear) {
  std::vector<Correspondence3D3D> pairs;
  for (int k = 0; k < 5; ++k) pairs.push_back({HPoint3(k, k, k), HPoint3(k, k, k)});
  try {
    procrustes_similarity(pairs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateData);
  }
}

TEST(RefineSimilarity, CleanRecovery) {
  const Similarity3 truth(1.05, Vec3(0.02, -0.01, 0.03), Vec3(-85, 160, 5));
  const auto s = make_align_scene(17, truth.matrix());
  // Start away from the truth so LM has work to do.
  const Similarity3 start(1.0, Vec3::Zero(), Vec3(-80, 150, 0));
  const AlignmentResult r = refine_similarity(start, s.pairs, s.images, s.left, s.right);
  ASSERT_TRUE(r.similarity.has_value());
  EXPECT_NEAR(r.similarity->scale(), 1.05, 1e-8);
  EXPECT_LE((r.similarity->rodrigues() - truth.rodrigues()).norm(), 1e-8);
  EXPECT_LE((r.similarity->translation() - truth.translation()).norm(), 1e-6);
  EXPECT_EQ(r.raw_parameters, 7);
}

TEST(RefineSimilarity, ModelMismatch) {
  const auto s = make_align_scene(18, distorted_truth());
  const Homography3 h = dlt_homography3(s.pairs);
  const AlignmentResult hom = refine_joint(h, s.pairs, s.images, s.left, s.right);
  const AlignmentResult sim = refine_similarity(procrustes_similarity(s.pairs), s.pairs, s.images, s.left, s.right);
  EXPECT_GT(sim.final_error, hom.final_error);
  EXPECT_LE(hom.final_error, 1e-6);
  EXPECT_GT(sim.similarity->scale(), 0.0);
}

TEST(InverseDisparity, NeutralIsIdentity) {
  EXPECT_EQ(inverse_disparity_homography(0.0, 1.0).matrix(), Mat4::Identity());
  const Mat4 m = inverse_disparity_homography(2e-4, 0.9).matrix();
  EXPECT_EQ(m(3, 2), 2e-4);
  EXPECT_EQ(m(3, 3), 0.9);
}

TEST(RefinementMode, Names) {
  for (const auto m : {RefinementMode::kDltOnly, RefinementMode::kJoint, RefinementMode::kSeparate,
                       RefinementMode::kSimilarity}) {
    EXPECT_EQ(refinement_mode_from_string(to_string(m)), m);
  }
  EXPECT_THROW(refinement_mode_from_string("affine"), Error);
}

}  // namespace
}  // namespace xcal::align
