#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/SVD>

#include "xcal/geom.hpp"

namespace xcal::testing {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline double gauss(std::mt19937_64& g, double sigma) {
  return std::normal_distribution<double>(0.0, sigma)(g);
}

inline Vec3 uniform3(std::mt19937_64& g, double lo, double hi) {
  return Vec3(uniform(g, lo, hi), uniform(g, lo, hi), uniform(g, lo, hi));
}

inline Mat3 random_rotation(std::mt19937_64& g, double max_angle_rad = M_PI) {
  const Vec3 axis = Vec3(gauss(g, 1.0), gauss(g, 1.0), gauss(g, 1.0)).normalized();
  return Eigen::AngleAxisd(uniform(g, -max_angle_rad, max_angle_rad), axis).toRotationMatrix();
}

inline double condition(const Eigen::MatrixXd& m) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  return s[0] / s[s.size() - 1];
}

// Identity plus a random perturbation, redrawn until the condition number is
// at most max_condition.
inline Mat4 random_homography(std::mt19937_64& g, double spread = 0.3, double max_condition = 1e4) {
  for (;;) {
    Mat4 h = Mat4::Identity();
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) h(r, c) += uniform(g, -spread, spread);
    }
    // Keep the projective row mild so points in a 1 m cube stay finite.
    h.row(3).head<3>() *= 1e-3;
    if (condition(h) <= max_condition) return h;
  }
}

inline Mat34 look_camera(double focal, const Vec2& pp, const Mat3& r, const Vec3& t) {
  Mat3 k;
  k << focal, 0, pp.x(), 0, focal, pp.y(), 0, 0, 1;
  Mat34 rt;
  rt << r, t;
  return k * rt;
}

// n points on a 7x5 grid (40 mm squares) in a random plane about 2 m ahead.
inline std::vector<Vec3> random_board(std::mt19937_64& g) {
  const Mat3 r = random_rotation(g, 0.5);
  const Vec3 centre(uniform(g, -300, 300), uniform(g, -200, 200), uniform(g, 1500, 2500));
  std::vector<Vec3> out;
  for (int row = 0; row < 5; ++row) {
    for (int col = 0; col < 7; ++col) out.push_back(centre + r * Vec3((col - 3) * 40.0, (row - 2) * 40.0, 0.0));
  }
  return out;
}

// Sign-agnostic distance between unit-Frobenius rescalings.
inline double unit_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd an = a / a.norm();
  const Eigen::MatrixXd bn = b / b.norm();
  return std::min((an - bn).norm(), (an + bn).norm());
}

}  // namespace xcal::testing

#include "xcal/align.hpp"

namespace xcal::testing {

struct AlignScene {
  CameraMatrix left{Mat34::Zero()};
  CameraMatrix right{Mat34::Zero()};
  Mat4 truth = Mat4::Identity();
  std::vector<align::Correspondence3D3D> pairs;
  std::vector<align::ImageObservation> images;
};

// Boards in front of a 170 mm stereo pair; Q = truth * P plus isotropic 3D
// noise, image observations are exact projections plus pixel noise.
inline AlignScene make_align_scene(std::uint64_t seed, const Mat4& truth, int boards = 10, double pixel_sigma = 0.0,
                                   double tof_sigma_mm = 0.0) {
  auto g = rng(seed);
  AlignScene s;
  s.truth = truth;
  s.left = CameraMatrix(look_camera(540, Vec2(811.5, 611.5), Mat3::Identity(), Vec3::Zero()));
  s.right = CameraMatrix(look_camera(540, Vec2(811.5, 611.5), Mat3::Identity(), Vec3(-170, 0, 0)));
  for (int b = 0; b < boards; ++b) {
    const auto pts = random_board(g);
    for (std::size_t v = 0; v < pts.size(); ++v) {
      const HPoint3 p = HPoint3::from_euclidean(pts[v]);
      Vec4 q = truth * p.coords();
      q /= q[3];
      q.head<3>() += Vec3(gauss(g, tof_sigma_mm), gauss(g, tof_sigma_mm), gauss(g, tof_sigma_mm));
      s.pairs.push_back({p, HPoint3(q), b, static_cast<int>(v)});
      const Vec2 l = s.left.project(p).pixel() + Vec2(gauss(g, pixel_sigma), gauss(g, pixel_sigma));
      const Vec2 r = s.right.project(p).pixel() + Vec2(gauss(g, pixel_sigma), gauss(g, pixel_sigma));
      s.images.push_back({HPoint2::from_pixel(l), HPoint2::from_pixel(r)});
    }
  }
  return s;
}

// Rigid stereo -> ToF transform typical of a rig.
inline Mat4 rig_transform(double angle_deg = 1.0) {
  Mat4 t = Mat4::Identity();
  t.topLeftCorner<3, 3>() =
      Eigen::AngleAxisd(angle_deg * M_PI / 180.0, Vec3(0.3, -0.8, 0.5).normalized()).toRotationMatrix();
  t.topRightCorner<3, 1>() = Vec3(-85, 160, 5);
  return t;
}

}  // namespace xcal::testing
