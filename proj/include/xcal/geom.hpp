#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "xcal/error.hpp"

namespace xcal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat64 = Eigen::Matrix<double, 6, 4>;

inline constexpr double kHomogeneousTolerance = 1e-8;

// Homogeneous 3D point (P_delta, P4). Euclidean units are millimetres.
class HPoint3 {
 public:
  explicit HPoint3(const Vec4& coords);
  HPoint3(double x, double y, double z, double w = 1.0)
      : HPoint3(Vec4(x, y, z, w)) {}

  static HPoint3 from_euclidean(const Vec3& p) { return HPoint3(p.homogeneous()); }

  const Vec4& coords() const { return coords_; }
  Vec3 delta() const { return coords_.head<3>(); }
  double w() const { return coords_[3]; }
  bool is_finite() const { return coords_[3] != 0.0; }

  /// Throws kPointAtInfinity when the fourth coordinate is zero.
  Vec3 euclidean() const;

 private:
  Vec4 coords_;
};

// Homogeneous plane (U_delta, U4); U^T P = 0 for incident points.
class HPlane3 {
 public:
  explicit HPlane3(const Vec4& coeffs);

  const Vec4& coeffs() const { return coeffs_; }
  Vec3 normal() const { return coeffs_.head<3>(); }
  double offset() const { return coeffs_[3]; }

  /// Rescaled so that |U_delta| = 1; U4 is then the signed distance from the
  /// origin.
  HPlane3 normalized() const;

  /// Incidence residual U^T P after scaling U to a unit normal and P to w = 1.
  double residual(const HPoint3& p) const;

 private:
  Vec4 coeffs_;
};

class HPoint2 {
 public:
  explicit HPoint2(const Vec3& coords);
  HPoint2(double x, double y, double w = 1.0) : HPoint2(Vec3(x, y, w)) {}

  static HPoint2 from_pixel(const Vec2& p) { return HPoint2(p.homogeneous()); }

  const Vec3& coords() const { return coords_; }
  bool is_finite() const { return coords_[2] != 0.0; }
  Vec2 pixel() const;

 private:
  Vec3 coords_;
};

// Projective 3x4 camera with block decomposition C = (A | b).
class CameraMatrix {
 public:
  explicit CameraMatrix(const Mat34& entries);

  const Mat34& matrix() const { return entries_; }
  Mat3 A() const { return entries_.leftCols<3>(); }
  Vec3 b() const { return entries_.col(3); }

  HPoint2 project(const HPoint3& p) const { return HPoint2(entries_ * p.coords()); }
  /// Right null vector of the matrix (the optical centre).
  Vec4 centre() const;

  CameraMatrix operator*(const Mat4& m) const { return CameraMatrix(entries_ * m); }

 private:
  Mat34 entries_;
};

class Homography3 {
 public:
  explicit Homography3(const Mat4& entries);
  static Homography3 identity() { return Homography3(Mat4::Identity()); }

  const Mat4& matrix() const { return entries_; }
  const Mat4& inverse_matrix() const { return inverse_; }
  Homography3 inverse() const { return Homography3(inverse_); }
  /// Unit Frobenius norm, canonical sign.
  Homography3 normalized() const;

 private:
  Mat4 entries_;
  Mat4 inverse_;
};

class RigidTransform3 {
 public:
  RigidTransform3() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform3(const Mat3& rotation, const Vec3& translation);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat4 matrix() const;
  RigidTransform3 inverse() const;
  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

  RigidTransform3 operator*(const RigidTransform3& rhs) const {
    return {rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_};
  }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

// sigma * R, t with bottom row (0, 0, 0, 1). The rotation is canonically held
// as a Rodrigues axis-angle vector; the matrix is regenerated from it.
class Similarity3 {
 public:
  Similarity3() : Similarity3(1.0, Vec3::Zero(), Vec3::Zero()) {}
  Similarity3(double scale, const Vec3& rodrigues, const Vec3& translation);
  static Similarity3 from_matrix(double scale, const Mat3& rotation, const Vec3& translation);

  double scale() const { return scale_; }
  const Vec3& rodrigues() const { return rodrigues_; }
  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Mat4 matrix() const;
  Homography3 as_homography() const { return Homography3(matrix()); }
  Similarity3 inverse() const;

 private:
  double scale_;
  Vec3 rodrigues_;
  Mat3 rotation_;
  Vec3 translation_;
};

Mat3 rodrigues_to_matrix(const Vec3& rodrigues);
Vec3 matrix_to_rodrigues(const Mat3& rotation);

/// Scale to unit norm and flip sign so the largest-magnitude entry is
/// positive. Two homogeneous quantities are equal iff their canonical forms
/// are.
Eigen::MatrixXd canonical(const Eigen::Ref<const Eigen::MatrixXd>& m);
double homogeneous_distance(const Eigen::Ref<const Eigen::MatrixXd>& a,
                            const Eigen::Ref<const Eigen::MatrixXd>& b);
bool homogeneous_equal(const Eigen::Ref<const Eigen::MatrixXd>& a,
                       const Eigen::Ref<const Eigen::MatrixXd>& b,
                       double tolerance = kHomogeneousTolerance);

/// D(p, q) = |p_delta / p3 - q_delta / q3|, in pixels.
double inhomog_distance(const HPoint2& p, const HPoint2& q);

Mat3 cross_matrix(const Vec3& u);

/// 6x4 matrix with wedge(Q) * P stacking Q4 P_delta - P4 Q_delta over
/// Q_delta x P_delta; it vanishes iff P and Q are the same projective point.
Mat64 wedge(const HPoint3& q);

struct NormalizedPoints3 {
  std::vector<HPoint3> points;  // each with w = 1
  Mat4 transform;               // points[k] = transform * input[k]
};

/// Translates the centroid to the origin and scales the mean distance from
/// it to sqrt(3).
NormalizedPoints3 normalize_points(std::span<const HPoint3> points);

struct NormalizedPoints2 {
  std::vector<HPoint2> points;
  Mat3 transform;
};

/// 2D analogue: centroid at origin, mean norm sqrt(2).
NormalizedPoints2 normalize_points(std::span<const HPoint2> points);

struct SimilarityFit {
  double scale;
  Mat3 rotation;
  Vec3 translation;
};

/// Closed-form least-squares target ~ scale * R * source + t (SVD of the
/// cross-covariance with reflection correction). With estimate_scale false
/// the scale is fixed at 1. Throws kDegenerateData for fewer than three or
/// collinear source points.
SimilarityFit fit_similarity(std::span<const Vec3> source, std::span<const Vec3> target,
                             bool estimate_scale);

HPoint3 apply_homography(const Homography3& h, const HPoint3& p);
HPlane3 transform_plane(const Homography3& h, const HPlane3& u);

}  // namespace xcal
