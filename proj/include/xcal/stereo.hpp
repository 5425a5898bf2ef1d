#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xcal/geom.hpp"

namespace xcal::stereo {

struct Correspondence2D2D {
  HPoint2 left;
  HPoint2 right;
};

// Rank-2 F with p_r^T F p_l = 0. The constructor projects any 3x3 input onto
// the nearest rank-2 matrix and caches the right epipole (F^T e_r = 0).
class FundamentalMatrix {
 public:
  explicit FundamentalMatrix(const Mat3& entries);

  const Mat3& matrix() const { return entries_; }
  const Vec3& right_epipole() const { return right_epipole_; }
  Vec3 left_epipole() const;

  double algebraic_error(const Correspondence2D2D& m) const;
  /// First-order geometric (Sampson) distance in pixels.
  double sampson_distance(const Correspondence2D2D& m) const;

 private:
  Mat3 entries_;
  Vec3 right_epipole_;
};

// Free parameters of the projective camera pair: gamma != 0 and g.
struct ProjectiveFrame {
  Vec3 g = Vec3::Zero();
  double gamma = 1.0;
};

struct StereoCameras {
  CameraMatrix left;
  CameraMatrix right;
};

struct RansacOptions {
  double threshold_px = 1.0;
  int max_iterations = 2000;
  double confidence = 0.99;
  std::uint64_t seed = 0;
};

struct FundamentalEstimate {
  FundamentalMatrix fundamental;
  std::vector<bool> inliers;
  int iterations = 0;
};

/// Normalized 8-point estimate over all matches (at least 8).
FundamentalMatrix estimate_fundamental_8point(std::span<const Correspondence2D2D> matches);

/// RANSAC over minimal 8-point samples scored by Sampson distance, with the
/// final model refit on the consensus set. Deterministic for a given seed.
FundamentalEstimate estimate_fundamental_ransac(std::span<const Correspondence2D2D> matches,
                                                const RansacOptions& options = {});

/// C_l = (I | 0), C_r = ((e_r)x F + e_r g^T | gamma e_r).
StereoCameras cameras_from_fundamental(const FundamentalMatrix& f, const ProjectiveFrame& frame = {});

/// F = (e_r)x C_r C_l^+, with e_r = C_r d_l and C_l d_l = 0.
FundamentalMatrix fundamental_from_cameras(const CameraMatrix& left, const CameraMatrix& right);

/// Homogeneous linear triangulation (smallest singular vector of the 4x4
/// stacked system). Returns a point with w = 1 unless it lies at infinity.
HPoint3 triangulate(const CameraMatrix& left, const CameraMatrix& right,
                    const Correspondence2D2D& m);

}  // namespace xcal::stereo
