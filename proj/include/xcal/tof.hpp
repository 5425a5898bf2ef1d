#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xcal/geom.hpp"

namespace xcal::tof {

inline constexpr double kDefaultMaxRangeMm = 5000.0;

// One range-camera measurement: pixel q = (x, y, 1) and the radial distance
// rho (mm) from the optical centre along its visual ray.
class RangeSample {
 public:
  RangeSample(const Vec2& pixel, double range_mm, double max_range_mm = kDefaultMaxRangeMm);

  const Vec2& pixel() const { return pixel_; }
  HPoint2 q() const { return HPoint2::from_pixel(pixel_); }
  double range() const { return range_; }

 private:
  Vec2 pixel_;
  double range_;
};

struct FittedPlane {
  HPlane3 plane;  // |V_delta| = 1
  std::vector<bool> inlier_mask;
  double rms_radial_residual = 0.0;

  std::size_t inlier_count() const;
};

struct PlaneFitOptions {
  double threshold_mm = 15.0;
  int max_iterations = 2000;
  double confidence = 0.99;
  std::uint64_t seed = 0;
};

struct RefinedRange {
  double rho;
  HPoint3 point;
};

/// Q_delta = A^-1 ((rho / alpha) q - b) with alpha = |A^-1 q|.
HPoint3 backproject(const CameraMatrix& camera, const RangeSample& sample);

/// Range along the visual ray of q at which it meets the plane, and the
/// corresponding back-projected point.
RefinedRange refine_range(const CameraMatrix& camera, const HPoint2& q, const HPlane3& plane);

/// |rho_observed - rho_pi| for a back-projected point: the plane misfit
/// measured along the point's own visual ray. Infinite when the ray misses
/// the plane.
double radial_residual(const CameraMatrix& camera, const HPoint3& point, const HPlane3& plane);

/// Perpendicular point-plane distance (diagnostic only).
double perpendicular_distance(const HPoint3& point, const HPlane3& plane);

/// RANSAC over 3-point samples scored by radial residual, then a
/// least-squares refit of the radial residuals on the consensus set
/// (total-least-squares start, LM over a tangent-plane normal update and the
/// offset).
FittedPlane fit_plane_ransac(std::span<const HPoint3> points, const CameraMatrix& camera,
                             const PlaneFitOptions& options = {});

}  // namespace xcal::tof
