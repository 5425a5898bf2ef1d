#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "xcal/geom.hpp"
#include "xcal/lm.hpp"

namespace xcal::align {

// One board vertex seen by both sensors: P from stereo triangulation, Q from
// the range camera after plane refinement. Q ~ H P.
struct Correspondence3D3D {
  HPoint3 stereo_point;
  HPoint3 tof_point;
  int board_index = 0;
  int vertex_index = 0;
};

// Image observations of a vertex in the two RGB views.
struct ImageObservation {
  HPoint2 left;
  HPoint2 right;
};

enum class RefinementMode { kDltOnly, kJoint, kSeparate, kSimilarity };

std::string_view to_string(RefinementMode mode);
/// Throws kInvalidArgument for unknown names.
RefinementMode refinement_mode_from_string(std::string_view name);

struct DltResult {
  Homography3 homography;            // stereo -> tof, unit Frobenius, canonical sign
  Eigen::Matrix<double, 16, 1> singular_values;  // descending
  double algebraic_residual = 0.0;   // |A h| for the normalized system
};

struct AlignmentResult {
  RefinementMode mode = RefinementMode::kJoint;
  Homography3 homography = Homography3::identity();  // stereo -> tof
  // Separate mode only: the per-camera matrices mapping ToF points to pixels.
  std::optional<CameraMatrix> refined_left;
  std::optional<CameraMatrix> refined_right;
  std::optional<Similarity3> similarity;
  double initial_cost = 0.0;   // sum of squared pixel distances, both views
  double final_cost = 0.0;
  double initial_error = 0.0;  // px RMS over all image points
  double final_error = 0.0;
  double final_left_cost = 0.0;
  double final_right_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  int raw_parameters = 0;
  int effective_parameters = 0;
  std::vector<double> cost_history;

  /// 3x4 matrices taking ToF points to left/right pixels.
  CameraMatrix left_camera(const CameraMatrix& stereo_left) const;
  CameraMatrix right_camera(const CameraMatrix& stereo_right) const;
};

/// Linear estimate of H with Q ~ H P from at least five correspondences, on
/// isotropically normalized points. Throws kDegenerateConfiguration when the
/// null space is not one-dimensional (e.g. coplanar input).
DltResult dlt_homography3_detailed(std::span<const Correspondence3D3D> pairs);
Homography3 dlt_homography3(std::span<const Correspondence3D3D> pairs);

/// Sum of squared inhomogeneous distances between the projections of the
/// points and the observed pixels.
double reprojection_error(const CameraMatrix& camera, std::span<const HPoint3> points,
                          std::span<const HPoint2> pixels);

/// Wraps an unrefined estimate with its reprojection diagnostics.
AlignmentResult dlt_only(const Homography3& h, std::span<const Correspondence3D3D> pairs,
                         std::span<const ImageObservation> observations, const CameraMatrix& left,
                         const CameraMatrix& right);

/// Minimizes the two-view reprojection error of the ToF vertices over the 16
/// entries of H^-1 (15 effective under the scale gauge).
AlignmentResult refine_joint(const Homography3& initial, std::span<const Correspondence3D3D> pairs,
                             std::span<const ImageObservation> observations,
                             const CameraMatrix& left, const CameraMatrix& right,
                             const lm::Options& options = {},
                             const lm::ProgressCallback& progress = {});

/// Independent refinement of C_l H^-1 and C_r H^-1 (12 entries each).
AlignmentResult refine_separate(const Homography3& initial,
                                std::span<const Correspondence3D3D> pairs,
                                std::span<const ImageObservation> observations,
                                const CameraMatrix& left, const CameraMatrix& right,
                                const lm::Options& options = {});

/// Closed-form similarity from stereo to ToF points.
Similarity3 procrustes_similarity(std::span<const Correspondence3D3D> pairs);

/// Restricts the joint objective to similarities (rotation, log scale,
/// translation).
AlignmentResult refine_similarity(const Similarity3& initial,
                                  std::span<const Correspondence3D3D> pairs,
                                  std::span<const ImageObservation> observations,
                                  const CameraMatrix& left, const CameraMatrix& right,
                                  const lm::Options& options = {});

/// Ray-preserving distortion X' = X / (c0 Z + c1) of a camera frame whose
/// centre is the origin; the measured inverse depth is c0 + c1 / Z.
Homography3 inverse_disparity_homography(double c0, double c1);

}  // namespace xcal::align
