#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "xcal/dataset.hpp"
#include "xcal/geom.hpp"
#include "xcal/tof.hpp"

namespace xcal::synth {

struct Intrinsics {
  double focal_px = 0.0;
  Vec2 principal_px = Vec2::Zero();
  ImageSize size;

  Mat3 matrix() const;
};

// Inner-vertex grid; the printed board has (cols + 1) x (rows + 1) squares.
struct BoardSpec {
  int cols = 7;
  int rows = 5;
  double square_mm = 40.0;

  int vertex_count() const { return cols * rows; }
};

enum class Split { kFitting, kEvaluation };

// Board frame: origin at the centre of the vertex grid, x along columns, y
// along rows, z pointing away from the printed face.
struct PlacedBoard {
  int id = 0;
  Split split = Split::kFitting;
  Mat3 rotation = Mat3::Identity();  // world <- board
  Vec3 translation = Vec3::Zero();
};

struct NoiseConfig {
  double rgb_vertex_sigma_px = 0.1;
  double tof_vertex_sigma_px = 0.3;
  double range_sigma_mm = 10.0;
  double outlier_rate = 0.05;
  double outlier_scale_mm = 300.0;
  double black_square_range_sigma_multiplier = 3.0;
  std::optional<Homography3> depth_distortion;  // applied in each ToF frame
  // Overrides the stream used for per-pixel range noise and outliers.
  std::optional<std::uint64_t> range_seed;

  static NoiseConfig none();
};

enum class PosePreset { kStandard, kSlanted };

struct SceneConfig {
  int rig_count = 3;
  Intrinsics rgb{540.0, Vec2(811.5, 611.5), {1624, 1224}};
  Intrinsics tof{300.0, Vec2(87.5, 71.5), {176, 144}};
  double tof_max_range_mm = 5000.0;
  double stereo_baseline_mm = 170.0;
  double rig_spacing_mm = 1070.0;
  double network_radius_mm = 1500.0;
  // Range camera centre and orientation in the rig frame.
  Vec3 tof_offset_mm = Vec3(85.0, -160.0, 0.0);
  Vec3 tof_rotation_deg = Vec3(0.6, -0.9, 0.4);
  BoardSpec board;
  int fitting_boards_per_rig = 10;
  int evaluation_boards_per_rig = 7;
  int shared_fitting_boards = 4;
  int shared_evaluation_boards = 2;
  double near_depth_min_mm = 850.0;
  double near_depth_max_mm = 1300.0;
  double max_tilt_deg = 30.0;
  PosePreset preset = PosePreset::kStandard;
  double slanted_fraction = 0.3;
  double slanted_tilt_min_deg = 62.0;
  double slanted_tilt_max_deg = 70.0;
  // When non-empty, used verbatim instead of generated poses.
  std::vector<PlacedBoard> board_poses;
  NoiseConfig noise;
  std::uint64_t seed = 1;
};

/// Throws kInvalidArgument on inconsistent or non-positive settings.
void validate(const SceneConfig& config);

struct HullLabel {
  bool outlier = false;
  eval::Region region = eval::Region::kWhite;
  double true_range_mm = 0.0;
};

struct GroundTruthRig {
  int id = 0;
  Homography3 stereo_to_tof = Homography3::identity();  // H_i, distortion included
  RigidTransform3 world_from_rig;
  RigidTransform3 tof_from_rig;
};

struct GroundTruth {
  std::vector<GroundTruthRig> rigs;
  std::vector<PlacedBoard> boards;
  // Keyed by (board, rig) like the views.
  std::map<std::pair<int, int>, std::vector<HullLabel>> hull_labels;
  std::map<std::pair<int, int>, HPlane3> tof_planes;

  const GroundTruthRig& rig(int id) const;
  /// G_ij: rig j frame to rig i frame.
  RigidTransform3 relative(int i, int j) const;
};

struct SyntheticData {
  Dataset dataset;
  GroundTruth truth;
};

/// Deterministic for a given config. Throws kEmptyScene when no board is
/// visible to a full rig triplet.
SyntheticData generate_dataset(const SceneConfig& config);

/// Maps Q (range-camera frame) by H_d and converts it to a pixel and radial
/// range through the camera. Throws kBehindCamera.
tof::RangeSample apply_depth_distortion(const Homography3& hd, const HPoint3& q,
                                        const CameraMatrix& camera,
                                        double max_range_mm = tof::kDefaultMaxRangeMm);

}  // namespace xcal::synth
