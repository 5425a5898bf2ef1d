#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "xcal/align.hpp"
#include "xcal/dataset.hpp"
#include "xcal/eval.hpp"
#include "xcal/lm.hpp"
#include "xcal/network.hpp"
#include "xcal/stereo.hpp"
#include "xcal/tof.hpp"

namespace xcal::pipeline {

enum class StereoModel { kCalibrated, kProjective };

struct CalibrationOptions {
  align::RefinementMode mode = align::RefinementMode::kJoint;
  StereoModel stereo = StereoModel::kCalibrated;
  bool projective_edges = false;
  int reference_rig = 0;
  int min_shared_boards = 3;
  double plane_threshold_mm = 15.0;
  double fundamental_threshold_px = 1.0;
  int ransac_max_iterations = 2000;
  int max_iterations = 100;
  std::uint64_t seed = 0;
};

struct RigCalibration {
  int id = 0;
  CameraMatrix tof_camera{Mat34::Zero()};
  CameraMatrix left_camera{Mat34::Zero()};
  CameraMatrix right_camera{Mat34::Zero()};
  Homography3 dlt = Homography3::identity();
  align::AlignmentResult result;
  std::size_t correspondences = 0;
  std::vector<int> boards;
};

struct Calibration {
  std::vector<RigCalibration> rigs;
  network::NetworkGraph graph;
  std::vector<int> fitting_boards;
  std::vector<int> evaluation_boards;
  std::vector<network::CycleDiscrepancy> discrepancies;
};

/// Fits a plane to the back-projected hull of every view whose board is in
/// the list. Deterministic: each view gets its own seed.
void fit_planes(Dataset& dataset, const std::vector<int>& boards, double threshold_mm,
                int max_iterations, std::uint64_t seed);

struct RigObservations {
  std::vector<align::Correspondence3D3D> pairs;
  std::vector<align::ImageObservation> images;
};

/// Plane-refined ToF vertices paired with triangulated stereo vertices for
/// the given boards (planes must be fitted).
RigObservations collect_observations(const Dataset& dataset, int rig_id, const std::vector<int>& boards,
                                     const CameraMatrix& left, const CameraMatrix& right);

/// Full calibration over the dataset's fitting boards. Fits planes on those
/// boards in place. Throws kDisconnectedNetwork when rigs cannot be linked.
Calibration calibrate(Dataset& dataset, const CalibrationOptions& options = {});

struct PairReport {
  int i = 0;
  int j = 0;
  eval::ErrorReport calibration;
  eval::ErrorReport total;
};

/// Every ordered pair when pairs is empty.
std::vector<PairReport> evaluate(const Dataset& dataset, const network::NetworkGraph& graph,
                                 const std::vector<std::pair<int, int>>& pairs = {});

/// Throws kContamination when an evaluation board was used for fitting.
void check_disjoint(const std::vector<int>& fitting, const std::vector<int>& evaluation);

}  // namespace xcal::pipeline
