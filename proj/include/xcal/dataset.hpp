#pragma once

#include <map>
#include <utility>
#include <vector>

#include "xcal/eval.hpp"
#include "xcal/geom.hpp"

namespace xcal {

struct ImageSize {
  int width = 0;
  int height = 0;
};

// Pre-calibrated sensors of one rig, all in the rig (left camera) frame
// except the range camera, which is in its own frame.
struct RigSensors {
  int id = 0;
  CameraMatrix tof_camera{Mat34::Zero()};
  CameraMatrix left_camera{Mat34::Zero()};
  CameraMatrix right_camera{Mat34::Zero()};
  ImageSize tof_size;
  ImageSize rgb_size;
  double max_range_mm = 5000.0;
};

struct Dataset {
  std::vector<RigSensors> rigs;
  eval::BoardViews views;  // fitted planes empty on load
  std::vector<int> fitting_boards;
  std::vector<int> evaluation_boards;

  const RigSensors& rig(int id) const;
  /// Views of the given rig whose board is in the list, in board order.
  std::vector<const eval::BoardView*> views_of(int rig_id, const std::vector<int>& boards) const;
};

}  // namespace xcal
