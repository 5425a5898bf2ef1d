#include "xcal/dataset.hpp"

#include <algorithm>

namespace xcal {

const RigSensors& Dataset::rig(int id) const {
  for (const auto& r : rigs) {
    if (r.id == id) return r;
  }
  throw Error(ErrorCode::kInputError, "dataset has no rig " + std::to_string(id));
}

std::vector<const eval::BoardView*> Dataset::views_of(int rig_id,
                                                      const std::vector<int>& boards) const {
  std::vector<const eval::BoardView*> out;
  for (const auto& [key, view] : views) {
    if (key.second != rig_id) continue;
    if (std::find(boards.begin(), boards.end(), key.first) != boards.end()) out.push_back(&view);
  }
  return out;
}

}  // namespace xcal
