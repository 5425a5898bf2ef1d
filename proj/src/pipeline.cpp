#include "xcal/pipeline.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace xcal::pipeline {

namespace {

std::uint64_t view_seed(std::uint64_t seed, int board, int rig) {
  std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
  for (const auto v : {static_cast<std::uint64_t>(board), static_cast<std::uint64_t>(rig)}) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

}  // namespace

void fit_planes(Dataset& dataset, const std::vector<int>& boards, double threshold_mm,
                int max_iterations, std::uint64_t seed) {
  for (auto& [key, view] : dataset.views) {
    if (!contains(boards, key.first)) continue;
    const RigSensors& rig = dataset.rig(key.second);
    std::vector<HPoint3> points;
    points.reserve(view.hull.size());
    for (const auto& s : view.hull) points.push_back(tof::backproject(rig.tof_camera, s));
    tof::PlaneFitOptions opt;
    opt.threshold_mm = threshold_mm;
    opt.max_iterations = max_iterations;
    opt.seed = view_seed(seed, key.first, key.second);
    view.fitted_plane = tof::fit_plane_ransac(points, rig.tof_camera, opt);
  }
}

RigObservations collect_observations(const Dataset& dataset, int rig_id, const std::vector<int>& boards,
                                     const CameraMatrix& left, const CameraMatrix& right) {
  const RigSensors& rig = dataset.rig(rig_id);
  RigObservations out;
  for (const eval::BoardView* view : dataset.views_of(rig_id, boards)) {
    if (!view->fitted_plane) {
      throw Error(ErrorCode::kMissingPlane, "board " + std::to_string(view->board_id) + " has no plane");
    }
    for (std::size_t k = 0; k < view->tof_vertices.size(); ++k) {
      const HPoint2 pl = HPoint2::from_pixel(view->left_vertices[k]);
      const HPoint2 pr = HPoint2::from_pixel(view->right_vertices[k]);
      const auto q = tof::refine_range(rig.tof_camera, HPoint2::from_pixel(view->tof_vertices[k]),
                                       view->fitted_plane->plane);
      out.pairs.push_back({stereo::triangulate(left, right, {pl, pr}), q.point, view->board_id,
                           static_cast<int>(k)});
      out.images.push_back({pl, pr});
    }
  }
  return out;
}

void check_disjoint(const std::vector<int>& fitting, const std::vector<int>& evaluation) {
  std::vector<int> shared;
  for (int b : evaluation) {
    if (contains(fitting, b)) shared.push_back(b);
  }
  if (!shared.empty()) {
    std::ostringstream msg;
    msg << "evaluation boards used for fitting:";
    for (int b : shared) msg << ' ' << b;
    throw Error(ErrorCode::kContamination, msg.str());
  }
}

Calibration calibrate(Dataset& dataset, const CalibrationOptions& options) {
  check_disjoint(dataset.fitting_boards, dataset.evaluation_boards);
  fit_planes(dataset, dataset.fitting_boards, options.plane_threshold_mm,
             options.ransac_max_iterations, options.seed);
  lm::Options lm_opt;
  lm_opt.max_iterations = options.max_iterations;

  std::vector<RigCalibration> rigs;
  std::vector<network::Rig> net_rigs;
  // Triangulated fitting vertices per (board, rig), for the network edges.
  std::map<std::pair<int, int>, std::vector<HPoint3>> stereo_points;
  for (const RigSensors& sensors : dataset.rigs) {
    RigCalibration rc;
    rc.id = sensors.id;
    rc.tof_camera = sensors.tof_camera;
    rc.left_camera = sensors.left_camera;
    rc.right_camera = sensors.right_camera;
    const auto views = dataset.views_of(sensors.id, dataset.fitting_boards);
    if (views.empty()) {
      throw Error(ErrorCode::kInputError, "rig " + std::to_string(sensors.id) + " has no fitting boards");
    }
    for (const auto* v : views) rc.boards.push_back(v->board_id);
    if (options.stereo == StereoModel::kProjective) {
      std::vector<stereo::Correspondence2D2D> matches;
      for (const auto* v : views) {
        for (std::size_t k = 0; k < v->left_vertices.size(); ++k) {
          matches.push_back({HPoint2::from_pixel(v->left_vertices[k]),
                             HPoint2::from_pixel(v->right_vertices[k])});
        }
      }
      stereo::RansacOptions ro;
      ro.threshold_px = options.fundamental_threshold_px;
      ro.max_iterations = options.ransac_max_iterations;
      ro.seed = view_seed(options.seed, -1, sensors.id);
      const auto est = stereo::estimate_fundamental_ransac(matches, ro);
      const auto cams = stereo::cameras_from_fundamental(est.fundamental);
      rc.left_camera = cams.left;
      rc.right_camera = cams.right;
    }
    const RigObservations obs =
        collect_observations(dataset, sensors.id, rc.boards, rc.left_camera, rc.right_camera);
    for (const auto& p : obs.pairs) stereo_points[{p.board_index, sensors.id}].push_back(p.stereo_point);
    rc.correspondences = obs.pairs.size();
    rc.dlt = align::dlt_homography3(obs.pairs);
    switch (options.mode) {
      case align::RefinementMode::kDltOnly:
        rc.result = align::dlt_only(rc.dlt, obs.pairs, obs.images, rc.left_camera, rc.right_camera);
        break;
      case align::RefinementMode::kJoint:
        rc.result = align::refine_joint(rc.dlt, obs.pairs, obs.images, rc.left_camera, rc.right_camera, lm_opt);
        break;
      case align::RefinementMode::kSeparate:
        rc.result = align::refine_separate(rc.dlt, obs.pairs, obs.images, rc.left_camera, rc.right_camera, lm_opt);
        break;
      case align::RefinementMode::kSimilarity:
        rc.result = align::refine_similarity(align::procrustes_similarity(obs.pairs), obs.pairs, obs.images,
                                             rc.left_camera, rc.right_camera, lm_opt);
        break;
    }
    network::Rig nr(rc.id, rc.tof_camera, rc.left_camera, rc.right_camera, rc.result.homography);
    nr.refined_left = rc.result.refined_left;
    nr.refined_right = rc.result.refined_right;
    net_rigs.push_back(std::move(nr));
    rigs.push_back(std::move(rc));
  }

  network::NetworkGraph graph(std::move(net_rigs), options.reference_rig);
  const bool projective = options.projective_edges || options.stereo == StereoModel::kProjective;
  for (std::size_t a = 0; a < rigs.size(); ++a) {
    for (std::size_t b = a + 1; b < rigs.size(); ++b) {
      const int i = rigs[a].id;
      const int j = rigs[b].id;
      std::vector<HPoint3> pi;
      std::vector<HPoint3> pj;
      int shared = 0;
      for (int board : rigs[a].boards) {
        if (!contains(rigs[b].boards, board)) continue;
        ++shared;
        const auto& xi = stereo_points.at({board, i});
        const auto& xj = stereo_points.at({board, j});
        pi.insert(pi.end(), xi.begin(), xi.end());
        pj.insert(pj.end(), xj.begin(), xj.end());
      }
      if (shared < options.min_shared_boards) continue;
      if (projective) {
        std::vector<align::Correspondence3D3D> pairs;
        for (std::size_t k = 0; k < pi.size(); ++k) pairs.push_back({pj[k], pi[k], 0, static_cast<int>(k)});
        graph.add_direct_projective_edge(i, j, align::dlt_homography3(pairs));
      } else {
        graph.add_direct_edge(i, j, network::estimate_rigid(pi, pj));
      }
    }
  }
  graph.finalize();
  Calibration out{std::move(rigs), std::move(graph), dataset.fitting_boards, dataset.evaluation_boards, {}};
  out.discrepancies = out.graph.cycle_discrepancies();
  return out;
}

std::vector<PairReport> evaluate(const Dataset& dataset, const network::NetworkGraph& graph,
                                 const std::vector<std::pair<int, int>>& pairs) {
  std::vector<std::pair<int, int>> wanted = pairs;
  if (wanted.empty()) {
    for (const auto& a : graph.rigs()) {
      for (const auto& b : graph.rigs()) wanted.emplace_back(a.id, b.id);
    }
  }
  // Restrict the views to evaluation boards.
  eval::BoardViews views;
  for (const auto& [key, view] : dataset.views) {
    if (contains(dataset.evaluation_boards, key.first)) views.emplace(key, view);
  }
  std::vector<PairReport> out;
  for (const auto& [i, j] : wanted) {
    out.push_back({i, j, eval::calibration_error(graph, views, i, j), eval::total_error(graph, views, i, j)});
  }
  return out;
}

}  // namespace xcal::pipeline
