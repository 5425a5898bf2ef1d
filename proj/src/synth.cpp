#include "xcal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/LU>

namespace xcal::synth {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Streams {
  std::mt19937_64 geometry;
  std::mt19937_64 detection;
  std::mt19937_64 range;
};

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double gaussian(std::mt19937_64& rng, double sigma) {
  if (sigma == 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

// Rig geometry derived from the config, all in millimetres.
struct RigModel {
  int id;
  RigidTransform3 world_from_rig;
  RigidTransform3 rig_from_world;
  RigidTransform3 tof_from_rig;
  Mat34 left;   // rig frame
  Mat34 right;  // rig frame
  Mat34 tof;    // ToF frame
  Homography3 h;
  Vec3 left_centre_w, right_centre_w, tof_centre_w;
};

Mat3 look_rotation(const Vec3& forward) {
  // Rows are the camera axes in world coordinates; y points down.
  const Vec3 z = forward.normalized();
  Vec3 x = Vec3::UnitY().cross(z);
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = z;
  return r;
}

std::vector<RigModel> build_rigs(const SceneConfig& c) {
  std::vector<RigModel> rigs;
  const Mat3 k_rgb = c.rgb.matrix();
  const Mat3 k_tof = c.tof.matrix();
  const double step = c.rig_count > 1 ? c.rig_spacing_mm / c.network_radius_mm : 0.0;
  const Mat3 tof_rot = rodrigues_to_matrix(c.tof_rotation_deg * kDeg);
  for (int k = 0; k < c.rig_count; ++k) {
    const double theta = (k - 0.5 * (c.rig_count - 1)) * step;
    const Vec3 centre(c.network_radius_mm * std::sin(theta), 0.0, -c.network_radius_mm * std::cos(theta));
    const Mat3 rig_from_world_r = look_rotation(-centre);
    const RigidTransform3 rig_from_world(rig_from_world_r, -rig_from_world_r * centre);
    const RigidTransform3 tof_from_rig(tof_rot, -tof_rot * c.tof_offset_mm);
    Mat34 left = Mat34::Zero();
    left.leftCols<3>() = k_rgb;
    Mat34 right;
    right.leftCols<3>() = k_rgb;
    right.col(3) = -k_rgb * Vec3(c.stereo_baseline_mm, 0.0, 0.0);
    Mat34 tof = Mat34::Zero();
    tof.leftCols<3>() = k_tof;
    Mat4 h = tof_from_rig.matrix();
    if (c.noise.depth_distortion) h = c.noise.depth_distortion->matrix() * h;
    const RigidTransform3 world_from_rig = rig_from_world.inverse();
    rigs.push_back(RigModel{k, world_from_rig, rig_from_world, tof_from_rig, left, right, tof,
                            Homography3(h), centre,
                            world_from_rig.apply(Vec3(c.stereo_baseline_mm, 0.0, 0.0)),
                            world_from_rig.apply(c.tof_offset_mm)});
  }
  return rigs;
}

Vec3 board_point(const SceneConfig& c, double u, double v) {
  const double ox = 0.5 * (c.board.cols - 1) * c.board.square_mm;
  const double oy = 0.5 * (c.board.rows - 1) * c.board.square_mm;
  return Vec3(u - ox, v - oy, 0.0);
}

std::vector<Vec3> board_vertices(const SceneConfig& c) {
  std::vector<Vec3> out;
  for (int r = 0; r < c.board.rows; ++r) {
    for (int col = 0; col < c.board.cols; ++col) {
      out.push_back(board_point(c, col * c.board.square_mm, r * c.board.square_mm));
    }
  }
  return out;
}

std::vector<Vec3> board_corners(const SceneConfig& c) {
  const double s = c.board.square_mm;
  return {board_point(c, -s, -s), board_point(c, c.board.cols * s, -s),
          board_point(c, c.board.cols * s, c.board.rows * s), board_point(c, -s, c.board.rows * s)};
}

bool project_inside(const Mat34& camera, const Vec3& p, const ImageSize& size, double margin,
                    Vec2* out = nullptr) {
  const Vec3 x = camera * p.homogeneous();
  if (!(x[2] > 0.0)) return false;
  const Vec2 px = x.head<2>() / x[2];
  if (out != nullptr) *out = px;
  return px.x() >= margin && px.y() >= margin && px.x() <= size.width - 1 - margin &&
         px.y() <= size.height - 1 - margin;
}

// Point in the (possibly distorted) ToF frame for a world point.
Vec3 tof_point(const RigModel& rig, const Vec3& world) {
  const Vec4 q = rig.h.matrix() * rig.rig_from_world.apply(world).homogeneous();
  return q.head<3>() / q[3];
}

bool visible(const SceneConfig& c, const RigModel& rig, const PlacedBoard& b) {
  std::vector<Vec3> pts = board_vertices(c);
  const auto corners = board_corners(c);
  pts.insert(pts.end(), corners.begin(), corners.end());
  const Vec3 normal = b.rotation.col(2);
  const Vec3 centre = b.translation;
  for (const Vec3& cam : {rig.left_centre_w, rig.right_centre_w, rig.tof_centre_w}) {
    const Vec3 view = (centre - cam).normalized();
    // Front face toward the camera, obliquity at most 80 degrees.
    if (!(normal.dot(view) > std::cos(80.0 * kDeg))) return false;
  }
  for (const Vec3& pb : pts) {
    const Vec3 w = b.rotation * pb + b.translation;
    const Vec3 pr = rig.rig_from_world.apply(w);
    if (!project_inside(rig.left, pr, c.rgb.size, 10.0)) return false;
    if (!project_inside(rig.right, pr, c.rgb.size, 10.0)) return false;
    const Vec3 q = tof_point(rig, w);
    if (!project_inside(rig.tof, q, c.tof.size, 3.0)) return false;
    if (q.norm() > 0.95 * c.tof_max_range_mm) return false;
  }
  return true;
}

Mat3 random_tilt(std::mt19937_64& rng, double tilt_min_deg, double tilt_max_deg) {
  const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double tilt = uniform(rng, tilt_min_deg, tilt_max_deg) * kDeg;
  const double spin = uniform(rng, -20.0, 20.0) * kDeg;
  const Vec3 axis(std::cos(phi), std::sin(phi), 0.0);
  return rodrigues_to_matrix(axis * tilt) * rodrigues_to_matrix(Vec3(0.0, 0.0, spin));
}

PlacedBoard candidate_near(const SceneConfig& c, const RigModel& rig, std::mt19937_64& rng) {
  const double z = uniform(rng, c.near_depth_min_mm, c.near_depth_max_mm);
  const double half_w = 0.5 * c.tof.size.width / c.tof.focal_px * z;
  const double half_h = 0.5 * c.tof.size.height / c.tof.focal_px * z;
  const Vec3 centre_rig(c.tof_offset_mm.x() + uniform(rng, -0.3, 0.3) * half_w,
                        c.tof_offset_mm.y() + uniform(rng, -0.3, 0.3) * half_h, z);
  Mat3 tilt;
  if (c.preset == PosePreset::kSlanted && uniform(rng, 0.0, 1.0) < c.slanted_fraction) {
    tilt = random_tilt(rng, c.slanted_tilt_min_deg, c.slanted_tilt_max_deg);
  } else {
    tilt = random_tilt(rng, 0.0, c.max_tilt_deg);
  }
  PlacedBoard b;
  // Board z axis along the rig's optical axis, then tilted.
  b.rotation = rig.world_from_rig.rotation() * tilt;
  b.translation = rig.world_from_rig.apply(centre_rig);
  return b;
}

PlacedBoard candidate_shared(const SceneConfig& c, std::mt19937_64& rng) {
  PlacedBoard b;
  const Mat3 base = look_rotation(Vec3::UnitZ()).transpose();
  b.rotation = base * random_tilt(rng, 0.0, std::min(15.0, c.max_tilt_deg));
  b.translation = Vec3(uniform(rng, -100.0, 100.0), uniform(rng, -60.0, 60.0), uniform(rng, -150.0, 150.0));
  return b;
}

std::vector<PlacedBoard> place_boards(const SceneConfig& c, const std::vector<RigModel>& rigs,
                                      std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(c.rig_count);
  std::vector<int> fit(n, 0);
  std::vector<int> evl(n, 0);
  std::vector<PlacedBoard> out;
  auto try_accept = [&](PlacedBoard b, Split split, bool need_all) {
    std::vector<std::size_t> seen;
    for (std::size_t r = 0; r < n; ++r) {
      if (visible(c, rigs[r], b)) seen.push_back(r);
    }
    if (seen.empty() || (need_all && seen.size() != n)) return false;
    auto& counts = split == Split::kFitting ? fit : evl;
    const int quota = split == Split::kFitting ? c.fitting_boards_per_rig : c.evaluation_boards_per_rig;
    for (std::size_t r : seen) {
      if (counts[r] >= quota) return false;
    }
    for (std::size_t r : seen) ++counts[r];
    b.id = static_cast<int>(out.size());
    b.split = split;
    out.push_back(b);
    return true;
  };
  constexpr int kMaxAttempts = 20000;
  auto fill_shared = [&](int wanted, Split split) {
    int placed = 0;
    for (int attempt = 0; placed < wanted && attempt < kMaxAttempts; ++attempt) {
      if (try_accept(candidate_shared(c, rng), split, true)) ++placed;
    }
    if (placed < wanted) {
      throw Error(ErrorCode::kInvalidArgument, "could not place boards visible to every rig");
    }
  };
  fill_shared(std::min(c.shared_fitting_boards, c.fitting_boards_per_rig), Split::kFitting);
  fill_shared(std::min(c.shared_evaluation_boards, c.evaluation_boards_per_rig), Split::kEvaluation);
  for (const Split split : {Split::kFitting, Split::kEvaluation}) {
    auto& counts = split == Split::kFitting ? fit : evl;
    const int quota = split == Split::kFitting ? c.fitting_boards_per_rig : c.evaluation_boards_per_rig;
    for (std::size_t r = 0; r < n; ++r) {
      for (int attempt = 0; counts[r] < quota && attempt < kMaxAttempts; ++attempt) {
        try_accept(candidate_near(c, rigs[r], rng), split, false);
      }
      if (counts[r] < quota) {
        throw Error(ErrorCode::kInvalidArgument,
                    "could not place enough boards for rig " + std::to_string(r));
      }
    }
  }
  return out;
}

eval::Region region_at(const SceneConfig& c, const Vec3& board_local) {
  const double s = c.board.square_mm;
  const double u = board_local.x() + 0.5 * (c.board.cols - 1) * s;
  const double v = board_local.y() + 0.5 * (c.board.rows - 1) * s;
  const auto parity = static_cast<long long>(std::floor(u / s)) + static_cast<long long>(std::floor(v / s));
  return parity % 2 == 0 ? eval::Region::kBlack : eval::Region::kWhite;
}

}  // namespace

Mat3 Intrinsics::matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = focal_px;
  k(1, 1) = focal_px;
  k(0, 2) = principal_px.x();
  k(1, 2) = principal_px.y();
  return k;
}

NoiseConfig NoiseConfig::none() {
  NoiseConfig n;
  n.rgb_vertex_sigma_px = 0.0;
  n.tof_vertex_sigma_px = 0.0;
  n.range_sigma_mm = 0.0;
  n.outlier_rate = 0.0;
  return n;
}

void validate(const SceneConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
  };
  require(c.rig_count >= 1, "rig_count must be at least 1");
  require(c.rgb.focal_px > 0.0 && c.tof.focal_px > 0.0, "focal lengths must be positive");
  require(c.rgb.size.width > 0 && c.rgb.size.height > 0, "rgb image size must be positive");
  require(c.tof.size.width > 0 && c.tof.size.height > 0, "tof image size must be positive");
  require(c.tof_max_range_mm > 0.0, "range max must be positive");
  require(c.stereo_baseline_mm > 0.0, "stereo baseline must be positive");
  require(c.rig_spacing_mm > 0.0 && c.network_radius_mm > 0.0, "rig layout must be positive");
  require(c.board.cols >= 2 && c.board.rows >= 2 && c.board.square_mm > 0.0, "invalid board spec");
  require(c.fitting_boards_per_rig >= 0 && c.evaluation_boards_per_rig >= 0, "board counts must be >= 0");
  require(c.shared_fitting_boards >= 0 && c.shared_evaluation_boards >= 0, "board counts must be >= 0");
  require(c.near_depth_min_mm > 0.0 && c.near_depth_max_mm >= c.near_depth_min_mm, "invalid depth range");
  require(c.max_tilt_deg >= 0.0 && c.max_tilt_deg < 80.0, "max tilt must lie in [0, 80)");
  require(c.slanted_fraction >= 0.0 && c.slanted_fraction <= 1.0, "slanted fraction must lie in [0, 1]");
  require(c.slanted_tilt_min_deg <= c.slanted_tilt_max_deg && c.slanted_tilt_max_deg < 80.0,
          "invalid slanted tilt range");
  const NoiseConfig& n = c.noise;
  require(n.rgb_vertex_sigma_px >= 0.0 && n.tof_vertex_sigma_px >= 0.0 && n.range_sigma_mm >= 0.0,
          "noise sigmas must be non-negative");
  require(n.outlier_rate >= 0.0 && n.outlier_rate <= 1.0, "outlier rate must lie in [0, 1]");
  require(n.outlier_scale_mm >= 0.0, "outlier scale must be non-negative");
  require(n.black_square_range_sigma_multiplier >= 0.0, "black-square multiplier must be non-negative");
}

const GroundTruthRig& GroundTruth::rig(int id) const {
  for (const auto& r : rigs) {
    if (r.id == id) return r;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown rig id");
}

RigidTransform3 GroundTruth::relative(int i, int j) const {
  return rig(i).world_from_rig.inverse() * rig(j).world_from_rig;
}

tof::RangeSample apply_depth_distortion(const Homography3& hd, const HPoint3& q,
                                        const CameraMatrix& camera, double max_range_mm) {
  const HPoint3 d = apply_homography(hd, q);
  if (!d.is_finite()) throw Error(ErrorCode::kBehindCamera, "distorted point at infinity");
  const Vec3 p = d.euclidean();
  const Vec3 x = camera.matrix() * p.homogeneous();
  if (!(x[2] > 0.0)) throw Error(ErrorCode::kBehindCamera, "distorted point behind the camera");
  const Vec3 centre = -camera.A().inverse() * camera.b();
  return tof::RangeSample(x.head<2>() / x[2], (p - centre).norm(), max_range_mm);
}

SyntheticData generate_dataset(const SceneConfig& config) {
  validate(config);
  Streams s{make_stream(config.seed, 0), make_stream(config.seed, 1),
            make_stream(config.noise.range_seed.value_or(config.seed), 2)};
  const std::vector<RigModel> rigs = build_rigs(config);
  std::vector<PlacedBoard> boards = config.board_poses;
  if (boards.empty()) boards = place_boards(config, rigs, s.geometry);

  SyntheticData out;
  Dataset& ds = out.dataset;
  GroundTruth& gt = out.truth;
  gt.boards = boards;
  for (const auto& r : rigs) {
    ds.rigs.push_back(RigSensors{r.id, CameraMatrix(r.tof), CameraMatrix(r.left), CameraMatrix(r.right),
                                 config.tof.size, config.rgb.size, config.tof_max_range_mm});
    gt.rigs.push_back(GroundTruthRig{r.id, r.h, r.world_from_rig, r.tof_from_rig});
  }

  const NoiseConfig& noise = config.noise;
  const std::vector<Vec3> vertices = board_vertices(config);
  const Mat3 k_tof_inv = config.tof.matrix().inverse();
  bool any_visible = false;
  for (const auto& b : boards) {
    (b.split == Split::kFitting ? ds.fitting_boards : ds.evaluation_boards).push_back(b.id);
    for (const auto& rig : rigs) {
      if (!visible(config, rig, b)) continue;
      any_visible = true;
      eval::BoardView view;
      view.board_id = b.id;
      view.rig_id = rig.id;
      for (const Vec3& v : vertices) {
        const Vec3 w = b.rotation * v + b.translation;
        const Vec3 pr = rig.rig_from_world.apply(w);
        Vec2 pl;
        Vec2 pright;
        Vec2 pt;
        project_inside(rig.left, pr, config.rgb.size, 0.0, &pl);
        project_inside(rig.right, pr, config.rgb.size, 0.0, &pright);
        project_inside(rig.tof, tof_point(rig, w), config.tof.size, 0.0, &pt);
        view.left_vertices.push_back(pl + Vec2(gaussian(s.detection, noise.rgb_vertex_sigma_px),
                                               gaussian(s.detection, noise.rgb_vertex_sigma_px)));
        view.right_vertices.push_back(pright + Vec2(gaussian(s.detection, noise.rgb_vertex_sigma_px),
                                                    gaussian(s.detection, noise.rgb_vertex_sigma_px)));
        view.tof_vertices.push_back(pt + Vec2(gaussian(s.detection, noise.tof_vertex_sigma_px),
                                              gaussian(s.detection, noise.tof_vertex_sigma_px)));
      }

      // Hull: every ToF pixel whose ray meets the printed board.
      const RigidTransform3 tof_from_world = rig.tof_from_rig * rig.rig_from_world;
      const Mat3 r_tb = tof_from_world.rotation() * b.rotation;
      const Vec3 t_tb = tof_from_world.apply(b.translation);
      const Vec3 n_t = r_tb.col(2);
      double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
      for (const Vec3& corner : board_corners(config)) {
        const Vec3 x = config.tof.matrix() * (r_tb * corner + t_tb);
        min_x = std::min(min_x, x.x() / x.z());
        max_x = std::max(max_x, x.x() / x.z());
        min_y = std::min(min_y, x.y() / x.z());
        max_y = std::max(max_y, x.y() / x.z());
      }
      const double s_mm = config.board.square_mm;
      const double lo_u = -s_mm - 0.5 * (config.board.cols - 1) * s_mm;
      const double hi_u = lo_u + (config.board.cols + 1) * s_mm;
      const double lo_v = -s_mm - 0.5 * (config.board.rows - 1) * s_mm;
      const double hi_v = lo_v + (config.board.rows + 1) * s_mm;
      std::vector<HullLabel> labels;
      const Mat4 hd = noise.depth_distortion ? noise.depth_distortion->matrix() : Mat4::Identity();
      for (int y = std::max(0, static_cast<int>(std::ceil(min_y)));
           y <= std::min(config.tof.size.height - 1, static_cast<int>(std::floor(max_y))); ++y) {
        for (int x = std::max(0, static_cast<int>(std::ceil(min_x)));
             x <= std::min(config.tof.size.width - 1, static_cast<int>(std::floor(max_x))); ++x) {
          const Vec3 ray = k_tof_inv * Vec3(x, y, 1.0);
          const double denom = n_t.dot(ray);
          if (std::abs(denom) < 1e-12) continue;
          const double lambda = n_t.dot(t_tb) / denom;
          if (!(lambda > 0.0)) continue;
          const Vec3 q_true = lambda * ray;
          const Vec3 local = r_tb.transpose() * (q_true - t_tb);
          if (local.x() < lo_u || local.x() > hi_u || local.y() < lo_v || local.y() > hi_v) continue;
          // The undistorted frame is the one the board lives in; the sensor
          // reports the distorted point.
          const Vec4 qd4 = hd * q_true.homogeneous();
          const Vec3 qd = qd4.head<3>() / qd4[3];
          const Vec3 px = config.tof.matrix() * qd;
          HullLabel label;
          label.region = region_at(config, local);
          label.true_range_mm = qd.norm();
          const double sigma = noise.range_sigma_mm * (label.region == eval::Region::kBlack
                                                           ? noise.black_square_range_sigma_multiplier
                                                           : 1.0);
          double rho = label.true_range_mm + gaussian(s.range, sigma);
          if (noise.outlier_rate > 0.0 && uniform(s.range, 0.0, 1.0) < noise.outlier_rate) {
            label.outlier = true;
            const double sign = uniform(s.range, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
            const double delta = noise.outlier_scale_mm * uniform(s.range, 0.5, 1.5);
            rho += sign * delta;
            if (!(rho > 0.0) || rho > config.tof_max_range_mm) rho -= 2.0 * sign * delta;
          }
          rho = std::clamp(rho, 1e-3, config.tof_max_range_mm);
          view.hull.emplace_back(Vec2(px.x() / px.z(), px.y() / px.z()), rho, config.tof_max_range_mm);
          view.hull_regions.push_back(label.region);
          labels.push_back(label);
        }
      }
      const Vec4 plane_rig = [&] {
        const RigidTransform3 rig_from_board(rig.rig_from_world.rotation() * b.rotation,
                                             rig.rig_from_world.apply(b.translation));
        const Vec3 n = rig_from_board.rotation().col(2);
        return Vec4(n.x(), n.y(), n.z(), -n.dot(rig_from_board.translation()));
      }();
      gt.tof_planes.emplace(std::make_pair(b.id, rig.id),
                            transform_plane(rig.h, HPlane3(plane_rig)).normalized());
      gt.hull_labels[{b.id, rig.id}] = std::move(labels);
      ds.views[{b.id, rig.id}] = std::move(view);
    }
  }
  if (!any_visible) throw Error(ErrorCode::kEmptyScene, "no board is visible to a full rig");
  return out;
}

}  // namespace xcal::synth
