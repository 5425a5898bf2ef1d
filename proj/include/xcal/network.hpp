#pragma once

#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "xcal/geom.hpp"

namespace xcal::network {

enum class Side { kLeft, kRight };
std::string_view to_string(Side side);

// One ToF + stereo system. The left camera frame is the rig frame.
struct Rig {
  int id = 0;
  CameraMatrix tof_camera;
  CameraMatrix left_camera;
  CameraMatrix right_camera;
  Homography3 stereo_to_tof;  // H_i; tof_to_rgb is its inverse
  // Present after separate refinement: ToF points straight to pixels.
  std::optional<CameraMatrix> refined_left;
  std::optional<CameraMatrix> refined_right;

  Rig(int rig_id, CameraMatrix tof, CameraMatrix left, CameraMatrix right, Homography3 h);

  const CameraMatrix& camera(Side side) const {
    return side == Side::kLeft ? left_camera : right_camera;
  }
  const Mat4& tof_to_rgb() const { return stereo_to_tof.inverse_matrix(); }
};

enum class Provenance { kDirect, kComposed };
std::string_view to_string(Provenance p);

// G_ij takes points in rig j's frame to rig i's frame.
struct Edge {
  int i = 0;
  int j = 0;
  Mat4 transform = Mat4::Identity();
  std::optional<RigidTransform3> rigid;  // empty for projective edges
  Provenance provenance = Provenance::kDirect;
  std::vector<int> path;  // i, ..., j
};

// Direct edge compared against the best alternative path avoiding it.
struct CycleDiscrepancy {
  int i = 0;
  int j = 0;
  double rotation_deg = 0.0;
  double translation_mm = 0.0;
};

class NetworkGraph {
 public:
  NetworkGraph(std::vector<Rig> rigs, int reference_rig);

  const std::vector<Rig>& rigs() const { return rigs_; }
  const Rig& rig(int id) const;
  int reference_rig() const { return reference_rig_; }
  bool finalized() const { return finalized_; }

  /// Stores G_ij and its inverse G_ji as direct edges.
  void add_direct_edge(int i, int j, const RigidTransform3& g);
  void add_direct_projective_edge(int i, int j, const Homography3& g);

  /// Checks connectivity and caches every composed transform. Throws
  /// kDisconnectedNetwork listing the unreachable pairs.
  void finalize();

  /// Fewest-hop path i -> j over direct edges; ties go to the lowest
  /// intermediate ids. Empty when unreachable.
  std::vector<int> path(int i, int j) const;

  /// G_ij: identity when i == j, the direct edge when stored, else the
  /// product along path(i, j). Throws kDisconnectedNetwork.
  Edge compose(int i, int j) const;

  std::vector<Edge> direct_edges() const;
  /// Every ordered pair after finalize (composed ones included).
  std::vector<Edge> all_edges() const;
  std::vector<std::pair<int, int>> disconnected_pairs() const;
  std::vector<CycleDiscrepancy> cycle_discrepancies() const;

  /// World frame = reference rig frame; returns G_kj.
  Edge to_world(int j) const { return compose(reference_rig_, j); }

 private:
  std::size_t index_of(int id) const;
  std::vector<int> path_excluding(int i, int j, std::optional<std::pair<int, int>> skip) const;
  Edge product(const std::vector<int>& path, Provenance provenance) const;

  std::vector<Rig> rigs_;
  int reference_rig_;
  std::map<std::pair<int, int>, Edge> direct_;
  std::map<std::pair<int, int>, Edge> cache_;
  bool finalized_ = false;
};

/// Least-squares rigid transform with points_i ~ R points_j + t (Arun's SVD
/// method with reflection correction). Throws kDegenerateData.
RigidTransform3 estimate_rigid(std::span<const HPoint3> points_i, std::span<const HPoint3> points_j);

/// C_sij = C_si G_ij: maps rig-j points into rig i's image on the given side.
CameraMatrix cross_camera(const Rig& rig_i, const Mat4& g_ij, Side side);

/// Camera mapping rig j's ToF points into rig i's image:
/// C_si G_ij H_j^-1, or the refined camera of rig i when i == j and one
/// exists.
CameraMatrix tof_projection(const NetworkGraph& graph, int i, int j, Side side);

double rotation_angle_deg(const Mat3& r);

}  // namespace xcal::network
