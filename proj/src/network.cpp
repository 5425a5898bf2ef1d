#include "xcal/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <sstream>

namespace xcal::network {

std::string_view to_string(Side side) { return side == Side::kLeft ? "left" : "right"; }

std::string_view to_string(Provenance p) {
  return p == Provenance::kDirect ? "direct" : "composed";
}

Rig::Rig(int rig_id, CameraMatrix tof, CameraMatrix left, CameraMatrix right, Homography3 h)
    : id(rig_id),
      tof_camera(std::move(tof)),
      left_camera(std::move(left)),
      right_camera(std::move(right)),
      stereo_to_tof(std::move(h)) {
  if (left_camera.b().norm() > 1e-9 * left_camera.A().norm()) {
    throw Error(ErrorCode::kInvalidCamera, "left camera must have the form (A | 0)");
  }
}

double rotation_angle_deg(const Mat3& r) {
  const Vec3 axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (r.trace() - 1.0)) * 180.0 / std::numbers::pi;
}

NetworkGraph::NetworkGraph(std::vector<Rig> rigs, int reference_rig)
    : rigs_(std::move(rigs)), reference_rig_(reference_rig) {
  if (rigs_.empty()) throw Error(ErrorCode::kInvalidArgument, "network has no rigs");
  std::sort(rigs_.begin(), rigs_.end(), [](const Rig& a, const Rig& b) { return a.id < b.id; });
  for (std::size_t k = 1; k < rigs_.size(); ++k) {
    if (rigs_[k].id == rigs_[k - 1].id) throw Error(ErrorCode::kInvalidArgument, "duplicate rig id");
  }
  index_of(reference_rig_);
}

std::size_t NetworkGraph::index_of(int id) const {
  for (std::size_t k = 0; k < rigs_.size(); ++k) {
    if (rigs_[k].id == id) return k;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown rig id " + std::to_string(id));
}

const Rig& NetworkGraph::rig(int id) const { return rigs_[index_of(id)]; }

void NetworkGraph::add_direct_edge(int i, int j, const RigidTransform3& g) {
  if (finalized_) throw Error(ErrorCode::kInvalidArgument, "network is finalized");
  index_of(i);
  index_of(j);
  if (i == j) throw Error(ErrorCode::kInvalidArgument, "self edge");
  direct_[{i, j}] = Edge{i, j, g.matrix(), g, Provenance::kDirect, {i, j}};
  const RigidTransform3 inv = g.inverse();
  direct_[{j, i}] = Edge{j, i, inv.matrix(), inv, Provenance::kDirect, {j, i}};
}

void NetworkGraph::add_direct_projective_edge(int i, int j, const Homography3& g) {
  if (finalized_) throw Error(ErrorCode::kInvalidArgument, "network is finalized");
  index_of(i);
  index_of(j);
  if (i == j) throw Error(ErrorCode::kInvalidArgument, "self edge");
  direct_[{i, j}] = Edge{i, j, g.matrix(), std::nullopt, Provenance::kDirect, {i, j}};
  direct_[{j, i}] = Edge{j, i, g.inverse_matrix(), std::nullopt, Provenance::kDirect, {j, i}};
}

std::vector<int> NetworkGraph::path_excluding(int i, int j,
                                              std::optional<std::pair<int, int>> skip) const {
  index_of(i);
  index_of(j);
  if (i == j) return {i};
  // BFS with ascending neighbour order: the first discovery of each node is
  // along a fewest-hop path through the lowest ids.
  std::map<int, int> parent;
  std::deque<int> queue{i};
  parent[i] = i;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (auto it = direct_.lower_bound({u, std::numeric_limits<int>::min()});
         it != direct_.end() && it->first.first == u; ++it) {
      const int v = it->first.second;
      if (skip && ((u == skip->first && v == skip->second) ||
                   (u == skip->second && v == skip->first))) {
        continue;
      }
      if (parent.count(v) != 0) continue;
      parent[v] = u;
      if (v == j) {
        std::vector<int> out{j};
        for (int w = j; w != i;) {
          w = parent[w];
          out.push_back(w);
        }
        std::reverse(out.begin(), out.end());
        return out;
      }
      queue.push_back(v);
    }
  }
  return {};
}

std::vector<int> NetworkGraph::path(int i, int j) const { return path_excluding(i, j, std::nullopt); }

Edge NetworkGraph::product(const std::vector<int>& p, Provenance provenance) const {
  Edge e{p.front(), p.back(), Mat4::Identity(), RigidTransform3(), provenance, p};
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    const Edge& step = direct_.at({p[k], p[k + 1]});
    e.transform = e.transform * step.transform;
    if (e.rigid && step.rigid) {
      e.rigid = *e.rigid * *step.rigid;
    } else {
      e.rigid.reset();
    }
  }
  return e;
}

Edge NetworkGraph::compose(int i, int j) const {
  if (i == j) {
    index_of(i);
    return Edge{i, j, Mat4::Identity(), RigidTransform3(), Provenance::kDirect, {i}};
  }
  if (auto it = direct_.find({i, j}); it != direct_.end()) return it->second;
  if (auto it = cache_.find({i, j}); it != cache_.end()) return it->second;
  const std::vector<int> p = path(i, j);
  if (p.empty()) {
    throw Error(ErrorCode::kDisconnectedNetwork,
                "no path from rig " + std::to_string(j) + " to rig " + std::to_string(i));
  }
  return product(p, Provenance::kComposed);
}

std::vector<std::pair<int, int>> NetworkGraph::disconnected_pairs() const {
  std::vector<std::pair<int, int>> out;
  for (const auto& a : rigs_) {
    for (const auto& b : rigs_) {
      if (a.id < b.id && path(a.id, b.id).empty()) out.emplace_back(a.id, b.id);
    }
  }
  return out;
}

void NetworkGraph::finalize() {
  const auto missing = disconnected_pairs();
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "network is disconnected; unreachable rig pairs:";
    for (const auto& [a, b] : missing) msg << ' ' << a << '-' << b;
    throw Error(ErrorCode::kDisconnectedNetwork, msg.str());
  }
  for (const auto& a : rigs_) {
    for (const auto& b : rigs_) {
      if (a.id == b.id || direct_.count({a.id, b.id}) != 0) continue;
      cache_[{a.id, b.id}] = product(path(a.id, b.id), Provenance::kComposed);
    }
  }
  finalized_ = true;
}

std::vector<Edge> NetworkGraph::direct_edges() const {
  std::vector<Edge> out;
  for (const auto& [key, e] : direct_) out.push_back(e);
  return out;
}

std::vector<Edge> NetworkGraph::all_edges() const {
  std::map<std::pair<int, int>, Edge> merged = cache_;
  for (const auto& [key, e] : direct_) merged[key] = e;
  std::vector<Edge> out;
  for (const auto& [key, e] : merged) out.push_back(e);
  return out;
}

std::vector<CycleDiscrepancy> NetworkGraph::cycle_discrepancies() const {
  std::vector<CycleDiscrepancy> out;
  for (const auto& [key, e] : direct_) {
    if (key.first > key.second || !e.rigid) continue;
    const auto alt = path_excluding(key.first, key.second, key);
    if (alt.empty()) continue;
    const Edge other = product(alt, Provenance::kComposed);
    if (!other.rigid) continue;
    const RigidTransform3 delta = e.rigid->inverse() * *other.rigid;
    out.push_back({key.first, key.second, rotation_angle_deg(delta.rotation()),
                   delta.translation().norm()});
  }
  return out;
}

RigidTransform3 estimate_rigid(std::span<const HPoint3> points_i, std::span<const HPoint3> points_j) {
  if (points_i.size() != points_j.size()) {
    throw Error(ErrorCode::kInvalidArgument, "point lists differ in length");
  }
  std::vector<Vec3> src;
  std::vector<Vec3> dst;
  for (std::size_t k = 0; k < points_i.size(); ++k) {
    if (!points_i[k].is_finite() || !points_j[k].is_finite()) {
      throw Error(ErrorCode::kDegenerateData, "rigid fit needs finite points");
    }
    src.push_back(points_j[k].euclidean());
    dst.push_back(points_i[k].euclidean());
  }
  const SimilarityFit fit = fit_similarity(src, dst, false);
  return RigidTransform3(fit.rotation, fit.translation);
}

CameraMatrix cross_camera(const Rig& rig_i, const Mat4& g_ij, Side side) {
  return rig_i.camera(side) * g_ij;
}

CameraMatrix tof_projection(const NetworkGraph& graph, int i, int j, Side side) {
  const Rig& ri = graph.rig(i);
  if (i == j) {
    const auto& refined = side == Side::kLeft ? ri.refined_left : ri.refined_right;
    if (refined) return *refined;
    return ri.camera(side) * ri.tof_to_rgb();
  }
  const Edge g = graph.compose(i, j);
  return cross_camera(ri, g.transform, side) * graph.rig(j).tof_to_rgb();
}

}  // namespace xcal::network
