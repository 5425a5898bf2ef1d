#include "xcal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "xcal/lm.hpp"

namespace xcal::eval {

Homography2::Homography2(const Mat3& entries) : entries_(entries) {
  if (!entries_.allFinite() || entries_.norm() == 0.0) {
    throw Error(ErrorCode::kNotInvertible, "homography must be finite and non-zero");
  }
  const Eigen::JacobiSVD<Mat3> svd(entries_ / entries_.norm());
  if (!(svd.singularValues()[2] > 1e-14 * svd.singularValues()[0])) {
    throw Error(ErrorCode::kNotInvertible, "homography is singular");
  }
  inverse_ = entries_.inverse();
}

Homography2 dlt_homography2(std::span<const HPoint2> src, std::span<const HPoint2> dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::kInvalidArgument, "point lists differ in length");
  }
  if (src.size() < 4) throw Error(ErrorCode::kInsufficientData, "need at least 4 correspondences");
  const auto ns = normalize_points(src);
  const auto nd = normalize_points(dst);
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd a(3 * n, 9);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vec3& s = ns.points[static_cast<std::size_t>(k)].coords();
    const Mat3 w = cross_matrix(nd.points[static_cast<std::size_t>(k)].coords());
    // cross(d, H s) = (s^T kron [d]x) vec(H), column-major vec.
    for (int j = 0; j < 3; ++j) a.block<3, 3>(3 * k, 3 * j) = s[j] * w;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (!(sv[7] >= 1e-10 * sv[0])) {
    throw Error(ErrorCode::kDegenerateData, "correspondences do not fix a homography (collinear points?)");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  const Mat3 hn = Eigen::Map<const Mat3>(h.data());
  const Mat3 init = nd.transform.inverse() * hn * ns.transform;

  std::vector<Vec2> sp;
  std::vector<Vec2> dp;
  for (std::size_t k = 0; k < src.size(); ++k) {
    sp.push_back(src[k].pixel());
    dp.push_back(dst[k].pixel());
  }
  auto residuals = [&](const Eigen::VectorXd& x) {
    const Mat3 m = Eigen::Map<const Mat3>(x.data());
    const Eigen::FullPivLU<Mat3> lu(m);
    Eigen::VectorXd r(4 * n);
    if (!lu.isInvertible()) {
      r.setConstant(std::numeric_limits<double>::infinity());
      return r;
    }
    const Mat3 mi = lu.inverse();
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto idx = static_cast<std::size_t>(k);
      const Vec3 f = m * sp[idx].homogeneous();
      const Vec3 b = mi * dp[idx].homogeneous();
      r.segment<2>(4 * k) = f.head<2>() / f[2] - dp[idx];
      r.segment<2>(4 * k + 2) = b.head<2>() / b[2] - sp[idx];
    }
    return r;
  };
  Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(init.data(), 9);
  Eigen::VectorXd x = canonical(x0);
  try {
    x = lm::minimize(residuals, x0, {}, [](const Eigen::VectorXd& v) -> Eigen::VectorXd {
          return canonical(v);
        }).parameters;
  } catch (const Error&) {
    // Non-finite transfer at the linear estimate; keep it.
  }
  return Homography2(Eigen::Map<const Mat3>(x.data()));
}

std::string_view to_string(Region r) {
  switch (r) {
    case Region::kNone: return "none";
    case Region::kBlack: return "black";
    case Region::kWhite: return "white";
  }
  return "none";
}

std::size_t histogram_bin(double error) {
  if (error > 3.0) return kHistogramBins;
  const auto bin = static_cast<std::size_t>(std::floor(std::max(error, 0.0) * 10.0));
  return std::min<std::size_t>(bin, kHistogramBins - 1);
}

ErrorReport::ErrorReport(std::vector<PointError> errors) : errors_(std::move(errors)) {
  if (errors_.empty()) return;
  summary_ = summarize(*this);
  for (const auto& e : errors_) ++histogram_[histogram_bin(e.error)];
}

ErrorReport ErrorReport::filtered(const std::function<bool(const PointError&)>& keep) const {
  std::vector<PointError> out;
  std::copy_if(errors_.begin(), errors_.end(), std::back_inserter(out), keep);
  return ErrorReport(std::move(out));
}

ErrorReport ErrorReport::merged(const ErrorReport& other) const {
  std::vector<PointError> out = errors_;
  out.insert(out.end(), other.errors_.begin(), other.errors_.end());
  return ErrorReport(std::move(out));
}

Summary summarize(const ErrorReport& report) {
  const auto& errors = report.errors();
  if (errors.empty()) throw Error(ErrorCode::kEmptyReport, "report has no entries");
  std::vector<double> v;
  v.reserve(errors.size());
  for (const auto& e : errors) v.push_back(e.error);
  Summary s;
  s.count = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  s.max = *std::max_element(v.begin(), v.end());
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  s.median = v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
  return s;
}

void write_points_csv(std::ostream& out, const ErrorReport& report) {
  out << "board_id,point_id,rig_i,rig_j,side,region,error_px\n";
  out << std::setprecision(17);
  for (const auto& e : report.errors()) {
    out << e.board_id << ',' << e.point_id << ',' << e.rig_i << ',' << e.rig_j << ','
        << network::to_string(e.side) << ',' << to_string(e.region) << ',' << e.error << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const ErrorReport& report) {
  out << "bin_low,bin_high,count\n";
  const Histogram& h = report.histogram();
  out << std::fixed << std::setprecision(1);
  for (int b = 0; b < kHistogramBins; ++b) {
    out << b * kHistogramWidth << ',' << (b + 1) * kHistogramWidth << ','
        << h[static_cast<std::size_t>(b)] << '\n';
  }
  out << 3.0 << ",inf," << h[kHistogramBins] << '\n';
  out.unsetf(std::ios_base::floatfield);
}

namespace {

double pixel_distance(const CameraMatrix& camera, const Vec3& point, const Vec2& target) {
  const Vec3 p = camera.matrix() * point.homogeneous();
  if (p[2] == 0.0) throw Error(ErrorCode::kPointAtInfinity, "point projects to infinity");
  return (p.head<2>() / p[2] - target).norm();
}

const std::vector<Vec2>& side_vertices(const BoardView& v, network::Side side) {
  return side == network::Side::kLeft ? v.left_vertices : v.right_vertices;
}

template <typename Fn>
void for_each_shared_board(const BoardViews& views, int i, int j, Fn&& fn) {
  for (const auto& [key, view_j] : views) {
    if (key.second != j) continue;
    const auto it = views.find({key.first, i});
    if (it == views.end()) continue;
    fn(it->second, view_j);
  }
}

}  // namespace

ErrorReport calibration_error(const network::NetworkGraph& graph, const BoardViews& views, int i,
                              int j) {
  const CameraMatrix& tof_camera = graph.rig(j).tof_camera;
  std::vector<PointError> out;
  for (const network::Side side : {network::Side::kLeft, network::Side::kRight}) {
    const CameraMatrix camera = network::tof_projection(graph, i, j, side);
    for_each_shared_board(views, i, j, [&](const BoardView& view_i, const BoardView& view_j) {
      if (!view_j.fitted_plane) {
        throw Error(ErrorCode::kMissingPlane, "board " + std::to_string(view_j.board_id) +
                                                  " has no fitted plane in rig " +
                                                  std::to_string(j));
      }
      const auto& targets = side_vertices(view_i, side);
      if (targets.size() != view_j.tof_vertices.size()) {
        throw Error(ErrorCode::kInvalidArgument, "vertex counts differ between views");
      }
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const auto refined = tof::refine_range(tof_camera, HPoint2::from_pixel(view_j.tof_vertices[k]),
                                               view_j.fitted_plane->plane);
        out.push_back({view_j.board_id, static_cast<int>(k), i, j, side,
                       pixel_distance(camera, refined.point.euclidean(), targets[k]), Region::kNone});
      }
    });
  }
  return ErrorReport(std::move(out));
}

ErrorReport total_error(const network::NetworkGraph& graph, const BoardViews& views, int i, int j) {
  const CameraMatrix& tof_camera = graph.rig(j).tof_camera;
  std::vector<PointError> out;
  for (const network::Side side : {network::Side::kLeft, network::Side::kRight}) {
    const CameraMatrix camera = network::tof_projection(graph, i, j, side);
    for_each_shared_board(views, i, j, [&](const BoardView& view_i, const BoardView& view_j) {
      std::vector<HPoint2> src;
      std::vector<HPoint2> dst;
      for (const auto& v : view_j.tof_vertices) src.push_back(HPoint2::from_pixel(v));
      for (const auto& v : side_vertices(view_i, side)) dst.push_back(HPoint2::from_pixel(v));
      std::optional<Homography2> transfer;
      try {
        transfer = dlt_homography2(src, dst);
      } catch (const Error& e) {
        throw Error(ErrorCode::kTransferEstimation,
                    "transfer homography for board " + std::to_string(view_j.board_id) + ": " +
                        e.what());
      }
      for (std::size_t k = 0; k < view_j.hull.size(); ++k) {
        const auto& sample = view_j.hull[k];
        const Vec3 q = tof::backproject(tof_camera, sample).euclidean();
        const Vec2 t = transfer->apply(sample.q()).pixel();
        const Region region = view_j.hull_regions.empty() ? Region::kNone : view_j.hull_regions[k];
        out.push_back({view_j.board_id, static_cast<int>(k), i, j, side,
                       pixel_distance(camera, q, t), region});
      }
    });
  }
  return ErrorReport(std::move(out));
}

std::vector<Vec2> pixels_in_convex_hull(std::span<const Vec2> points, int width, int height) {
  std::vector<Vec2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (pts.size() < 3) return {};
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  // Monotone chain, counter-clockwise.
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) return {};

  double min_x = hull[0].x(), max_x = min_x, min_y = hull[0].y(), max_y = min_y;
  for (const auto& p : hull) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  std::vector<Vec2> out;
  const int x0 = std::max(0, static_cast<int>(std::ceil(min_x)));
  const int x1 = std::min(width - 1, static_cast<int>(std::floor(max_x)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(min_y)));
  const int y1 = std::min(height - 1, static_cast<int>(std::floor(max_y)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p(x, y);
      bool inside = true;
      for (std::size_t e = 0; e < hull.size() && inside; ++e) {
        inside = cross(hull[e], hull[(e + 1) % hull.size()], p) >= 0.0;
      }
      if (inside) out.push_back(p);
    }
  }
  return out;
}

}  // namespace xcal::eval
