#include "xcal/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SVD>

namespace xcal::align {

namespace {

// Observed pixels and ToF points packed column-wise.
struct Packed {
  Eigen::Matrix<double, 4, Eigen::Dynamic> tof;
  Eigen::Matrix<double, 2, Eigen::Dynamic> left;
  Eigen::Matrix<double, 2, Eigen::Dynamic> right;
};

Packed pack(std::span<const Correspondence3D3D> pairs, std::span<const ImageObservation> obs) {
  if (pairs.size() != obs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "correspondences and observations differ in length");
  }
  if (pairs.empty()) throw Error(ErrorCode::kInsufficientData, "no correspondences");
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Packed p{decltype(Packed::tof)(4, n), decltype(Packed::left)(2, n), decltype(Packed::right)(2, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& pair = pairs[static_cast<std::size_t>(k)];
    if (!pair.tof_point.is_finite() || !pair.stereo_point.is_finite()) {
      throw Error(ErrorCode::kPointAtInfinity, "correspondence points must be finite");
    }
    p.tof.col(k) = pair.tof_point.coords();
    p.left.col(k) = obs[static_cast<std::size_t>(k)].left.pixel();
    p.right.col(k) = obs[static_cast<std::size_t>(k)].right.pixel();
  }
  return p;
}

// Writes the 2N pixel residuals of camera * points into out starting at offset.
void projection_residuals(const Mat34& camera, const Eigen::Matrix<double, 4, Eigen::Dynamic>& points,
                          const Eigen::Matrix<double, 2, Eigen::Dynamic>& pixels,
                          Eigen::VectorXd& out, Eigen::Index offset) {
  const Eigen::Matrix<double, 3, Eigen::Dynamic> proj = camera * points;
  const double row_norm = camera.row(2).norm();
  for (Eigen::Index k = 0; k < points.cols(); ++k) {
    const double w = proj(2, k);
    // Points on the principal plane, up to rounding, have no image.
    if (std::abs(w) <= 1e-12 * row_norm * points.col(k).norm()) {
      out[offset + 2 * k] = std::numeric_limits<double>::infinity();
      out[offset + 2 * k + 1] = std::numeric_limits<double>::infinity();
      continue;
    }
    out[offset + 2 * k] = proj(0, k) / w - pixels(0, k);
    out[offset + 2 * k + 1] = proj(1, k) / w - pixels(1, k);
  }
}

double camera_cost(const Mat34& camera, const Packed& p, bool left) {
  Eigen::VectorXd r(2 * p.tof.cols());
  projection_residuals(camera, p.tof, left ? p.left : p.right, r, 0);
  return r.squaredNorm();
}

Eigen::VectorXd gauge_fix(const Eigen::VectorXd& x) { return canonical(x); }

template <int R, int C>
Eigen::VectorXd flatten(const Eigen::Matrix<double, R, C>& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

double rms(double cost, Eigen::Index observations) {
  return std::sqrt(cost / static_cast<double>(observations));
}

void check_initial(double cost) {
  if (!std::isfinite(cost)) {
    throw Error(ErrorCode::kInvalidInitialization, "objective is not finite at the initial estimate");
  }
}

}  // namespace

std::string_view to_string(RefinementMode mode) {
  switch (mode) {
    case RefinementMode::kDltOnly: return "dlt-only";
    case RefinementMode::kJoint: return "joint";
    case RefinementMode::kSeparate: return "separate";
    case RefinementMode::kSimilarity: return "similarity";
  }
  return "unknown";
}

RefinementMode refinement_mode_from_string(std::string_view name) {
  for (auto m : {RefinementMode::kDltOnly, RefinementMode::kJoint, RefinementMode::kSeparate,
                 RefinementMode::kSimilarity}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown refinement mode '" + std::string(name) + "'");
}

CameraMatrix AlignmentResult::left_camera(const CameraMatrix& stereo_left) const {
  if (refined_left) return *refined_left;
  return stereo_left * homography.inverse_matrix();
}

CameraMatrix AlignmentResult::right_camera(const CameraMatrix& stereo_right) const {
  if (refined_right) return *refined_right;
  return stereo_right * homography.inverse_matrix();
}

DltResult dlt_homography3_detailed(std::span<const Correspondence3D3D> pairs) {
  if (pairs.size() < 5) throw Error(ErrorCode::kInsufficientData, "DLT needs at least 5 pairs");
  std::vector<HPoint3> p;
  std::vector<HPoint3> q;
  p.reserve(pairs.size());
  q.reserve(pairs.size());
  for (const auto& pair : pairs) {
    p.push_back(pair.stereo_point);
    q.push_back(pair.tof_point);
  }
  const auto np = normalize_points(std::span<const HPoint3>(p));
  const auto nq = normalize_points(std::span<const HPoint3>(q));

  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a(6 * n, 16);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vec4& pk = np.points[static_cast<std::size_t>(k)].coords();
    const Mat64 w = wedge(nq.points[static_cast<std::size_t>(k)]);
    for (int j = 0; j < 4; ++j) a.block<6, 4>(6 * k, 4 * j) = pk[j] * w;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  if (!(s[14] >= 1e-10 * s[0])) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "design matrix has a multi-dimensional null space (coplanar points?)");
  }
  const Eigen::VectorXd h = svd.matrixV().col(15);
  const Mat4 hn = Eigen::Map<const Mat4>(h.data());
  const Mat4 full = nq.transform.inverse() * hn * np.transform;

  DltResult out{Homography3(canonical(full)), s, (a * h).norm()};
  return out;
}

Homography3 dlt_homography3(std::span<const Correspondence3D3D> pairs) {
  return dlt_homography3_detailed(pairs).homography;
}

double reprojection_error(const CameraMatrix& camera, std::span<const HPoint3> points,
                          std::span<const HPoint2> pixels) {
  if (points.size() != pixels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "point and pixel lists differ in length");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double d = inhomog_distance(camera.project(points[k]), pixels[k]);
    sum += d * d;
  }
  return sum;
}

AlignmentResult dlt_only(const Homography3& h, std::span<const Correspondence3D3D> pairs,
                         std::span<const ImageObservation> observations, const CameraMatrix& left,
                         const CameraMatrix& right) {
  const Packed p = pack(pairs, observations);
  const Eigen::Index n = p.tof.cols();
  AlignmentResult out;
  out.mode = RefinementMode::kDltOnly;
  out.homography = h.normalized();
  out.final_left_cost = camera_cost(left.matrix() * h.inverse_matrix(), p, true);
  out.final_right_cost = camera_cost(right.matrix() * h.inverse_matrix(), p, false);
  out.initial_cost = out.final_cost = out.final_left_cost + out.final_right_cost;
  out.initial_error = out.final_error = rms(out.final_cost, 2 * n);
  out.converged = true;
  out.raw_parameters = 16;
  out.effective_parameters = 15;
  out.cost_history = {out.final_cost};
  return out;
}

AlignmentResult refine_joint(const Homography3& initial, std::span<const Correspondence3D3D> pairs,
                             std::span<const ImageObservation> observations,
                             const CameraMatrix& left, const CameraMatrix& right,
                             const lm::Options& options, const lm::ProgressCallback& progress) {
  const Packed p = pack(pairs, observations);
  const Eigen::Index n = p.tof.cols();
  const Mat34 cl = left.matrix();
  const Mat34 cr = right.matrix();
  auto residuals = [&](const Eigen::VectorXd& x) {
    const Mat4 m = Eigen::Map<const Mat4>(x.data());
    Eigen::VectorXd r(4 * n);
    projection_residuals(cl * m, p.tof, p.left, r, 0);
    projection_residuals(cr * m, p.tof, p.right, r, 2 * n);
    return r;
  };
  const Eigen::VectorXd x0 = flatten(initial.inverse_matrix());
  check_initial(residuals(gauge_fix(x0)).squaredNorm());
  const lm::Summary sum = lm::minimize(residuals, x0, options, gauge_fix, progress);

  const Mat4 m = Eigen::Map<const Mat4>(sum.parameters.data());
  AlignmentResult out;
  out.mode = RefinementMode::kJoint;
  out.homography = Homography3(canonical(Mat4(m.inverse())));
  out.initial_cost = sum.initial_cost;
  out.final_cost = sum.final_cost;
  out.initial_error = rms(sum.initial_cost, 2 * n);
  out.final_error = rms(sum.final_cost, 2 * n);
  out.final_left_cost = camera_cost(cl * m, p, true);
  out.final_right_cost = camera_cost(cr * m, p, false);
  out.iterations = sum.iterations;
  out.converged = sum.converged;
  out.raw_parameters = 16;
  out.effective_parameters = 15;
  out.cost_history = sum.cost_history;
  return out;
}

AlignmentResult refine_separate(const Homography3& initial,
                                std::span<const Correspondence3D3D> pairs,
                                std::span<const ImageObservation> observations,
                                const CameraMatrix& left, const CameraMatrix& right,
                                const lm::Options& options) {
  const Packed p = pack(pairs, observations);
  const Eigen::Index n = p.tof.cols();

  auto solve = [&](const Mat34& start, const Eigen::Matrix<double, 2, Eigen::Dynamic>& pixels) {
    auto residuals = [&](const Eigen::VectorXd& x) {
      const Mat34 c = Eigen::Map<const Mat34>(x.data());
      Eigen::VectorXd r(2 * n);
      projection_residuals(c, p.tof, pixels, r, 0);
      return r;
    };
    const Eigen::VectorXd x0 = flatten(start);
    check_initial(residuals(gauge_fix(x0)).squaredNorm());
    return lm::minimize(residuals, x0, options, gauge_fix);
  };
  const lm::Summary sl = solve(left.matrix() * initial.inverse_matrix(), p.left);
  const lm::Summary sr = solve(right.matrix() * initial.inverse_matrix(), p.right);

  AlignmentResult out;
  out.mode = RefinementMode::kSeparate;
  out.homography = initial.normalized();
  out.refined_left = CameraMatrix(Eigen::Map<const Mat34>(sl.parameters.data()));
  out.refined_right = CameraMatrix(Eigen::Map<const Mat34>(sr.parameters.data()));
  out.initial_cost = sl.initial_cost + sr.initial_cost;
  out.final_cost = sl.final_cost + sr.final_cost;
  out.initial_error = rms(out.initial_cost, 2 * n);
  out.final_error = rms(out.final_cost, 2 * n);
  out.final_left_cost = sl.final_cost;
  out.final_right_cost = sr.final_cost;
  out.iterations = sl.iterations + sr.iterations;
  out.converged = sl.converged && sr.converged;
  out.raw_parameters = 24;
  out.effective_parameters = 22;
  const std::size_t steps = std::max(sl.cost_history.size(), sr.cost_history.size());
  for (std::size_t i = 0; i < steps; ++i) {
    out.cost_history.push_back(sl.cost_history[std::min(i, sl.cost_history.size() - 1)] +
                               sr.cost_history[std::min(i, sr.cost_history.size() - 1)]);
  }
  return out;
}

Similarity3 procrustes_similarity(std::span<const Correspondence3D3D> pairs) {
  std::vector<Vec3> source;
  std::vector<Vec3> target;
  for (const auto& pair : pairs) {
    if (!pair.stereo_point.is_finite() || !pair.tof_point.is_finite()) {
      throw Error(ErrorCode::kDegenerateData, "Procrustes needs finite points");
    }
    source.push_back(pair.stereo_point.euclidean());
    target.push_back(pair.tof_point.euclidean());
  }
  const SimilarityFit fit = fit_similarity(source, target, true);
  return Similarity3::from_matrix(fit.scale, fit.rotation, fit.translation);
}

AlignmentResult refine_similarity(const Similarity3& initial,
                                  std::span<const Correspondence3D3D> pairs,
                                  std::span<const ImageObservation> observations,
                                  const CameraMatrix& left, const CameraMatrix& right,
                                  const lm::Options& options) {
  const Packed p = pack(pairs, observations);
  const Eigen::Index n = p.tof.cols();
  const Mat34 cl = left.matrix();
  const Mat34 cr = right.matrix();
  auto unpack = [](const Eigen::VectorXd& x) {
    return Similarity3(std::exp(x[3]), x.head<3>(), x.tail<3>());
  };
  auto residuals = [&](const Eigen::VectorXd& x) {
    const Mat4 s_inv = unpack(x).inverse().matrix();
    Eigen::VectorXd r(4 * n);
    projection_residuals(cl * s_inv, p.tof, p.left, r, 0);
    projection_residuals(cr * s_inv, p.tof, p.right, r, 2 * n);
    return r;
  };
  Eigen::VectorXd x0(7);
  x0 << initial.rodrigues(), std::log(initial.scale()), initial.translation();
  check_initial(residuals(x0).squaredNorm());
  const lm::Summary sum = lm::minimize(residuals, x0, options);

  const Similarity3 s = unpack(sum.parameters);
  const Mat4 s_inv = s.inverse().matrix();
  AlignmentResult out;
  out.mode = RefinementMode::kSimilarity;
  out.homography = s.as_homography();
  out.similarity = s;
  out.initial_cost = sum.initial_cost;
  out.final_cost = sum.final_cost;
  out.initial_error = rms(sum.initial_cost, 2 * n);
  out.final_error = rms(sum.final_cost, 2 * n);
  out.final_left_cost = camera_cost(cl * s_inv, p, true);
  out.final_right_cost = camera_cost(cr * s_inv, p, false);
  out.iterations = sum.iterations;
  out.converged = sum.converged;
  out.raw_parameters = 7;
  out.effective_parameters = 7;
  out.cost_history = sum.cost_history;
  return out;
}

Homography3 inverse_disparity_homography(double c0, double c1) {
  Mat4 h = Mat4::Identity();
  h(3, 2) = c0;
  h(3, 3) = c1;
  return Homography3(h);
}

}  // namespace xcal::align
