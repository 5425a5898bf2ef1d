#include "xcal/tof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "xcal/lm.hpp"

namespace xcal::tof {

namespace {

struct RayModel {
  Mat3 a_inv;
  Vec3 centre;
};

RayModel ray_model(const CameraMatrix& camera) {
  const Eigen::FullPivLU<Mat3> lu(camera.A());
  if (!lu.isInvertible()) throw Error(ErrorCode::kInvalidCamera, "camera A block is singular");
  RayModel m;
  m.a_inv = lu.inverse();
  m.centre = -m.a_inv * camera.b();
  return m;
}

// Radial residual against plane (n, d) with n not necessarily unit.
double radial_residual_impl(const Vec3& centre, const Vec3& p, const Vec3& n, double d) {
  const Vec3 ray = p - centre;
  const double rho = ray.norm();
  if (rho == 0.0) return std::numeric_limits<double>::infinity();
  const double denom = n.dot(ray) / rho;
  if (std::abs(denom) < 1e-12 * n.norm()) return std::numeric_limits<double>::infinity();
  const double rho_pi = -(n.dot(centre) + d) / denom;
  if (!(rho_pi > 0.0)) return std::numeric_limits<double>::infinity();
  return std::abs(rho - rho_pi);
}

}  // namespace

RangeSample::RangeSample(const Vec2& pixel, double range_mm, double max_range_mm)
    : pixel_(pixel), range_(range_mm) {
  if (!pixel.allFinite() || !(range_mm > 0.0) || !(range_mm <= max_range_mm)) {
    throw Error(ErrorCode::kInvalidSample, "range must lie in (0, max_range]");
  }
}

std::size_t FittedPlane::inlier_count() const {
  return static_cast<std::size_t>(std::count(inlier_mask.begin(), inlier_mask.end(), true));
}

HPoint3 backproject(const CameraMatrix& camera, const RangeSample& sample) {
  const RayModel m = ray_model(camera);
  const Vec3 dir = m.a_inv * sample.pixel().homogeneous();
  const double alpha = dir.norm();
  return HPoint3::from_euclidean(m.a_inv * ((sample.range() / alpha) * sample.pixel().homogeneous() - camera.b()));
}

RefinedRange refine_range(const CameraMatrix& camera, const HPoint2& q, const HPlane3& plane) {
  const RayModel m = ray_model(camera);
  const HPlane3 v = plane.normalized();
  const Vec3 qn = q.pixel().homogeneous();
  const Vec3 dir = m.a_inv * qn;
  const double alpha = dir.norm();
  const double numerator = v.normal().dot(m.a_inv * camera.b()) - v.offset();
  const double denominator = v.normal().dot(dir) / alpha;
  if (std::abs(denominator) < 1e-12) {
    throw Error(ErrorCode::kRayParallelToPlane, "visual ray is parallel to the plane");
  }
  const double rho = numerator / denominator;
  if (!(rho > 0.0)) throw Error(ErrorCode::kPlaneBehindCamera, "plane lies behind the camera");
  const Vec3 p = m.a_inv * ((rho / alpha) * qn - camera.b());
  return {rho, HPoint3::from_euclidean(p)};
}

double radial_residual(const CameraMatrix& camera, const HPoint3& point, const HPlane3& plane) {
  const RayModel m = ray_model(camera);
  return radial_residual_impl(m.centre, point.euclidean(), plane.normal(), plane.offset());
}

double perpendicular_distance(const HPoint3& point, const HPlane3& plane) {
  return std::abs(plane.residual(point));
}

FittedPlane fit_plane_ransac(std::span<const HPoint3> points, const CameraMatrix& camera,
                             const PlaneFitOptions& options) {
  if (points.size() < 3) throw Error(ErrorCode::kDegenerateData, "plane fit needs at least 3 points");
  if (!(options.threshold_mm > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must be positive");
  }
  const RayModel rays = ray_model(camera);
  const std::size_t n = points.size();
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (const auto& p : points) pts.push_back(p.euclidean());

  {
    Vec3 c = Vec3::Zero();
    for (const auto& p : pts) c += p;
    c /= static_cast<double>(n);
    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) cov += (p - c) * (p - c).transpose();
    const Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    const Vec3 ev = es.eigenvalues().cwiseMax(0.0);
    if (!(std::sqrt(ev[1]) > 1e-9 * std::sqrt(ev[2]))) {
      throw Error(ErrorCode::kDegenerateData, "points are collinear");
    }
  }

  auto score = [&](const Vec3& normal, double d, std::vector<bool>& mask) {
    std::size_t count = 0;
    mask.assign(n, false);
    for (std::size_t k = 0; k < n; ++k) {
      if (radial_residual_impl(rays.centre, pts[k], normal, d) <= options.threshold_mm) {
        mask[k] = true;
        ++count;
      }
    }
    return count;
  };

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<bool> mask;
  std::vector<bool> best_mask;
  std::size_t best_count = 0;
  double required = static_cast<double>(options.max_iterations);
  for (int it = 0; it < options.max_iterations && it < required; ++it) {
    const std::size_t i0 = pick(rng);
    std::size_t i1 = pick(rng);
    std::size_t i2 = pick(rng);
    if (i0 == i1 || i0 == i2 || i1 == i2) continue;
    const Vec3 normal = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]);
    const double scale = (pts[i1] - pts[i0]).norm() * (pts[i2] - pts[i0]).norm();
    if (!(normal.norm() > 1e-9 * scale)) continue;
    const Vec3 unit = normal.normalized();
    const std::size_t count = score(unit, -unit.dot(pts[i0]), mask);
    if (count > best_count) {
      best_count = count;
      best_mask = mask;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double p_good = w * w * w;
      if (p_good >= 1.0) {
        required = 0.0;
      } else if (-std::log1p(-p_good) > 0.0) {
        required = std::log(1.0 - options.confidence) / std::log1p(-p_good);
      }
    }
  }
  if (best_count < 3) throw Error(ErrorCode::kNoConsensus, "no plane hypothesis reached 3 inliers");

  Vec3 normal;
  double offset = 0.0;
  std::vector<bool> current = best_mask;
  for (int round = 0; round < 5; ++round) {
    std::vector<Vec3> in;
    for (std::size_t k = 0; k < n; ++k) {
      if (current[k]) in.push_back(pts[k]);
    }
    Vec3 c = Vec3::Zero();
    for (const auto& p : in) c += p;
    c /= static_cast<double>(in.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : in) cov += (p - c) * (p - c).transpose();
    const Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    const Vec3 n0 = es.eigenvectors().col(0);
    const double d0 = -n0.dot(c);

    // Tangent basis around the TLS normal; parameters are (a, b, offset).
    const Vec3 t1 = n0.unitOrthogonal();
    const Vec3 t2 = n0.cross(t1);
    auto unpack = [&](const Eigen::VectorXd& x) -> std::pair<Vec3, double> {
      const Vec3 raw = n0 + x[0] * t1 + x[1] * t2;
      const double len = raw.norm();
      return {raw / len, x[2]};
    };
    auto residuals = [&](const Eigen::VectorXd& x) {
      const auto [nn, dd] = unpack(x);
      Eigen::VectorXd r(static_cast<Eigen::Index>(in.size()));
      for (std::size_t k = 0; k < in.size(); ++k) {
        const Vec3 ray = in[k] - rays.centre;
        const double rho = ray.norm();
        const double denom = nn.dot(ray) / rho;
        r[static_cast<Eigen::Index>(k)] = rho + (nn.dot(rays.centre) + dd) / denom;
      }
      return r;
    };
    Eigen::VectorXd x0(3);
    x0 << 0.0, 0.0, d0;
    lm::Summary fit;
    try {
      fit = lm::minimize(residuals, x0);
    } catch (const Error&) {
      fit.parameters = x0;
    }
    std::tie(normal, offset) = unpack(fit.parameters);
    const std::size_t count = score(normal, offset, mask);
    if (count < 3) throw Error(ErrorCode::kNoConsensus, "refit lost consensus");
    if (mask == current) break;
    current = mask;
  }

  FittedPlane out{HPlane3(Vec4(normal.x(), normal.y(), normal.z(), offset)), {}, 0.0};
  score(normal, offset, out.inlier_mask);
  double ss = 0.0;
  std::size_t cnt = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!out.inlier_mask[k]) continue;
    const double r = radial_residual_impl(rays.centre, pts[k], normal, offset);
    ss += r * r;
    ++cnt;
  }
  out.rms_radial_residual = std::sqrt(ss / static_cast<double>(cnt));
  return out;
}

}  // namespace xcal::tof
